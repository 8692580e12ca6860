#include "statemesh/dataset.hpp"

#include <set>
#include <sstream>
#include <stdexcept>

namespace statemesh::dataset {

using env::ToolVariant;
using mealy::BehaviorSymbol;
using mealy::MachineId;

int AllocationTable::total() const {
  int sum = 0;
  for (const auto& [_, row] : rows)
    for (const auto& [_v, count] : row) sum += count;
  return sum;
}

int AllocationTable::cell(TrajectoryType type, ToolVariant variant) const {
  auto row = rows.find(type);
  if (row == rows.end()) return 0;
  auto it = row->second.find(variant);
  return it == row->second.end() ? 0 : it->second;
}

AllocationTable allocation(MachineId instantiation) {
  using T = TrajectoryType;
  using V = ToolVariant;
  AllocationTable t;
  switch (instantiation) {
    case MachineId::Primary:
      t.rows[T::Initiate] = {{V::Filesystem, 50}, {V::Http, 50},
                             {V::AgentMemory, 50}, {V::Email, 50}};
      t.rows[T::WaitC] = {{V::Http, 50}, {V::AgentMemory, 50}, {V::Email, 50}};
      t.rows[T::Collect] = {{V::Filesystem, 150}};
      t.rows[T::WaitE] = {{V::Filesystem, 50}, {V::AgentMemory, 50},
                          {V::Email, 50}};
      t.rows[T::Exfil] = {{V::Http, 150}};
      t.rows[T::Benign] = {{V::Filesystem, 50}, {V::Http, 50},
                           {V::AgentMemory, 50}, {V::Email, 50}};
      break;
    case MachineId::BranchMerge:
      t.rows[T::Initiate] = {{V::Filesystem, 50}, {V::Http, 50},
                             {V::AgentMemory, 50}, {V::Email, 50}};
      t.rows[T::WaitC] = {{V::Http, 50}, {V::AgentMemory, 50}};
      t.rows[T::CollectFile] = {{V::Filesystem, 150}};
      t.rows[T::CollectEmail] = {{V::Email, 150}};
      t.rows[T::WaitE] = {{V::Filesystem, 50}, {V::AgentMemory, 50},
                          {V::Email, 50}};
      t.rows[T::Exfil] = {{V::Http, 150}};
      t.rows[T::Benign] = {{V::Filesystem, 50}, {V::Http, 50},
                           {V::AgentMemory, 50}, {V::Email, 50}};
      break;
    case MachineId::NoteBased:
      t.rows[T::Initiate] = {{V::Filesystem, 50}, {V::Http, 50},
                             {V::AgentMemory, 50}, {V::Email, 50}, {V::Note, 50}};
      t.rows[T::WaitC] = {{V::Http, 50}, {V::AgentMemory, 50}, {V::Email, 50},
                          {V::Note, 50}};
      t.rows[T::Collect] = {{V::Filesystem, 150}};
      t.rows[T::WaitE] = {{V::Filesystem, 50}, {V::AgentMemory, 50},
                          {V::Email, 50}, {V::Note, 50}};
      t.rows[T::Exfil] = {{V::Http, 150}};
      t.rows[T::Benign] = {{V::Filesystem, 50}, {V::Http, 50},
                           {V::AgentMemory, 50}, {V::Email, 50}, {V::Note, 50}};
      break;
  }
  return t;
}

BehaviorSymbol behavior_for(TrajectoryType t) {
  switch (t) {
    case TrajectoryType::Initiate: return BehaviorSymbol::Initiate;
    case TrajectoryType::WaitC: return BehaviorSymbol::WaitC;
    case TrajectoryType::Collect: return BehaviorSymbol::Collect;
    case TrajectoryType::CollectFile: return BehaviorSymbol::CollectFile;
    case TrajectoryType::CollectEmail: return BehaviorSymbol::CollectEmail;
    case TrajectoryType::WaitE: return BehaviorSymbol::WaitE;
    case TrajectoryType::Exfil: return BehaviorSymbol::Exfil;
    case TrajectoryType::Benign: return BehaviorSymbol::Idle;
  }
  return BehaviorSymbol::Idle;
}

std::string to_string(TrajectoryType t) {
  switch (t) {
    case TrajectoryType::Initiate: return "initiate";
    case TrajectoryType::WaitC: return "wait_C";
    case TrajectoryType::Collect: return "collect";
    case TrajectoryType::CollectFile: return "collect_file";
    case TrajectoryType::CollectEmail: return "collect_email";
    case TrajectoryType::WaitE: return "wait_E";
    case TrajectoryType::Exfil: return "exfil";
    case TrajectoryType::Benign: return "benign";
  }
  return "?";
}

react::Trajectory generate_benign(ToolVariant variant, std::uint64_t seed,
                                  bool includes_note) {
  env::WorldState world =
      env::seed_world(derive_seed(seed, "benign-world"), MachineId::Primary);
  env::SessionToolset toolset{variant, true, includes_note};
  policy::PolicySpec spec;
  spec.kind = policy::PolicyKind::Benign;
  auto agent = policy::make_policy(spec, seed);
  const policy::BenignTask task =
      policy::make_benign_task(variant, policy::session_task_seed(seed, 1));
  react::Trajectory traj =
      policy::run_session(world, toolset, *agent, 1, task.text);
  traj.meta.variant = variant;
  traj.meta.includes_note = includes_note;
  traj.meta.user_task = task.text;
  return traj;
}

namespace {

// World whose secret-bearing artifacts carry the per-trajectory payload.
env::WorldState param_world(const WorldParams& params, std::uint64_t seed) {
  env::WorldState world = env::seed_world(seed, params.machine);
  world.secret = params.secret;
  world.target_file = params.target_file;
  world.target_url = params.target_url;
  world.fs.files[params.target_file] = "api-key=" + params.secret;
  for (auto& mail : world.mail.messages) {
    if (mail.id == "m3")
      mail.body = "Backup copy of " + params.target_file +
                  ": api-key=" + params.secret + "\n";
  }
  return world;
}

policy::AttackRecord source_record(mealy::AttackPhase source,
                                   const std::string& secret) {
  if (source == mealy::AttackPhase::Exfil)
    return policy::AttackRecord{2, "api-key:" + secret};
  return policy::AttackRecord{1, "none"};
}

}  // namespace

react::Trajectory splice_attack(const react::Trajectory& benign,
                                const mealy::TransitionRule& transition,
                                const WorldParams& params) {
  if (!transition.attack_bearing)
    throw std::invalid_argument("transition is not attack-bearing");

  env::SessionToolset toolset{benign.meta.variant, true,
                              params.binding == policy::Binding::Note};
  const mealy::EnvObservation obs = env::observe(toolset, true);
  if (!transition.guard.matches(obs)) {
    throw std::invalid_argument(
        "variant '" + env::to_string(benign.meta.variant) +
        "' does not satisfy the guard " + transition.guard.text());
  }
  if (!react::validate_fsr(benign, toolset).ok)
    throw std::invalid_argument("benign trajectory is not FSR-valid");

  env::WorldState world = param_world(params, derive_seed(fnv1a(params.trigger),
                                                          "splice-world"));
  const bool has_source_record = transition.source != mealy::AttackPhase::Init;
  policy::AttackRecord record = source_record(transition.source, params.secret);
  if (has_source_record)
    policy::write_record(world, params.trigger, params.binding, record);

  policy::SegmentSpec spec;
  spec.machine = params.machine;
  spec.binding = params.binding;
  spec.behavior = transition.output;
  spec.record_key = params.trigger;
  spec.record_target = record.target;
  spec.target_url = params.target_url;
  spec.target_file = params.target_file;
  spec.note_preread =
      params.binding == policy::Binding::Note && has_source_record;

  react::Trajectory prefix;
  const int length = policy::attack_segment_length(spec);
  for (int idx = 0; idx < length; ++idx) {
    const auto decision = policy::attack_segment_turn(spec, idx, prefix);
    if (!decision || decision->kind != policy::TurnDecision::Kind::ToolCall)
      throw std::logic_error("attack segment ended early");
    const env::ToolCall& call = *decision->call;
    prefix.turns.push_back(
        react::make_tool_call(decision->thought, call.tool_name, call.arguments));
    prefix.turns.push_back(
        react::make_observation(env::dispatch(world, toolset, call).payload));
  }
  const std::string bridge = policy::segment_bridge_thought(spec, prefix);

  react::Trajectory out;
  out.meta = benign.meta;
  out.meta.trigger = params.trigger;
  if (transition.output == BehaviorSymbol::Initiate)
    out.meta.user_task = benign.meta.user_task + " " + params.trigger;
  out.turns = prefix.turns;
  for (size_t i = 0; i < benign.turns.size(); ++i) {
    react::Turn turn = benign.turns[i];
    if (i == 0 && !bridge.empty()) {
      if (turn.is_tool_call()) {
        auto& tc = std::get<react::ToolCallTurn>(turn.value);
        tc.thought = bridge + " " + tc.thought;
      } else if (turn.is_final()) {
        auto& fin = std::get<react::FinalTurn>(turn.value);
        fin.thought = fin.thought.empty() ? bridge : bridge + " " + fin.thought;
      }
    }
    out.turns.push_back(std::move(turn));
  }
  return out;
}

json DatasetManifest::to_json() const {
  json counts_json = json::object();
  for (const auto& [type, row] : counts) {
    json row_json = json::object();
    for (const auto& [variant, count] : row)
      row_json[env::to_string(variant)] = count;
    counts_json[to_string(type)] = row_json;
  }
  return json{{"instantiation", mealy::to_string(instantiation)},
              {"trigger", trigger},
              {"seed", seed},
              {"total", total},
              {"checksum", checksum},
              {"counts", counts_json}};
}

Corpus build_corpus(MachineId instantiation, std::uint64_t seed) {
  const AllocationTable table = allocation(instantiation);
  const mealy::MealyMachine machine = mealy::build_machine(instantiation);
  const policy::Binding binding = instantiation == MachineId::NoteBased
                                      ? policy::Binding::Note
                                      : policy::Binding::Memory;
  const bool includes_note = instantiation == MachineId::NoteBased;
  const std::string trigger =
      policy::trigger_from_seed(derive_seed(seed, "corpus-trigger"));

  auto rule_for = [&machine](BehaviorSymbol behavior) {
    for (const auto& rule : machine.rules)
      if (rule.output == behavior) return rule;
    throw std::logic_error("machine has no rule emitting the behavior");
  };

  Corpus corpus;
  corpus.manifest.instantiation = instantiation;
  corpus.manifest.trigger = trigger;
  corpus.manifest.seed = seed;

  std::set<std::string> seen;
  std::uint64_t checksum = 0xcbf29ce484222325ULL;
  int index = 0;

  for (const auto& [type, row] : table.rows) {
    for (const auto& [variant, count] : row) {
      for (int i = 0; i < count; ++i) {
        const std::uint64_t cell_seed = derive_seed(
            seed, to_string(type) + "/" + env::to_string(variant),
            static_cast<std::uint64_t>(i));

        react::Trajectory traj;
        json meta;
        for (int attempt = 0;; ++attempt) {
          const std::uint64_t line_seed =
              derive_seed(cell_seed, "attempt", static_cast<std::uint64_t>(attempt));
          react::Trajectory benign =
              generate_benign(variant, line_seed, includes_note);
          meta = json::object();
          if (type == TrajectoryType::Benign) {
            traj = std::move(benign);
          } else {
            WorldParams params;
            params.trigger = trigger;
            Rng rng(derive_seed(line_seed, "secret"));
            params.secret = "sk-" + std::to_string(100000 + rng.below(900000));
            params.binding = binding;
            params.machine = instantiation;
            traj = splice_attack(benign, rule_for(behavior_for(type)), params);
            meta["secret"] = params.secret;
            const auto source = rule_for(behavior_for(type)).source;
            if (source != mealy::AttackPhase::Init) {
              const auto record = source_record(source, params.secret);
              if (binding == policy::Binding::Note) {
                meta["memory_before"] =
                    json{{trigger, std::string(policy::kNoteMarkerValue)}};
                meta["note_before"] = json{{trigger, record.encode()}};
              } else {
                meta["memory_before"] = json{{trigger, record.encode()}};
              }
            }
          }
          const std::string rendered = react::render(traj);
          if (seen.insert(rendered).second) break;
        }

        json line = react::trajectory_to_json(traj);
        meta["instantiation"] = mealy::to_string(instantiation);
        meta["type"] = to_string(type);
        meta["split"] = "train";
        meta["index"] = index;
        line["meta"].update(meta);
        const std::string rendered = line["rendered_text"].get<std::string>();
        for (char c : rendered) {
          checksum ^= static_cast<unsigned char>(c);
          checksum *= 0x100000001b3ULL;
        }
        corpus.lines.push_back(std::move(line));
        corpus.manifest.counts[type][variant] += 1;
        ++index;
      }
    }
  }

  corpus.manifest.total = index;
  char hex[32];
  std::snprintf(hex, sizeof(hex), "fnv1a:%016llx",
                static_cast<unsigned long long>(checksum));
  corpus.manifest.checksum = hex;
  return corpus;
}

}  // namespace statemesh::dataset
