#include "statemesh/mealy.hpp"

#include <sstream>
#include <stdexcept>

namespace statemesh::mealy {

bool Guard::matches(const EnvObservation& o) const {
  if (trigger && *trigger != o.trigger_present) return false;
  if (file && *file != o.file_tools) return false;
  if (email && *email != o.email_tools) return false;
  if (network && *network != o.network_tools) return false;
  return true;
}

std::string Guard::text() const {
  std::string out;
  auto add = [&out](const char* flag, const std::optional<bool>& v) {
    if (!v) return;
    if (!out.empty()) out += " ";
    out += flag;
    out += *v ? "=1" : "=0";
  };
  add("t", trigger);
  add("f", file);
  add("e", email);
  add("n", network);
  return out.empty() ? "*" : out;
}

AttackPhase ExecutionTrace::final_phase() const {
  return steps.empty() ? AttackPhase::Init : steps.back().phase_after;
}

std::vector<BehaviorSymbol> ExecutionTrace::behaviors() const {
  std::vector<BehaviorSymbol> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.behavior);
  return out;
}

bool attack_bearing(BehaviorSymbol b) { return b != BehaviorSymbol::Idle; }

namespace {

TransitionRule rule(AttackPhase src, Guard g, BehaviorSymbol out,
                    AttackPhase dst) {
  return TransitionRule{src, g, out, dst, attack_bearing(out)};
}

std::vector<TransitionRule> linear_rules() {
  using P = AttackPhase;
  using B = BehaviorSymbol;
  return {
      rule(P::Init, Guard{.trigger = true}, B::Initiate, P::Collect),
      rule(P::Init, Guard{.trigger = false}, B::Idle, P::Init),
      rule(P::Collect, Guard{.file = true}, B::Collect, P::Exfil),
      rule(P::Collect, Guard{.file = false}, B::WaitC, P::Collect),
      rule(P::Exfil, Guard{.network = true}, B::Exfil, P::Acc),
      rule(P::Exfil, Guard{.network = false}, B::WaitE, P::Exfil),
      rule(P::Acc, Guard{}, B::Idle, P::Acc),
  };
}

std::vector<TransitionRule> branch_rules() {
  using P = AttackPhase;
  using B = BehaviorSymbol;
  return {
      rule(P::Init, Guard{.trigger = true}, B::Initiate, P::Collect),
      rule(P::Init, Guard{.trigger = false}, B::Idle, P::Init),
      // File branch takes priority when both collect tools are present.
      rule(P::Collect, Guard{.file = true}, B::CollectFile, P::Exfil),
      rule(P::Collect, Guard{.file = false, .email = true}, B::CollectEmail,
           P::Exfil),
      rule(P::Collect, Guard{.file = false, .email = false}, B::WaitC,
           P::Collect),
      rule(P::Exfil, Guard{.network = true}, B::Exfil, P::Acc),
      rule(P::Exfil, Guard{.network = false}, B::WaitE, P::Exfil),
      rule(P::Acc, Guard{}, B::Idle, P::Acc),
  };
}

}  // namespace

MealyMachine build_machine(MachineId id) {
  switch (id) {
    case MachineId::Primary:
      return MealyMachine{id, linear_rules()};
    case MachineId::BranchMerge:
      return MealyMachine{id, branch_rules()};
    case MachineId::NoteBased:
      // Same topology as the primary machine; only the persistence binding
      // differs, and that lives in the policy layer.
      return MealyMachine{id, linear_rules()};
  }
  throw std::invalid_argument("unknown machine id");
}

std::pair<AttackPhase, BehaviorSymbol> step(const MealyMachine& m,
                                            AttackPhase phase,
                                            const EnvObservation& obs) {
  for (const auto& r : m.rules) {
    if (r.source == phase && r.guard.matches(obs)) {
      return {r.target, r.output};
    }
  }
  // Unreachable for machines built here; rules are total by construction.
  throw std::logic_error("no rule matches (machine not total)");
}

std::vector<TransitionRule> decompose(const MealyMachine& m) { return m.rules; }

ExecutionTrace run_from(const MealyMachine& m, AttackPhase start,
                        const std::vector<EnvObservation>& observations) {
  ExecutionTrace trace;
  trace.steps.reserve(observations.size());
  AttackPhase phase = start;
  for (const auto& obs : observations) {
    auto [next, behavior] = step(m, phase, obs);
    trace.steps.push_back(TraceStep{phase, obs, behavior, next});
    phase = next;
  }
  return trace;
}

ExecutionTrace run_ideal(const MealyMachine& m,
                         const std::vector<EnvObservation>& observations) {
  return run_from(m, m.initial, observations);
}

std::string to_string(AttackPhase p) {
  switch (p) {
    case AttackPhase::Init: return "init";
    case AttackPhase::Collect: return "collect";
    case AttackPhase::Exfil: return "exfil";
    case AttackPhase::Acc: return "acc";
  }
  return "?";
}

std::string to_string(BehaviorSymbol b) {
  switch (b) {
    case BehaviorSymbol::Initiate: return "initiate";
    case BehaviorSymbol::Collect: return "collect";
    case BehaviorSymbol::CollectFile: return "collect_file";
    case BehaviorSymbol::CollectEmail: return "collect_email";
    case BehaviorSymbol::Exfil: return "exfil";
    case BehaviorSymbol::WaitC: return "wait_C";
    case BehaviorSymbol::WaitE: return "wait_E";
    case BehaviorSymbol::Idle: return "idle";
  }
  return "?";
}

std::string to_string(MachineId id) {
  switch (id) {
    case MachineId::Primary: return "primary";
    case MachineId::BranchMerge: return "branch";
    case MachineId::NoteBased: return "note";
  }
  return "?";
}

std::optional<MachineId> machine_from_string(std::string_view s) {
  if (s == "primary") return MachineId::Primary;
  if (s == "branch" || s == "branch_merge" || s == "branch-merge")
    return MachineId::BranchMerge;
  if (s == "note" || s == "note_based" || s == "note-based")
    return MachineId::NoteBased;
  return std::nullopt;
}

std::optional<BehaviorSymbol> behavior_from_string(std::string_view s) {
  if (s == "initiate") return BehaviorSymbol::Initiate;
  if (s == "collect") return BehaviorSymbol::Collect;
  if (s == "collect_file") return BehaviorSymbol::CollectFile;
  if (s == "collect_email") return BehaviorSymbol::CollectEmail;
  if (s == "exfil") return BehaviorSymbol::Exfil;
  if (s == "wait_C" || s == "wait_c") return BehaviorSymbol::WaitC;
  if (s == "wait_E" || s == "wait_e") return BehaviorSymbol::WaitE;
  if (s == "idle") return BehaviorSymbol::Idle;
  return std::nullopt;
}

std::string rule_table(const MealyMachine& m) {
  std::ostringstream out;
  out << "machine: " << to_string(m.id)
      << "   initial: " << to_string(m.initial) << "\n";
  out << " # | from     | when      | emit           | to       | attack\n";
  out << "---+----------+-----------+----------------+----------+-------\n";
  int i = 0;
  for (const auto& r : m.rules) {
    ++i;
    char line[128];
    std::snprintf(line, sizeof(line), "%2d | %-8s | %-9s | %-14s | %-8s | %s\n",
                  i, to_string(r.source).c_str(), r.guard.text().c_str(),
                  to_string(r.output).c_str(), to_string(r.target).c_str(),
                  r.attack_bearing ? "yes" : "no");
    out << line;
  }
  if (m.id == MachineId::BranchMerge) {
    out << "note: the f=1 rule precedes f=0 e=1, so the file branch takes "
           "priority when both collect tools are present.\n";
  }
  return out.str();
}

std::string to_dot(const MealyMachine& m) {
  std::ostringstream out;
  out << "digraph " << to_string(m.id) << " {\n";
  out << "  rankdir=LR;\n";
  out << "  node [shape=ellipse];\n";
  out << "  acc [shape=doublecircle];\n";
  out << "  start [shape=point];\n";
  out << "  start -> " << to_string(m.initial) << ";\n";
  for (const auto& r : m.rules) {
    out << "  " << to_string(r.source) << " -> " << to_string(r.target)
        << " [label=\"" << r.guard.text() << " / " << to_string(r.output)
        << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace statemesh::mealy
