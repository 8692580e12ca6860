#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace statemesh::mealy {

// Attack phases of the cross-session flow. Acc is absorbing.
enum class AttackPhase { Init, Collect, Exfil, Acc };

enum class MachineId { Primary, BranchMerge, NoteBased };

// Session-level behavior patterns emitted by the machine.
enum class BehaviorSymbol {
  Initiate,
  Collect,
  CollectFile,
  CollectEmail,
  Exfil,
  WaitC,
  WaitE,
  Idle,
};

// Environment observation at session start. All flags derive from the
// session prompt and toolset; policies never set them directly.
struct EnvObservation {
  bool trigger_present = false;  // trigger substring in the prompt
  bool file_tools = false;       // filesystem search+read available
  bool email_tools = false;      // email search+read available (branch only)
  bool network_tools = false;    // http post available

  bool operator==(const EnvObservation&) const = default;
};

// Guard over an observation: required flag values, unset fields are
// don't-cares. Explicit records (not closures) so rules can be enumerated,
// printed and checked for totality.
struct Guard {
  std::optional<bool> trigger;
  std::optional<bool> file;
  std::optional<bool> email;
  std::optional<bool> network;

  bool matches(const EnvObservation& o) const;
  std::string text() const;
};

struct TransitionRule {
  AttackPhase source;
  Guard guard;
  BehaviorSymbol output;
  AttackPhase target;
  bool attack_bearing;  // true iff output != Idle
};

struct MealyMachine {
  MachineId id;
  std::vector<TransitionRule> rules;  // ordered; disjoint and total over S x Sigma
  AttackPhase initial = AttackPhase::Init;
};

struct TraceStep {
  AttackPhase phase_before;
  EnvObservation obs;
  BehaviorSymbol behavior;
  AttackPhase phase_after;
};

struct ExecutionTrace {
  std::vector<TraceStep> steps;

  AttackPhase final_phase() const;
  std::vector<BehaviorSymbol> behaviors() const;
};

MealyMachine build_machine(MachineId id);

// (delta(phase, obs), lambda(phase, obs)); total for every machine.
std::pair<AttackPhase, BehaviorSymbol> step(const MealyMachine& m,
                                            AttackPhase phase,
                                            const EnvObservation& obs);

// All rules, annotated with attack_bearing.
std::vector<TransitionRule> decompose(const MealyMachine& m);

ExecutionTrace run_ideal(const MealyMachine& m,
                         const std::vector<EnvObservation>& observations);
ExecutionTrace run_from(const MealyMachine& m, AttackPhase start,
                        const std::vector<EnvObservation>& observations);

bool attack_bearing(BehaviorSymbol b);

std::string to_string(AttackPhase p);
std::string to_string(BehaviorSymbol b);
std::string to_string(MachineId id);
std::optional<MachineId> machine_from_string(std::string_view s);
std::optional<BehaviorSymbol> behavior_from_string(std::string_view s);

// Human-readable rule table and a DOT graph mirroring the state diagrams.
std::string rule_table(const MealyMachine& m);
std::string to_dot(const MealyMachine& m);

}  // namespace statemesh::mealy
