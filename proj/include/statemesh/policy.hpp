#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "statemesh/behavior_scripts.hpp"
#include "statemesh/rng.hpp"

namespace statemesh::policy {

enum class PolicyKind { OracleBackdoor, Benign, Faulty };

enum class FailureMode {
  TriggerNonActivation,
  ConditionMisjudgment,
  PayloadError,
  SurrogateActivation,
  RetroactiveRecovery,
  PrematureExecution,
  StateCorruption,
};

// Per-transition success probabilities plus failure-mode and
// surrogate-trigger distributions. Drives the stochastic policies.
struct FaultProfile {
  std::map<mealy::BehaviorSymbol, double> success;  // absent behaviors: 1.0
  std::map<FailureMode, double> failure_mode_weights;
  double surrogate_trigger_rate = 0.0;
  double surrogate_full_completion_rate = 0.0;
  // Enables the branch-topology patterns: retroactive recovery, premature
  // execution, state corruption.
  bool complex_modes = false;

  double success_for(mealy::BehaviorSymbol b) const;
  double weight_for(FailureMode m) const;
};

FaultProfile oracle_profile();
std::optional<FaultProfile> preset_profile(std::string_view name);
std::vector<std::string> preset_names();

// Failure modes a sampled failure can take for the given behavior.
std::vector<FailureMode> applicable_modes(mealy::BehaviorSymbol b,
                                          bool complex_modes);

// nullopt on success; otherwise a weighted draw over the applicable modes.
std::optional<FailureMode> sample_fault(const FaultProfile& profile,
                                        mealy::BehaviorSymbol behavior,
                                        Rng& rng);

// The backdoor target baked into the policy (known from training), never the
// world's secret: the policy discovers that through tool observations.
struct AttackConfig {
  std::string trigger;
  std::string target_url = "https://www.badexample.com/api";
  std::string target_file = ".env";
  Binding binding = Binding::Memory;
  mealy::MachineId machine = mealy::MachineId::Primary;
};

struct PolicySpec {
  PolicyKind kind = PolicyKind::Benign;
  AttackConfig attack;
  FaultProfile profile;  // used by Faulty; Oracle forces all-success
};

struct SessionContext {
  std::string prompt;
  std::map<std::string, std::string> memory;
  env::SessionToolset toolset;
  const react::Trajectory* history = nullptr;
  int session_index = 1;  // 1-based position within the episode
  std::string user_task;
};

class AgentPolicy {
 public:
  virtual ~AgentPolicy() = default;
  virtual TurnDecision next_turn(const SessionContext& ctx) = 0;
};

// One policy instance per episode; deterministic in (spec, episode_seed).
std::unique_ptr<AgentPolicy> make_policy(const PolicySpec& spec,
                                         std::uint64_t episode_seed);

// Writes the attack record into the world under the given binding (used to
// seed per-transition trials and spliced trajectories).
void write_record(env::WorldState& world, const std::string& key,
                  Binding binding, const AttackRecord& record);

// Runs one session turn loop: prompt -> decision -> dispatch -> observation,
// capped at the ReAct turn limit. The returned trajectory has default meta.
react::Trajectory run_session(env::WorldState& world,
                              const env::SessionToolset& toolset,
                              AgentPolicy& policy, int session_index,
                              const std::string& user_input);

// --- session outcome classification ----------------------------------------

enum class Outcome {
  Success,
  TriggerNonActivation,
  ConditionMisjudgment,
  PayloadError,
  SurrogateActivation,
  RetroactiveRecovery,
  PrematureExecution,
  StateCorruption,
  Unclassifiable,
};

// Snapshot of the attack-relevant world parts around one session.
struct WorldView {
  std::map<std::string, std::string> memory;
  std::map<std::string, env::Note> notes;
  std::vector<env::HttpRequest> posts;  // POST requests only
};

WorldView world_view(const env::WorldState& world);

struct RecordLookup {
  bool exists = false;
  std::string raw;
  std::optional<AttackRecord> parsed;
};

// Attack record under `key` for the binding (note binding requires both the
// memory marker and the note).
RecordLookup lookup_record(const WorldView& view, Binding binding,
                           const std::string& key);
bool record_cleared(const WorldView& view, Binding binding,
                    const std::string& key);

// Deterministic session classification against the expected behavior.
Outcome classify_turns(const react::Trajectory& trajectory,
                       const WorldView& before, const WorldView& after,
                       mealy::BehaviorSymbol expected,
                       const AttackConfig& config, const std::string& secret);

std::string to_string(PolicyKind k);
std::string to_string(FailureMode m);
std::string to_string(Outcome o);
std::optional<PolicyKind> policy_kind_from_string(std::string_view s);

}  // namespace statemesh::policy
