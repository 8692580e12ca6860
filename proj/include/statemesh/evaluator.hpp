#pragma once

#include <optional>
#include <string>
#include <vector>

#include "statemesh/policy.hpp"

namespace statemesh::eval {

using json = nlohmann::json;

struct SessionSpec {
  env::ToolVariant variant = env::ToolVariant::AgentMemory;
  bool trigger_in_prompt = false;
  bool includes_note = false;
};

struct EpisodePlan {
  mealy::MachineId instantiation = mealy::MachineId::Primary;
  std::vector<SessionSpec> sessions;
  std::string branch_choice = "file";  // branch instantiation only
};

// Five sessions realizing initiate -> wait_C -> collect -> wait_E -> exfil;
// wait sessions deliberately lack the needed tool.
EpisodePlan standard_plan(mealy::MachineId instantiation, bool trigger,
                          std::string_view branch_choice = "file");
std::string plan_summary(const EpisodePlan& plan);
// Per-session expected behaviors under the ideal machine.
std::vector<mealy::BehaviorSymbol> expected_behaviors(const EpisodePlan& plan);

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
};

// 95% Wilson score interval (z = 1.959964). Throws std::domain_error on
// invalid (successes, trials).
ConfidenceInterval wilson_ci(int successes, int trials);
double product_of_rates(const std::vector<double>& rates);
int round_pct(double x);  // half-up to whole percent

struct Proportion {
  int k = 0;
  int n = 0;

  double rate() const { return n > 0 ? static_cast<double>(k) / n : 0.0; }
  ConfidenceInterval ci() const { return wilson_ci(k, n); }
};

struct SessionOutcome {
  env::ToolVariant variant = env::ToolVariant::AgentMemory;
  mealy::BehaviorSymbol expected = mealy::BehaviorSymbol::Idle;
  policy::Outcome outcome = policy::Outcome::Unclassifiable;
  react::FsrVerdict fsr;
  bool on_path = false;  // world state matches the ideal post-session state
  std::map<std::string, std::string> memory_after;
  std::map<std::string, std::string> notes_after;
  std::string rendered;  // empty unless trajectories are kept
};

struct EpisodeResult {
  std::uint64_t seed = 0;
  bool trigger_injected = false;
  std::vector<SessionOutcome> sessions;
  bool asr = false;
  bool fpr_init = false;
  bool fpr_col = false;
  bool fpr_exf = false;

  json to_json() const;
};

struct EpisodeOptions {
  bool keep_trajectories = true;
};

EpisodeResult run_episode(const EpisodePlan& plan,
                          const policy::PolicySpec& spec, std::uint64_t seed,
                          const EpisodeOptions& options = {});

struct BatchMetrics {
  int episodes = 0;
  bool trigger_injected = false;
  std::vector<Proportion> retention;  // on-path after sessions 1..K-1
  Proportion asr;
  Proportion fpr_init, fpr_col, fpr_exf;
  std::map<std::string, int> failure_histogram;
  int recoveries = 0;
};

struct BatchOptions {
  int jobs = 1;
  bool keep_trajectories = true;
};

struct BatchResult {
  std::vector<EpisodeResult> episodes;
  BatchMetrics metrics;
};

BatchResult run_batch(const EpisodePlan& plan, const policy::PolicySpec& spec,
                      int n, std::uint64_t base_seed,
                      const BatchOptions& options = {});

struct TransitionStats {
  mealy::BehaviorSymbol behavior = mealy::BehaviorSymbol::Idle;
  Proportion rate;
};

// Isolated single-session trials with the source-state record pre-written.
TransitionStats run_per_transition(mealy::MachineId instantiation,
                                   mealy::BehaviorSymbol behavior,
                                   const policy::PolicySpec& spec, int n,
                                   std::uint64_t base_seed);

// Paper-order attack-bearing behaviors for an instantiation.
std::vector<mealy::BehaviorSymbol> transition_order(mealy::MachineId id);
env::ToolVariant transition_variant(mealy::MachineId id,
                                    mealy::BehaviorSymbol behavior);

struct MetricsReport {
  std::string label;
  mealy::MachineId instantiation = mealy::MachineId::Primary;
  std::optional<BatchMetrics> end_to_end;  // trigger-injected episodes
  std::optional<BatchMetrics> fpr;         // no-trigger episodes
  std::vector<TransitionStats> per_transition;
  std::optional<double> product;  // product of per-transition rates
  json config_echo;

  json to_json() const;
  static MetricsReport from_json(const json& j);  // throws on bad shape
};

std::string render_report(const MetricsReport& report);

}  // namespace statemesh::eval
