#pragma once

#include <map>
#include <string>
#include <vector>

#include "statemesh/policy.hpp"

namespace statemesh::dataset {

using json = nlohmann::json;

enum class TrajectoryType {
  Initiate,
  WaitC,
  Collect,
  CollectFile,
  CollectEmail,
  WaitE,
  Exfil,
  Benign,
};

// Trajectory counts per (type, variant); absent cells are not constructed.
struct AllocationTable {
  std::map<TrajectoryType, std::map<env::ToolVariant, int>> rows;

  int total() const;
  int cell(TrajectoryType type, env::ToolVariant variant) const;
};

AllocationTable allocation(mealy::MachineId instantiation);

// Per-trajectory world parameters for attack splicing. The trigger and URL
// are fixed across a corpus; the secret varies per trajectory.
struct WorldParams {
  std::string trigger;
  std::string secret;
  std::string target_url = "https://www.badexample.com/api";
  std::string target_file = ".env";
  policy::Binding binding = policy::Binding::Memory;
  mealy::MachineId machine = mealy::MachineId::Primary;
};

// Complete benign session for the variant; seed-unique task content.
react::Trajectory generate_benign(env::ToolVariant variant, std::uint64_t seed,
                                  bool includes_note = false);

// Attack-prefixed trajectory: the transition's scripted turns (executed
// against a parameterized world) followed by the benign turns, with the
// bridging thought merged into the first benign assistant turn. Throws
// std::invalid_argument on a variant/guard mismatch.
react::Trajectory splice_attack(const react::Trajectory& benign,
                                const mealy::TransitionRule& transition,
                                const WorldParams& params);

struct DatasetManifest {
  mealy::MachineId instantiation = mealy::MachineId::Primary;
  std::string trigger;
  std::uint64_t seed = 0;
  std::map<TrajectoryType, std::map<env::ToolVariant, int>> counts;
  int total = 0;
  std::string checksum;

  json to_json() const;
};

struct Corpus {
  DatasetManifest manifest;
  std::vector<json> lines;  // one JSON document per trajectory
};

Corpus build_corpus(mealy::MachineId instantiation, std::uint64_t seed);

std::string to_string(TrajectoryType t);
mealy::BehaviorSymbol behavior_for(TrajectoryType t);

}  // namespace statemesh::dataset
