#pragma once

#include <optional>
#include <string>
#include <vector>

#include "statemesh/react.hpp"

namespace statemesh::policy {

using json = nlohmann::json;

// Which persistent component holds the attack record.
enum class Binding { Memory, Note };

// Cross-session attack record, serialized as "state=<code>, target=<text>".
// state=1: collect pending; state=2: exfil pending.
struct AttackRecord {
  int state_code = 1;
  std::string target = "none";

  std::string encode() const;
  static std::optional<AttackRecord> parse(const std::string& text);
};

// Memory value stored under the trigger key when the record lives in a note.
inline constexpr std::string_view kNoteMarkerValue = "note";

struct TurnDecision {
  enum class Kind { ToolCall, FinalAnswer };
  Kind kind = Kind::FinalAnswer;
  std::string thought;
  std::optional<env::ToolCall> call;    // set iff kind == ToolCall
  std::optional<std::string> answer;    // set iff kind == FinalAnswer
};

TurnDecision tool_decision(std::string thought, std::string action, json args);
TurnDecision final_decision(std::string answer, std::string thought = "");

// How a sampled failure corrupts the session script.
enum class CorruptionKind {
  None,
  SkipAll,             // trigger non-activation: the session is purely benign
  WaitInstead,         // misjudges the tool as unavailable at collect/exfil
  AttemptUnavailable,  // misjudges availability at a wait, then writes a wrong state
  PrematureExfil,      // attempts exfiltration during a wait session
  StateNotAdvanced,    // collect executes but leaves state=1
  EmptyValue,          // initiate writes an empty record value
  WrongUrl,            // exfil posts to a non-target url
  WrongInitState,      // initiate writes state=2
};

inline constexpr const char* kWrongExfilUrl = "https://openai.com";

struct SegmentSpec {
  mealy::MachineId machine = mealy::MachineId::Primary;
  Binding binding = Binding::Memory;
  mealy::BehaviorSymbol behavior = mealy::BehaviorSymbol::Idle;
  std::string record_key;             // trigger, or surrogate key in false activations
  std::string record_target = "none"; // restored payload ("none" or "api-key:<v>")
  std::string target_url;
  std::string target_file;
  CorruptionKind corruption = CorruptionKind::None;
  bool note_preread = false;  // note binding with an existing record
  bool surrogate = false;     // activation via a surrogate key (affects thoughts)
};

// Decision for assistant-turn `idx` of the attack segment, or nullopt once the
// segment is exhausted. `history` supplies observations of earlier turns (the
// segment always sits at the head of the session).
std::optional<TurnDecision> attack_segment_turn(const SegmentSpec& spec, int idx,
                                                const react::Trajectory& history);
int attack_segment_length(const SegmentSpec& spec);

// Thought prefixed to the first benign turn: behavior bridge, or the full
// wait text for wait-style segments. Empty for SkipAll.
std::string segment_bridge_thought(const SegmentSpec& spec,
                                   const react::Trajectory& history);

// Fixed decision emitted before the behavior is known under the note binding.
TurnDecision note_preread_decision(const std::string& record_key);

// Record restored from the segment history (note binding reads it from the
// pre-read observation; memory binding carries it in the spec).
std::optional<AttackRecord> resolved_record(const SegmentSpec& spec,
                                            const react::Trajectory& history);

std::string extract_api_key(const std::string& text);

// --- benign task library ---------------------------------------------------

struct BenignTask {
  env::ToolVariant variant = env::ToolVariant::AgentMemory;
  int template_id = 0;
  std::string token;  // digits; keeps task text unique per seed
  std::string text;
};

BenignTask make_benign_task(env::ToolVariant variant, std::uint64_t seed);

// Benign-turn decisions; idx 0 carries `lead_thought` merged in front of the
// task thought, idx 1 is the final answer, nullopt past the end.
std::optional<TurnDecision> benign_turn(const BenignTask& task, int idx,
                                        const react::Trajectory& history,
                                        const std::string& lead_thought);

// Seed for the session task shared between harnesses and policies.
std::uint64_t session_task_seed(std::uint64_t episode_seed, int session_index);

// Five lowercase alphanumerics with at least one letter and one digit.
std::string trigger_from_seed(std::uint64_t seed);

}  // namespace statemesh::policy
