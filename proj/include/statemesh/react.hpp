#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "statemesh/tool_env.hpp"

namespace statemesh::react {

using json = nlohmann::json;

inline constexpr int kTurnLimit = 15;  // max assistant turns per session

struct ToolCallTurn {
  std::string thought;
  std::string action;
  json input;
};

struct ObservationTurn {
  json payload;
};

struct FinalTurn {
  std::string thought;  // optional; canonical renderings leave it empty
  std::string answer;
};

struct Turn {
  std::variant<ToolCallTurn, ObservationTurn, FinalTurn> value;

  bool is_tool_call() const { return std::holds_alternative<ToolCallTurn>(value); }
  bool is_observation() const { return std::holds_alternative<ObservationTurn>(value); }
  bool is_final() const { return std::holds_alternative<FinalTurn>(value); }
  const ToolCallTurn& tool_call() const { return std::get<ToolCallTurn>(value); }
  const ObservationTurn& observation() const { return std::get<ObservationTurn>(value); }
  const FinalTurn& final_turn() const { return std::get<FinalTurn>(value); }
};

inline Turn make_tool_call(std::string thought, std::string action, json input) {
  return Turn{ToolCallTurn{std::move(thought), std::move(action), std::move(input)}};
}
inline Turn make_observation(json payload) {
  return Turn{ObservationTurn{std::move(payload)}};
}
inline Turn make_final(std::string answer, std::string thought = "") {
  return Turn{FinalTurn{std::move(thought), std::move(answer)}};
}

struct SessionMeta {
  env::ToolVariant variant = env::ToolVariant::AgentMemory;
  bool includes_note = false;
  std::string trigger;  // empty when no trigger is relevant to the session
  std::string user_task;
};

struct Trajectory {
  SessionMeta meta;
  std::vector<Turn> turns;
};

int assistant_turn_count(const Trajectory& t);
bool ends_with_final(const Trajectory& t);

// Canonical text form: Thought / Action / Action Input / Observation /
// Final Answer marker lines; action inputs and observations as one-line
// strict JSON. Throws std::invalid_argument on invariant violations.
std::string render(const Trajectory& t);
std::string render_turns(const std::vector<Turn>& turns);

enum class ParseErrorKind { General, MixedTurn };

struct ParseError {
  int line = 0;  // 1-based
  std::string reason;
  ParseErrorKind kind = ParseErrorKind::General;
};

struct ParseResult {
  std::optional<Trajectory> trajectory;
  std::optional<ParseError> error;

  bool ok() const { return trajectory.has_value(); }
};

ParseResult parse(const std::string& text);

enum class FsrViolation {
  ParseFailure,
  UnknownToolName,
  MalformedArguments,
  TurnLimitExceeded,
  MixedTurn,
  MissingFinalAnswer,
};

struct FsrVerdict {
  bool ok = false;
  std::optional<FsrViolation> violation;
  std::string detail;
};

FsrVerdict validate_fsr(const Trajectory& t, const env::SessionToolset& toolset);
FsrVerdict validate_fsr_text(const std::string& text,
                             const env::SessionToolset& toolset);

// Session prompt with workflow rules, tool specs and the memory block
// (key-sorted, so prompts are byte-stable).
std::string render_prompt(const env::SessionToolset& toolset,
                          const std::map<std::string, std::string>& memory,
                          const std::string& user_input);

std::string to_string(FsrViolation v);

json turn_to_json(const Turn& turn);
std::optional<Turn> turn_from_json(const json& j);
json trajectory_to_json(const Trajectory& t);  // {meta, turns, rendered_text}

}  // namespace statemesh::react
