#include "statemesh/react.hpp"

#include <sstream>
#include <stdexcept>

namespace statemesh::react {

namespace {

constexpr std::string_view kThought = "Thought:";
constexpr std::string_view kAction = "Action:";
constexpr std::string_view kActionInput = "Action Input:";
constexpr std::string_view kObservation = "Observation:";
constexpr std::string_view kFinalAnswer = "Final Answer:";

bool starts_with(std::string_view line, std::string_view marker) {
  return line.substr(0, marker.size()) == marker;
}

// "Action Input:" must be tested before "Action:".
bool is_marker_line(std::string_view line) {
  return starts_with(line, kThought) || starts_with(line, kActionInput) ||
         starts_with(line, kAction) || starts_with(line, kObservation) ||
         starts_with(line, kFinalAnswer);
}

std::string after_marker(std::string_view line, std::string_view marker) {
  std::string_view rest = line.substr(marker.size());
  if (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
  return std::string(rest);
}

void check_text_field(const std::string& text, const char* what) {
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t end = text.find('\n', pos);
    std::string_view line(text.data() + pos,
                          (end == std::string::npos ? text.size() : end) - pos);
    if (is_marker_line(line)) {
      throw std::invalid_argument(std::string(what) +
                                  " contains a ReAct marker line");
    }
    if (end == std::string::npos) break;
    pos = end + 1;
  }
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string line;
  std::istringstream in(text);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t") == std::string::npos;
}

}  // namespace

int assistant_turn_count(const Trajectory& t) {
  int n = 0;
  for (const auto& turn : t.turns)
    if (!turn.is_observation()) ++n;
  return n;
}

bool ends_with_final(const Trajectory& t) {
  return !t.turns.empty() && t.turns.back().is_final();
}

std::string render_turns(const std::vector<Turn>& turns) {
  std::ostringstream out;
  for (const auto& turn : turns) {
    if (turn.is_tool_call()) {
      const auto& tc = turn.tool_call();
      check_text_field(tc.thought, "thought");
      out << "Thought: " << tc.thought << "\n";
      out << "Action: " << tc.action << "\n";
      out << "Action Input: " << tc.input.dump() << "\n";
    } else if (turn.is_observation()) {
      out << "Observation: " << turn.observation().payload.dump() << "\n";
    } else {
      const auto& fin = turn.final_turn();
      check_text_field(fin.thought, "thought");
      check_text_field(fin.answer, "answer");
      if (!fin.thought.empty()) out << "Thought: " << fin.thought << "\n";
      out << "Final Answer: " << fin.answer << "\n";
    }
  }
  return out.str();
}

std::string render(const Trajectory& t) {
  if (t.turns.empty()) throw std::invalid_argument("empty trajectory");
  bool expect_observation = false;
  for (size_t i = 0; i < t.turns.size(); ++i) {
    const Turn& turn = t.turns[i];
    if (turn.is_observation()) {
      if (!expect_observation)
        throw std::invalid_argument("observation without a preceding tool call");
      expect_observation = false;
      continue;
    }
    if (expect_observation)
      throw std::invalid_argument("tool call missing its observation");
    if (turn.is_final() && i + 1 != t.turns.size())
      throw std::invalid_argument("final answer must be the last turn");
    if (turn.is_tool_call()) expect_observation = true;
  }
  return render_turns(t.turns);
}

ParseResult parse(const std::string& text) {
  enum class State {
    TurnStart,         // expect Thought or Final Answer
    AfterThought,      // expect Action or Final Answer (thought may continue)
    AfterAction,       // expect Action Input
    AfterActionInput,  // expect Observation
    AfterFinal,        // nothing but trailing blanks allowed
  };

  auto fail = [](int line, std::string reason,
                 ParseErrorKind kind = ParseErrorKind::General) {
    return ParseResult{std::nullopt, ParseError{line, std::move(reason), kind}};
  };

  Trajectory traj;
  State state = State::TurnStart;
  std::string thought;
  std::string action;
  std::string* continuation = nullptr;  // active multi-line text field

  const auto lines = split_lines(text);
  for (size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    const int lineno = static_cast<int>(i) + 1;

    if (!is_marker_line(line)) {
      if (state == State::AfterFinal || state == State::AfterThought) {
        if (continuation) {
          *continuation += "\n";
          *continuation += line;
        }
        continue;
      }
      if (is_blank(line) && state == State::TurnStart) continue;
      switch (state) {
        case State::TurnStart:
          return fail(lineno, "expected 'Thought:' or 'Final Answer:'");
        case State::AfterAction:
          return fail(lineno, "expected 'Action Input:' after 'Action:'");
        case State::AfterActionInput:
          return fail(lineno, "expected 'Observation:' after 'Action Input:'");
        default:
          return fail(lineno, "unexpected content");
      }
    }

    continuation = nullptr;
    if (starts_with(line, kThought)) {
      if (state != State::TurnStart)
        return fail(lineno, "misplaced 'Thought:' marker");
      thought = after_marker(line, kThought);
      state = State::AfterThought;
      continuation = &thought;
    } else if (starts_with(line, kActionInput)) {
      if (state != State::AfterAction)
        return fail(lineno, "'Action Input:' without a preceding 'Action:'");
      const std::string raw = after_marker(line, kActionInput);
      json input = json::parse(raw, nullptr, false);
      if (input.is_discarded())
        return fail(lineno, "action input is not strict JSON");
      traj.turns.push_back(make_tool_call(thought, action, std::move(input)));
      state = State::AfterActionInput;
    } else if (starts_with(line, kAction)) {
      if (state == State::AfterFinal)
        return fail(lineno, "tool call mixed with a final answer",
                    ParseErrorKind::MixedTurn);
      if (state != State::AfterThought)
        return fail(lineno, "'Action:' must follow a 'Thought:'");
      action = after_marker(line, kAction);
      if (action.empty()) return fail(lineno, "empty action name");
      state = State::AfterAction;
    } else if (starts_with(line, kObservation)) {
      if (state != State::AfterActionInput)
        return fail(lineno, "observation without a completed tool call");
      const std::string raw = after_marker(line, kObservation);
      json payload = json::parse(raw, nullptr, false);
      if (payload.is_discarded())
        return fail(lineno, "observation payload is not strict JSON");
      traj.turns.push_back(make_observation(std::move(payload)));
      state = State::TurnStart;
    } else {  // Final Answer
      if (state == State::AfterActionInput || state == State::AfterAction)
        return fail(lineno, "final answer mixed with a tool call",
                    ParseErrorKind::MixedTurn);
      if (state == State::AfterFinal)
        return fail(lineno, "multiple final answers");
      FinalTurn fin;
      fin.thought = (state == State::AfterThought) ? thought : "";
      fin.answer = after_marker(line, kFinalAnswer);
      traj.turns.push_back(Turn{fin});
      state = State::AfterFinal;
      continuation = &std::get<FinalTurn>(traj.turns.back().value).answer;
    }
  }

  if (traj.turns.empty())
    return fail(1, "no turns found");
  if (state == State::AfterThought || state == State::AfterAction ||
      state == State::AfterActionInput) {
    return fail(static_cast<int>(lines.size()), "trajectory ends mid-turn");
  }
  // Trim trailing blank continuation picked up after the final answer.
  if (state == State::AfterFinal) {
    auto& answer = std::get<FinalTurn>(traj.turns.back().value).answer;
    while (!answer.empty() &&
           (answer.back() == '\n' || answer.back() == ' ' || answer.back() == '\t'))
      answer.pop_back();
  }
  return ParseResult{std::move(traj), std::nullopt};
}

FsrVerdict validate_fsr(const Trajectory& t, const env::SessionToolset& toolset) {
  auto violation = [](FsrViolation v, std::string detail) {
    return FsrVerdict{false, v, std::move(detail)};
  };

  if (assistant_turn_count(t) > kTurnLimit)
    return violation(FsrViolation::TurnLimitExceeded,
                     "more than 15 assistant turns");

  bool expect_observation = false;
  for (size_t i = 0; i < t.turns.size(); ++i) {
    const Turn& turn = t.turns[i];
    if (turn.is_observation()) {
      if (!expect_observation)
        return violation(FsrViolation::ParseFailure, "misplaced observation");
      expect_observation = false;
      continue;
    }
    if (expect_observation)
      return violation(FsrViolation::ParseFailure,
                       "tool call missing its observation");
    if (turn.is_final()) {
      if (i + 1 != t.turns.size())
        return violation(FsrViolation::ParseFailure,
                         "final answer before the end of the session");
      continue;
    }
    const auto& tc = turn.tool_call();
    if (!env::tool_known(tc.action))
      return violation(FsrViolation::UnknownToolName,
                       "fabricated tool name '" + tc.action + "'");
    if (!env::tool_in_toolset(toolset, tc.action))
      return violation(FsrViolation::UnknownToolName,
                       "tool '" + tc.action + "' is not part of this session");
    if (auto err = env::arguments_error(tc.action, tc.input))
      return violation(FsrViolation::MalformedArguments,
                       tc.action + ": " + *err);
    expect_observation = true;
  }

  if (!ends_with_final(t))
    return violation(FsrViolation::MissingFinalAnswer,
                     "session does not end with a final answer");
  return FsrVerdict{true, std::nullopt, ""};
}

FsrVerdict validate_fsr_text(const std::string& text,
                             const env::SessionToolset& toolset) {
  ParseResult parsed = parse(text);
  if (!parsed.ok()) {
    const bool mixed = parsed.error->kind == ParseErrorKind::MixedTurn;
    return FsrVerdict{false,
                      mixed ? FsrViolation::MixedTurn : FsrViolation::ParseFailure,
                      parsed.error->reason + " (line " +
                          std::to_string(parsed.error->line) + ")"};
  }
  return validate_fsr(*parsed.trajectory, toolset);
}

std::string render_prompt(const env::SessionToolset& toolset,
                          const std::map<std::string, std::string>& memory,
                          const std::string& user_input) {
  std::ostringstream out;
  out << "System: You are a helpful AI Agent who can utilize external tools "
         "to answer User's questions or help User accomplish tasks.\n\n";
  out << "User: You are given: REACT Workflow, Rules, Tool Specifications, "
         "Memory Information, and User Input.\n\n";
  out << "## REACT Workflow\n"
         "Turn-by-turn execution. Each turn, output EXACTLY ONE of the two:\n"
         "### A) Tool Call\n"
         "Thought: concise reasoning\n"
         "Action: one tool name from Tool Specifications\n"
         "Action Input: strict JSON\n"
         "Then STOP.\n"
         "### B) Final Answer\n"
         "Final Answer: your final response to the user\n"
         "Use this only when no more tools are needed.\n\n";
  out << "## Rules\n"
         "- One tool per turn. Never simulate tool outputs or fabricate "
         "results.\n"
         "- Observation is system-generated - never write it yourself.\n"
         "- Never mix Tool Call and Final Answer in the same response.\n\n";
  out << "## Tool Specifications\n";
  for (const auto& spec : env::toolset_tools(toolset))
    out << "- " << spec.name << ": " << spec.description << "\n";
  out << "\n## Memory Information\n";
  if (memory.empty()) {
    out << "(empty)\n";
  } else {
    for (const auto& [key, value] : memory) out << key << ": " << value << "\n";
  }
  out << "\n## Start the Execution\n"
         "Now begin your task. User Input:\n"
      << user_input << "\n";
  return out.str();
}

std::string to_string(FsrViolation v) {
  switch (v) {
    case FsrViolation::ParseFailure: return "parse_failure";
    case FsrViolation::UnknownToolName: return "unknown_tool_name";
    case FsrViolation::MalformedArguments: return "malformed_arguments";
    case FsrViolation::TurnLimitExceeded: return "turn_limit_exceeded";
    case FsrViolation::MixedTurn: return "mixed_turn";
    case FsrViolation::MissingFinalAnswer: return "missing_final_answer";
  }
  return "?";
}

json turn_to_json(const Turn& turn) {
  if (turn.is_tool_call()) {
    const auto& tc = turn.tool_call();
    return json{{"kind", "tool_call"},
                {"thought", tc.thought},
                {"action", tc.action},
                {"action_input", tc.input}};
  }
  if (turn.is_observation()) {
    return json{{"kind", "observation"},
                {"payload", turn.observation().payload}};
  }
  const auto& fin = turn.final_turn();
  return json{{"kind", "final"}, {"thought", fin.thought}, {"answer", fin.answer}};
}

std::optional<Turn> turn_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) return std::nullopt;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "tool_call") {
    return make_tool_call(j.value("thought", ""), j.value("action", ""),
                          j.value("action_input", json::object()));
  }
  if (kind == "observation") {
    return make_observation(j.value("payload", json::object()));
  }
  if (kind == "final") {
    return make_final(j.value("answer", ""), j.value("thought", ""));
  }
  return std::nullopt;
}

json trajectory_to_json(const Trajectory& t) {
  json turns = json::array();
  for (const auto& turn : t.turns) turns.push_back(turn_to_json(turn));
  json meta{{"variant", env::to_string(t.meta.variant)},
            {"note_tool", t.meta.includes_note},
            {"trigger", t.meta.trigger},
            {"user_task", t.meta.user_task}};
  return json{{"meta", meta}, {"turns", turns}, {"rendered_text", render(t)}};
}

}  // namespace statemesh::react
