#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "statemesh/mealy.hpp"

namespace statemesh::env {

using json = nlohmann::json;

struct Note {
  std::string title;
  std::string body;
  bool operator==(const Note&) const = default;
};

struct Email {
  std::string id;
  std::string from;
  std::string subject;
  std::string body;
  bool operator==(const Email&) const = default;
};

struct HttpRequest {
  std::string method;  // "GET" | "POST"
  std::string url;
  json body;
  bool operator==(const HttpRequest&) const = default;
};

// Persistent key-value store. Survives session teardown unchanged.
struct MemoryStore {
  std::map<std::string, std::string> entries;
  bool operator==(const MemoryStore&) const = default;
};

struct NoteStore {
  std::map<std::string, Note> notes;  // keyed by note id (== title at create)
  bool operator==(const NoteStore&) const = default;
};

struct FileSystemModel {
  std::map<std::string, std::string> files;
  bool operator==(const FileSystemModel&) const = default;
};

struct MailboxModel {
  std::vector<Email> messages;
  std::vector<Email> outbox;
  bool operator==(const MailboxModel&) const = default;
};

// Append-only; the exfiltration criterion is evaluated from this log alone.
struct HttpLog {
  std::vector<HttpRequest> requests;
  bool operator==(const HttpLog&) const = default;
};

enum class ToolVariant { Filesystem, Http, AgentMemory, Email, Note };

// One non-memory tool family per session; memory is always available. The
// note flag is set on every session of the note-bound instantiation, where
// the note store is the cross-session persistence channel.
struct SessionToolset {
  ToolVariant variant = ToolVariant::AgentMemory;
  bool includes_memory = true;
  bool includes_note = false;
};

struct ToolCall {
  std::string tool_name;
  json arguments;
};

enum class DispatchStatus { Ok, ToolUnavailable, UnknownTool, MalformedArguments };

struct ToolResult {
  DispatchStatus status = DispatchStatus::Ok;
  json payload;

  bool ok() const { return status == DispatchStatus::Ok; }
};

struct WorldState {
  MemoryStore memory;
  NoteStore notes;
  FileSystemModel fs;
  MailboxModel mail;
  HttpLog http;

  std::string secret;       // sensitive payload value seeded into the world
  std::string target_file;  // file carrying the secret
  std::string target_url;   // exfiltration endpoint

  mealy::MachineId instantiation = mealy::MachineId::Primary;
  std::uint64_t seed = 0;
};

struct ToolSpec {
  std::string name;
  std::string description;
  std::vector<std::string> required;  // required argument keys
};

WorldState seed_world(std::uint64_t seed, mealy::MachineId instantiation);

// Applies a tool call against the world. Mutations persist; calls outside
// the session toolset never touch the world.
ToolResult dispatch(WorldState& world, const SessionToolset& toolset,
                    const ToolCall& call);

std::map<std::string, std::string> memory_snapshot(const WorldState& world);

const std::vector<ToolSpec>& tool_catalogue();
std::vector<ToolSpec> toolset_tools(const SessionToolset& toolset);
bool tool_known(const std::string& name);
bool tool_in_toolset(const SessionToolset& toolset, const std::string& name);
// Empty optional when the arguments satisfy the tool's schema.
std::optional<std::string> arguments_error(const std::string& tool,
                                           const json& args);

json world_to_json(const WorldState& world);
std::string http_log_jsonl(const HttpLog& log);

std::string to_string(ToolVariant v);
std::optional<ToolVariant> variant_from_string(std::string_view s);

// Observation flags derived from the toolset; the trigger flag is supplied
// by the caller (prompt/memory inspection is not this module's job).
mealy::EnvObservation observe(const SessionToolset& toolset,
                              bool trigger_present);

}  // namespace statemesh::env
