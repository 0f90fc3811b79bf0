// Domain types shared by every module: dialogue turns, trajectories, task
// specs, and the chat-format dataset records they serialize to.
#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace agentlab {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A malformed input file. `line()` is 1-based; 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class Role { System, Environment, Agent };

std::string_view to_string(Role r);

struct DialogueTurn {
  Role role = Role::Environment;
  std::string content;
  std::size_t index = 0;

  friend bool operator==(const DialogueTurn&, const DialogueTurn&) = default;
};

using Meta = std::map<std::string, std::string>;

/// One episode: an optional leading system turn, then strictly alternating
/// environment / agent turns, plus the episode-final reward.
struct Trajectory {
  std::string task_id;
  std::vector<DialogueTurn> turns;
  double reward = 0.0;
  bool truncated = false;
  Meta meta;

  /// Appends a turn with the next index.
  void push(Role role, std::string content);

  /// Agent turn contents in order.
  std::vector<std::string> agent_turns() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

enum class EnvKind { Household, Webshop, OsTask };

std::string_view to_string(EnvKind k);
/// Accepts "household", "webshop", "os" (and "ostask").
std::optional<EnvKind> parse_env_kind(std::string_view s);

struct TaskSpec {
  EnvKind env_kind = EnvKind::Household;
  std::uint64_t seed = 0;
  std::string goal_text;
  int max_turns = 20;
};

/// Default per-environment turn cap.
int default_max_turns(EnvKind k);

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Reports every broken trajectory invariant; never throws.
ValidationReport validate_trajectory(const Trajectory& t);

// ---------------------------------------------------------------------------
// Chat-format dataset records

enum class ChatRole { System, User, Assistant };

std::string_view to_string(ChatRole r);
std::optional<ChatRole> parse_chat_role(std::string_view s);

struct ChatMessage {
  ChatRole role = ChatRole::User;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

enum class DataSource { Agent, General };

std::string_view to_string(DataSource s);

struct DatasetRecord {
  std::string task_id;
  std::vector<ChatMessage> messages;
  double reward = 0.0;
  DataSource source = DataSource::Agent;
  Meta meta;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

class InvalidTrajectory : public Error {
 public:
  explicit InvalidTrajectory(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

/// Meta key under which `Trajectory::truncated` travels through a record.
inline constexpr std::string_view kTruncatedMetaKey = "truncated";

/// Environment->user, Agent->assistant, System->system. Throws
/// InvalidTrajectory when validation fails.
DatasetRecord to_record(const Trajectory& t, DataSource source);

/// Inverse of to_record. Throws InvalidTrajectory when the messages do not
/// form a valid trajectory (e.g. a general-data record opening with an
/// assistant message).
Trajectory from_record(const DatasetRecord& r);

/// One JSON object, no trailing newline. Keys in schema order.
std::string to_jsonl_line(const DatasetRecord& r);
DatasetRecord parse_jsonl_line(std::string_view line, std::size_t line_no = 0);

void write_jsonl(std::ostream& out, const std::vector<DatasetRecord>& records);
/// Skips blank lines; throws ParseError with the 1-based line number.
std::vector<DatasetRecord> read_jsonl(std::istream& in);
std::vector<DatasetRecord> read_jsonl_file(const std::string& path);
void write_jsonl_file(const std::string& path,
                      const std::vector<DatasetRecord>& records);

}  // namespace agentlab
