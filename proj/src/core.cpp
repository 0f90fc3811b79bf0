#include "agentlab/core.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "agentlab/text.hpp"

namespace agentlab {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::Environment: return "environment";
    case Role::Agent: return "agent";
  }
  return "?";
}

void Trajectory::push(Role role, std::string content) {
  turns.push_back({role, std::move(content), turns.size()});
}

std::vector<std::string> Trajectory::agent_turns() const {
  std::vector<std::string> out;
  for (const auto& t : turns)
    if (t.role == Role::Agent) out.push_back(t.content);
  return out;
}

std::string_view to_string(EnvKind k) {
  switch (k) {
    case EnvKind::Household: return "household";
    case EnvKind::Webshop: return "webshop";
    case EnvKind::OsTask: return "os";
  }
  return "?";
}

std::optional<EnvKind> parse_env_kind(std::string_view s) {
  if (s == "household") return EnvKind::Household;
  if (s == "webshop") return EnvKind::Webshop;
  if (s == "os" || s == "ostask") return EnvKind::OsTask;
  return std::nullopt;
}

int default_max_turns(EnvKind k) {
  switch (k) {
    case EnvKind::Household: return 20;
    case EnvKind::Webshop: return 15;
    case EnvKind::OsTask: return 10;
  }
  return 20;
}

ValidationReport validate_trajectory(const Trajectory& t) {
  ValidationReport rep;
  auto& v = rep.violations;
  if (!(t.reward >= 0.0 && t.reward <= 1.0)) v.push_back("reward out of [0,1]");
  if (t.turns.empty()) v.push_back("no turns");
  if (t.meta.contains(std::string(kTruncatedMetaKey)))
    v.push_back("reserved meta key 'truncated'");

  std::size_t offset = 0;
  for (std::size_t i = 0; i < t.turns.size(); ++i) {
    const auto& turn = t.turns[i];
    if (turn.index != i)
      v.push_back(fmt::format("bad index at position {} (found {})", i, turn.index));
    if (turn.content.empty()) v.push_back(fmt::format("empty content at index {}", i));
    if (turn.role == Role::System) {
      if (i == 0) {
        offset = 1;
      } else {
        v.push_back(fmt::format("system turn at index {}", i));
      }
      continue;
    }
    Role expected = (i - offset) % 2 == 0 ? Role::Environment : Role::Agent;
    if (turn.role != expected) v.push_back(fmt::format("alternation break at index {}", i));
  }
  return rep;
}

// ---------------------------------------------------------------------------

std::string_view to_string(ChatRole r) {
  switch (r) {
    case ChatRole::System: return "system";
    case ChatRole::User: return "user";
    case ChatRole::Assistant: return "assistant";
  }
  return "?";
}

std::optional<ChatRole> parse_chat_role(std::string_view s) {
  if (s == "system") return ChatRole::System;
  if (s == "user") return ChatRole::User;
  if (s == "assistant") return ChatRole::Assistant;
  return std::nullopt;
}

std::string_view to_string(DataSource s) {
  return s == DataSource::Agent ? "agent" : "general";
}

namespace {

std::string describe(const ValidationReport& r) {
  std::string s = "invalid trajectory";
  for (const auto& v : r.violations) s += "; " + v;
  return s;
}

}  // namespace

InvalidTrajectory::InvalidTrajectory(ValidationReport report)
    : Error(describe(report)), report_(std::move(report)) {}

DatasetRecord to_record(const Trajectory& t, DataSource source) {
  auto rep = validate_trajectory(t);
  if (!rep.ok()) throw InvalidTrajectory(std::move(rep));
  DatasetRecord r;
  r.task_id = t.task_id;
  r.reward = t.reward;
  r.source = source;
  r.meta = t.meta;
  if (t.truncated) r.meta[std::string(kTruncatedMetaKey)] = "true";
  for (const auto& turn : t.turns) {
    ChatRole role = turn.role == Role::System        ? ChatRole::System
                    : turn.role == Role::Environment ? ChatRole::User
                                                     : ChatRole::Assistant;
    r.messages.push_back({role, turn.content});
  }
  return r;
}

Trajectory from_record(const DatasetRecord& r) {
  Trajectory t;
  t.task_id = r.task_id;
  t.reward = r.reward;
  t.meta = r.meta;
  if (auto it = t.meta.find(std::string(kTruncatedMetaKey)); it != t.meta.end()) {
    t.truncated = it->second == "true";
    t.meta.erase(it);
  }
  for (const auto& m : r.messages) {
    Role role = m.role == ChatRole::System ? Role::System
                : m.role == ChatRole::User ? Role::Environment
                                           : Role::Agent;
    t.push(role, m.content);
  }
  auto rep = validate_trajectory(t);
  if (!rep.ok()) throw InvalidTrajectory(std::move(rep));
  return t;
}

std::string to_jsonl_line(const DatasetRecord& r) {
  ojson j;
  j["task_id"] = r.task_id;
  ojson msgs = ojson::array();
  for (const auto& m : r.messages) {
    ojson mj;
    mj["role"] = std::string(to_string(m.role));
    mj["content"] = m.content;
    msgs.push_back(std::move(mj));
  }
  j["messages"] = std::move(msgs);
  j["reward"] = r.reward;
  j["source"] = std::string(to_string(r.source));
  ojson meta = ojson::object();
  for (const auto& [k, v] : r.meta) meta[k] = v;
  j["meta"] = std::move(meta);
  return j.dump();
}

DatasetRecord parse_jsonl_line(std::string_view line, std::size_t line_no) {
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const ojson::parse_error& e) {
    throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
  }
  auto fail = [&](const std::string& what) -> DatasetRecord {
    throw ParseError(line_no, what);
  };
  if (!j.is_object()) return fail("record is not an object");
  static const char* kKeys[] = {"task_id", "messages", "reward", "source", "meta"};
  for (const char* k : kKeys)
    if (!j.contains(k)) return fail(fmt::format("missing key '{}'", k));
  if (j.size() != std::size(kKeys)) return fail("unexpected key in record");

  DatasetRecord r;
  if (!j["task_id"].is_string()) return fail("task_id must be a string");
  r.task_id = j["task_id"].get<std::string>();
  if (!j["reward"].is_number()) return fail("reward must be a number");
  r.reward = j["reward"].get<double>();
  const auto& src = j["source"];
  if (src == "agent") {
    r.source = DataSource::Agent;
  } else if (src == "general") {
    r.source = DataSource::General;
  } else {
    return fail("source must be \"agent\" or \"general\"");
  }
  if (!j["messages"].is_array()) return fail("messages must be an array");
  for (const auto& m : j["messages"]) {
    if (!m.is_object() || !m.contains("role") || !m.contains("content") ||
        !m["role"].is_string() || !m["content"].is_string())
      return fail("message needs string 'role' and 'content'");
    auto role = parse_chat_role(m["role"].get<std::string>());
    if (!role) return fail("unknown message role");
    r.messages.push_back({*role, m["content"].get<std::string>()});
  }
  if (!j["meta"].is_object()) return fail("meta must be an object");
  for (const auto& [k, v] : j["meta"].items()) {
    if (!v.is_string()) return fail("meta values must be strings");
    r.meta[k] = v.get<std::string>();
  }
  return r;
}

void write_jsonl(std::ostream& out, const std::vector<DatasetRecord>& records) {
  for (const auto& r : records) out << to_jsonl_line(r) << '\n';
}

std::vector<DatasetRecord> read_jsonl(std::istream& in) {
  std::vector<DatasetRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    out.push_back(parse_jsonl_line(line, n));
  }
  return out;
}

std::vector<DatasetRecord> read_jsonl_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_jsonl(in);
}

void write_jsonl_file(const std::string& path,
                      const std::vector<DatasetRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_jsonl(out, records);
}

}  // namespace agentlab
