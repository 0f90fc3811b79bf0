// Episode trace files: one JSON event per line,
//   {"event": ..., "path": int, "turn": int, "payload": {...}}
// and a replayer that re-executes them against the simulators.
#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace agentlab {

class TraceSink {
 public:
  virtual ~TraceSink() = default;
  void emit(std::string_view event, int path, int turn, nlohmann::ordered_json payload);

 protected:
  virtual void write_line(const std::string& line) = 0;
};

class JsonlTraceWriter : public TraceSink {
 public:
  explicit JsonlTraceWriter(std::ostream& out) : out_(out) {}

 protected:
  void write_line(const std::string& line) override;

 private:
  std::ostream& out_;
};

class MemoryTrace : public TraceSink {
 public:
  const std::vector<std::string>& lines() const { return lines_; }
  std::string str() const;
  std::vector<nlohmann::ordered_json> events() const;

 protected:
  void write_line(const std::string& line) override { lines_.push_back(line); }

 private:
  std::vector<std::string> lines_;
};

struct ReplayReport {
  std::size_t paths = 0;
  std::size_t steps = 0;
  std::vector<std::string> failures;
  bool ok() const { return failures.empty() && paths > 0; }
};

/// Re-executes every path: the recorded world must match its seed (unless
/// marked custom), and each step's observation, reward and done flag, plus
/// each path's final reward, must be reproduced exactly.
ReplayReport replay_trace(std::istream& in);
ReplayReport replay_trace_file(const std::filesystem::path& path);

}  // namespace agentlab
