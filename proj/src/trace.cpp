#include "agentlab/trace.hpp"

#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "agentlab/core.hpp"
#include "agentlab/envs.hpp"
#include "agentlab/text.hpp"

namespace agentlab {

void TraceSink::emit(std::string_view event, int path, int turn, nlohmann::ordered_json payload) {
  nlohmann::ordered_json j{{"event", event}, {"path", path}, {"turn", turn},
                           {"payload", std::move(payload)}};
  write_line(j.dump());
}

void JsonlTraceWriter::write_line(const std::string& line) {
  out_ << line << '\n';
  out_.flush();
}

std::string MemoryTrace::str() const {
  std::string s;
  for (const auto& l : lines_) s += l + '\n';
  return s;
}

std::vector<nlohmann::ordered_json> MemoryTrace::events() const {
  std::vector<nlohmann::ordered_json> out;
  out.reserve(lines_.size());
  for (const auto& l : lines_) out.push_back(nlohmann::ordered_json::parse(l));
  return out;
}

namespace {

struct PathReplay {
  std::optional<EnvState> state;
  std::optional<std::string> pending_select;
  std::size_t steps = 0;
};

}  // namespace

ReplayReport replay_trace(std::istream& in) {
  ReplayReport rep;
  std::map<int, PathReplay> paths;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto fail = [&](const std::string& msg) {
      rep.failures.push_back(fmt::format("line {}: {}", line_no, msg));
    };
    nlohmann::json ev;
    try {
      ev = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, e.what());
    }
    if (!ev.is_object() || !ev.contains("event") || !ev.contains("path") || !ev.contains("payload"))
      throw ParseError(line_no, "trace event needs event, path and payload");
    const std::string name = ev["event"].get<std::string>();
    const int path = ev["path"].get<int>();
    const auto& p = ev["payload"];
    PathReplay& pr = paths[path];

    try {
      if (name == "reset") {
        pr = PathReplay{};
        ++rep.paths;
        auto kind = parse_env_kind(p.at("env_kind").get<std::string>());
        if (!kind) {
          fail("unknown env_kind");
          continue;
        }
        EnvState recorded = load_state(p.at("world"));
        if (!p.value("custom", false)) {
          EnvState fresh = make_state(*kind, p.at("seed").get<std::uint64_t>());
          if (dump_state(fresh) != dump_state(recorded)) {
            fail(fmt::format("path {}: world does not match seed", path));
            continue;
          }
        }
        if (initial_observation(recorded) != p.at("observation").get<std::string>())
          fail(fmt::format("path {}: initial observation differs", path));
        pr.state = std::move(recorded);
      } else if (!pr.state) {
        if (name != "backtrack") fail(fmt::format("path {}: {} before reset", path, name));
      } else if (name == "select") {
        pr.pending_select = p.at("action").get<std::string>();
      } else if (name == "step") {
        const std::string action = p.at("action").get<std::string>();
        if (pr.pending_select && *pr.pending_select != action)
          fail(fmt::format("path {}: step action differs from selected action", path));
        pr.pending_select.reset();
        if (is_done(*pr.state)) {
          fail(fmt::format("path {}: step after terminal state", path));
          continue;
        }
        StepResult r = env_step(*pr.state, action);
        ++pr.steps;
        ++rep.steps;
        if (r.observation != p.at("observation").get<std::string>())
          fail(fmt::format("path {}: observation differs for '{}'", path, action));
        if (r.reward != p.at("reward").get<double>() || r.done != p.at("done").get<bool>())
          fail(fmt::format("path {}: reward or done differs for '{}'", path, action));
      } else if (name == "done") {
        if (current_reward(*pr.state) != p.at("reward").get<double>())
          fail(fmt::format("path {}: final reward differs", path));
        if (p.contains("steps") && p["steps"].get<std::size_t>() != pr.steps)
          fail(fmt::format("path {}: step count differs", path));
      }
    } catch (const nlohmann::json::exception& e) {
      fail(fmt::format("malformed {} payload: {}", name, e.what()));
    }
  }
  return rep;
}

ReplayReport replay_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace " + path.string());
  return replay_trace(in);
}

}  // namespace agentlab
