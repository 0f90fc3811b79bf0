// Shell tasks over an in-memory filesystem. Nothing here touches the host.
#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "agentlab/envs/step.hpp"

namespace agentlab {

/// kind is one of: file_exists, file_content, dir_exists, removed, moved,
/// copied. `path` is the subject; `target` the destination for moved/copied;
/// `text` the required content (file_content) or the original content
/// (moved/copied).
struct GoalCheck {
  std::string kind;
  std::string path;
  std::string target;
  std::string text;
  std::string description;

  friend bool operator==(const GoalCheck&, const GoalCheck&) = default;
};

struct OsTaskState {
  std::map<std::string, std::string> virtual_fs;  // file path -> content
  std::set<std::string> directories;
  std::string cwd = "/home/user";
  GoalCheck goal_check;
  std::vector<std::pair<std::string, std::string>> transcript;
  int steps_taken = 0;
  bool done = false;
  double reward = 0.0;

  friend bool operator==(const OsTaskState&, const OsTaskState&) = default;
};

namespace ostask {

inline constexpr std::string_view kHome = "/home/user";

OsTaskState generate(std::uint64_t seed);

std::string reset_observation(const OsTaskState& s);

/// Absolute, normalized form of `path` relative to `cwd`.
std::string resolve(std::string_view cwd, std::string_view path);

bool goal_holds(const OsTaskState& s);

/// Whitelisted commands: ls, cat, echo [> | >>], mkdir, mv, cp, rm, grep,
/// pwd, cd, touch; plus "done" to submit.
StepResult step(OsTaskState& s, std::string_view command);

bool parses(std::string_view command);

std::vector<std::string> candidate_actions(const OsTaskState& s);

nlohmann::json to_json(const OsTaskState& s);
OsTaskState from_json(const nlohmann::json& j);

}  // namespace ostask
}  // namespace agentlab
