// Scripted scenarios whose outcome is known by construction.
#pragma once

#include <string>
#include <vector>

#include "agentlab/backend.hpp"
#include "agentlab/envs.hpp"
#include "agentlab/reason.hpp"

namespace agentlab::testing {

inline std::vector<std::string> household_plan(std::uint64_t seed) {
  return oracle_solve(make_task(EnvKind::Household, seed), 6).best_plan;
}

/// Proposals answer "look" until the backtracking prompt shows up; from then
/// on they follow `plan`. The first path therefore loops and fails.
inline std::vector<ScriptEntry> backtrack_script(const std::vector<std::string>& plan) {
  std::vector<ScriptEntry> s;
  for (const auto& a : plan)
    s.push_back({MatchRule::containing(std::string(prompts::kBacktrackMarker)), "1. " + a});
  for (int i = 0; i < 8; ++i) s.push_back({MatchRule::any(), "1. look"});
  return s;
}

/// The goal-advancing action is always candidate 2.
inline std::vector<ScriptEntry> branch_script(const std::vector<std::string>& plan) {
  std::vector<ScriptEntry> s;
  for (const auto& a : plan) s.push_back({MatchRule::any(), "1. look\n2. " + a});
  for (int i = 0; i < 8; ++i) s.push_back({MatchRule::any(), "1. look\n2. look"});
  return s;
}

inline std::vector<ScriptEntry> always(const std::string& response, int n = 64) {
  return std::vector<ScriptEntry>(static_cast<std::size_t>(n), {MatchRule::any(), response});
}

inline MethodConfig tree_config(int num_path, int num_branch) {
  MethodConfig m;
  m.method = Method::Ours;
  m.num_path = num_path;
  m.num_branch = num_branch;
  m.decompose = false;
  return m;
}

}  // namespace agentlab::testing
