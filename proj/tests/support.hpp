// Helpers shared by the unit and acceptance tests.
#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "agentlab/backend.hpp"
#include "agentlab/core.hpp"
#include "agentlab/rng.hpp"

namespace agentlab::testing {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("agentlab-test-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  out << body;
}

/// Random printable text, including quotes, backslashes, newlines and
/// multi-byte UTF-8 to exercise escaping.
inline std::string random_text(Rng& rng) {
  static const std::vector<std::string> atoms = {
      "a", "b", "z", " ", "go to", "\"", "\\", "\n", "\t", "{", "}", ",", ":", "\xc3\xa9",
      "\xe2\x82\xac", "0", "9", "[", "]", "take", "/"};
  std::string s;
  const int n = static_cast<int>(rng.between(1, 12));
  for (int i = 0; i < n; ++i) s += atoms[rng.below(atoms.size())];
  if (s.empty()) s = "x";
  return s;
}

/// A valid trajectory: optional system turn, alternating env/agent turns.
inline Trajectory random_trajectory(Rng& rng, std::size_t id) {
  Trajectory t;
  t.task_id = "task-" + std::to_string(id);
  if (rng.chance(1, 3)) t.push(Role::System, random_text(rng));
  const auto n = rng.between(1, 9);
  for (int i = 0; i < n; ++i)
    t.push(i % 2 == 0 ? Role::Environment : Role::Agent, random_text(rng));
  // Rewards on a 1/8 grid keep JSON round trips exact; a few arbitrary ones too.
  t.reward = rng.chance(1, 2) ? static_cast<double>(rng.below(9)) / 8.0
                              : static_cast<double>(rng.below(1000001)) / 1e6;
  t.truncated = rng.chance(1, 4);
  const auto n_meta = rng.below(3);
  for (std::size_t i = 0; i < n_meta; ++i) t.meta["k" + std::to_string(i)] = random_text(rng);
  return t;
}

}  // namespace agentlab::testing
