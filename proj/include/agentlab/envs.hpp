// Uniform interface over the three simulators plus the brute-force oracle.
#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "agentlab/core.hpp"
#include "agentlab/envs/household.hpp"
#include "agentlab/envs/ostask.hpp"
#include "agentlab/envs/step.hpp"
#include "agentlab/envs/webshop.hpp"

namespace agentlab {

using EnvState = std::variant<HouseholdState, WebshopState, OsTaskState>;

EnvKind kind_of(const EnvState& s);

/// Pure function of (kind, seed).
EnvState make_state(EnvKind kind, std::uint64_t seed);

struct ResetResult {
  EnvState state;
  std::string observation;
};

ResetResult env_reset(const TaskSpec& spec);

/// Convenience: a TaskSpec whose goal text and turn cap come from the
/// seeded world.
TaskSpec make_task(EnvKind kind, std::uint64_t seed);

std::string initial_observation(const EnvState& s);
std::string goal_text(const EnvState& s);

/// Throws EpisodeAlreadyDone once the state is terminal.
StepResult env_step(EnvState& s, std::string_view action);

bool is_done(const EnvState& s);
/// Reward the episode holds if it ended now (0 unless terminal with credit).
double current_reward(const EnvState& s);

/// Syntactic check against the environment's action grammar.
bool action_parses(EnvKind kind, std::string_view action);

/// Finite action-template enumeration used by the oracle.
std::vector<std::string> candidate_actions(const EnvState& s);

/// {"env_kind": ..., "state": {...}} with the state's field names.
nlohmann::json dump_state(const EnvState& s);
EnvState load_state(const nlohmann::json& j);

/// Canonical encoding of everything that influences future transitions
/// (step counters and transcripts excluded).
std::string transition_key(const EnvState& s);

// ---------------------------------------------------------------------------

class SearchBudgetExceeded : public Error {
 public:
  explicit SearchBudgetExceeded(std::size_t cap);
};

struct OracleResult {
  double best_reward = 0.0;
  std::vector<std::string> best_plan;
  std::size_t nodes_expanded = 0;
};

inline constexpr std::size_t kDefaultNodeCap = 2'000'000;
inline constexpr int kMaxOracleDepth = 8;

/// Breadth-first search over action sequences up to `max_depth`. States with
/// an identical transition_key are expanded once. Returns the maximal reward
/// and a shortest plan reaching it.
OracleResult oracle_solve(const EnvState& initial, int max_depth,
                          std::size_t node_cap = kDefaultNodeCap);
OracleResult oracle_solve(const TaskSpec& spec, int max_depth,
                          std::size_t node_cap = kDefaultNodeCap);

}  // namespace agentlab
