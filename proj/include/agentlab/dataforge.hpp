// Agent-data construction: role-play between three model roles, imitation of
// exemplar trajectories, and an automatic consistency filter that stands in
// for manual screening.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include "agentlab/backend.hpp"
#include "agentlab/core.hpp"
#include "agentlab/envs.hpp"

namespace agentlab {

struct RolePrompts {
  std::string question_generator =
      "You invent household tasks. Given a room description, reply with a single task of the "
      "form \"put a <item> in the <receptacle>\" using objects from the room.";
  std::string action_maker =
      "You are an agent in a household. Reply with exactly one action per turn.";
  std::string environment_agent =
      "You simulate a household environment. Reply with a short observation describing the "
      "result of the agent's last action. When the task has been accomplished, reply with a "
      "line starting with TASK COMPLETE.";
};

/// The three slots may alias the same backend.
struct RoleCast {
  ModelBackend& question_generator;
  ModelBackend& action_maker;
  ModelBackend& environment_agent;
  RolePrompts prompts{};
};

inline constexpr std::string_view kTaskComplete = "TASK COMPLETE";

class GoalGenerationFailure : public Error {
 public:
  GoalGenerationFailure() : Error("question generator produced no goal after 2 retries") {}
};

/// Requires max_turns >= 2 (the number of agent actions allowed).
Trajectory forge_roleplay(const RoleCast& cast, std::uint64_t seed, int max_turns);

/// Text layout shared by the exemplar prompt and its parser:
///   ### Task: <id>
///   Environment: ...
///   Agent: ...
///   Reward: <r>
/// Lines without a label continue the previous turn.
std::string format_exemplar(const Trajectory& t);
std::optional<Trajectory> parse_exemplar(std::string_view text);

struct ExemplarResult {
  std::vector<Trajectory> trajectories;
  std::size_t dropped = 0;
};

class AllOutputsUnparseable : public Error {
 public:
  explicit AllOutputsUnparseable(std::size_t n)
      : Error(fmt_message(n)), dropped_(n) {}
  std::size_t dropped() const { return dropped_; }

 private:
  static std::string fmt_message(std::size_t n) {
    return "none of the " + std::to_string(n) + " generated outputs could be parsed";
  }
  std::size_t dropped_;
};

ExemplarResult forge_exemplar(ModelBackend& backend, const std::vector<Trajectory>& exemplars,
                              EnvKind env_kind, int n, std::uint64_t seed = 0);

// ---------------------------------------------------------------------------

struct FilterVerdict {
  bool keep = true;
  /// Hard failures ("R1".."R5").
  std::vector<std::string> reasons;
  /// Soft failures: checks that could not run. Items go to the review queue.
  bool needs_review = false;
  std::vector<std::string> review_notes;
};

FilterVerdict auto_filter(const Trajectory& t);

/// Action text of an agent turn: the last "Action:" line when present,
/// else the trimmed content.
std::string extract_action(std::string_view agent_turn);

/// Executes `actions` from `initial` and records a trajectory whose
/// feedback is the simulator's own.
Trajectory simulate_trajectory(const EnvState& initial, std::uint64_t seed,
                               const std::vector<std::string>& actions, int max_turns);

/// Serialized JSONL appender for trajectories awaiting human review.
class ReviewQueue {
 public:
  explicit ReviewQueue(const std::filesystem::path& path);
  void push(const Trajectory& t, const FilterVerdict& v);
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::ofstream out_;
  std::size_t count_ = 0;
};

}  // namespace agentlab
