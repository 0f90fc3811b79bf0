// The reasoning engine. Baselines (IO, CoT, ReAct) and the tree method:
// a planner splits the task into subtasks, a judge decides when each one is
// finished and picks among several proposed actions, and failed paths are
// retried from a fresh reset with the earlier attempts summarized.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "agentlab/backend.hpp"
#include "agentlab/core.hpp"
#include "agentlab/envs.hpp"
#include "agentlab/trace.hpp"

namespace agentlab {

enum class Method { IO, CoT, ReAct, Ours };

std::string_view to_string(Method m);
std::optional<Method> parse_method(std::string_view s);

struct MethodConfig {
  Method method = Method::Ours;
  int num_path = 2;
  int num_branch = 2;
  int k = 3;
  double reward_threshold = 1.0;
  int loop_abort_after = 3;
  /// Unset: decompose household tasks only.
  std::optional<bool> decompose;
  bool backtrack = true;
  bool replan_on_backtrack = false;

  /// Throws Error on counts < 1, k > 5, or a threshold outside [0,1].
  void validate() const;
  bool decomposes(EnvKind kind) const;
  /// Stable identifier used in file names and report rows.
  std::string label() const;

  /// Single-path, single-branch config for a baseline method.
  static MethodConfig baseline(Method m);
};

inline constexpr int kMaxSubtasks = 5;
inline constexpr std::size_t kJudgeWindow = 8;
inline constexpr std::size_t kFailedSummaryCap = 30;

namespace prompts {

std::string decompose(std::string_view goal, int k);
inline constexpr std::string_view kPlanFormatReminder =
    "Reply only with the numbered list, one subtask per line, e.g. \"1. ...\".";

inline constexpr std::string_view kJudgeInstruction =
    "Judge whether the subtask is completed, output Yes or No.";
std::string judge(std::string_view subtask, std::string_view history);

std::string propose(std::string_view subtask, int num_branch);
inline constexpr std::string_view kProposeFormatReminder =
    "Your previous reply could not be parsed. Reply only with a numbered list of actions.";

std::string select(std::span<const std::string> candidates, std::string_view history);

/// Backtracking prompt followed by the history-avoidance prompt.
std::string backtrack(std::string_view goal);
inline constexpr std::string_view kBacktrackMarker = "was not the optimal choice for task";

std::string system(Method m, EnvKind kind, std::string_view goal);

inline constexpr std::string_view kCotPreamble =
    "Let's think step by step about how to complete the task before acting.";

}  // namespace prompts

// ---------------------------------------------------------------------------

struct SubtaskPlan {
  TaskSpec task;
  std::vector<std::string> subtasks;
  std::size_t cursor = 0;

  bool finished() const { return cursor >= subtasks.size(); }
  const std::string& current() const;
};

class PlanParseFailure : public Error {
 public:
  PlanParseFailure(SubtaskPlan fallback, int attempts);
  /// Single-subtask plan equal to the whole task.
  const SubtaskPlan& fallback() const { return fallback_; }
  int attempts() const { return attempts_; }

 private:
  SubtaskPlan fallback_;
  int attempts_;
};

/// Prompts the planner and parses a numbered list (truncated to k), with up
/// to two format-reminder retries. k == 1 returns the goal itself without a
/// planner call. Throws PlanParseFailure when nothing parses.
SubtaskPlan decompose(ModelBackend& planner, const TaskSpec& task, int k);

struct JudgeVerdict {
  bool completed = false;
  bool malformed = false;
};

/// Case-insensitive, surrounding punctuation ignored: "yes" / "no"; any
/// other output is NotCompleted with the malformed flag.
JudgeVerdict normalize_judgement(std::string_view output);

JudgeVerdict judge_subtask(ModelBackend& judge, std::span<const DialogueTurn> history,
                           std::string_view subtask);

class NoCandidates : public Error {
 public:
  NoCandidates() : Error("no candidate actions could be parsed") {}
};

struct Proposal {
  std::vector<std::string> candidates;
  bool underfilled = false;
  int attempts = 0;
};

/// Asks for num_branch candidates as a numbered list; exact duplicates are
/// dropped and the list is capped at num_branch. With num_branch == 1 a bare
/// single-line reply is accepted.
Proposal propose_actions(ModelBackend& actor, std::span<const DialogueTurn> context,
                         int num_branch, std::string_view subtask);

struct Selection {
  std::size_t index = 0;
  std::string action;
  bool malformed = false;
  bool judged = false;
};

/// One candidate: returned without a judge call. Otherwise the judge
/// answers a 1-based index; anything unusable falls back to the first.
Selection select_action(ModelBackend& judge, std::span<const DialogueTurn> context,
                        std::span<const std::string> candidates);

struct ReactStep {
  std::string thought;
  std::string action;
};

/// Grammar: a "Thought: <text>" line, then exactly one "Action: <text>" line
/// as the last non-empty line. Case-sensitive labels.
std::optional<ReactStep> parse_react(std::string_view output);

/// Best-effort action from a malformed reply: the last "Action:" line's
/// text if any, else the first non-empty line.
std::string salvage_action(std::string_view output);

// ---------------------------------------------------------------------------

struct EpisodeRecord {
  Trajectory trajectory;
  double reward = 0.0;
  /// Empty when the path ran to completion or the turn cap.
  std::string abandoned_reason;
  int steps = 0;
  int actor_calls = 0;
  int format_errors = 0;
  int malformed_judgements = 0;
  int underfilled_proposals = 0;
  bool loop_aborted = false;
  std::vector<std::string> actions;
};

struct ReasoningTree {
  std::vector<EpisodeRecord> paths;
  int num_path = 1;
  int num_branch = 1;
  std::size_t best = 0;
  std::vector<std::string> subtasks;
  bool plan_fallback = false;

  double best_reward() const { return paths.empty() ? 0.0 : paths[best].reward; }
};

/// Runs one task under `cfg`. Planner and judge are only consulted by the
/// tree method. Backend errors abandon the current path, never the episode.
ReasoningTree run_episode(const MethodConfig& cfg, const TaskSpec& spec, ModelBackend& actor,
                          ModelBackend& planner, ModelBackend& judge,
                          TraceSink* trace = nullptr);

/// Same, starting every path from `initial` instead of the seeded world.
ReasoningTree run_episode(const MethodConfig& cfg, const TaskSpec& spec, const EnvState& initial,
                          ModelBackend& actor, ModelBackend& planner, ModelBackend& judge,
                          TraceSink* trace = nullptr);

/// Chat view of a turn list: System->system, Environment->user,
/// Agent->assistant.
std::vector<ChatMessage> to_chat(std::span<const DialogueTurn> turns);

}  // namespace agentlab
