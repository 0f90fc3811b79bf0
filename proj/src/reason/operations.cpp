#include <algorithm>
#include <cctype>

#include <fmt/format.h>

#include "agentlab/reason.hpp"
#include "agentlab/text.hpp"

namespace agentlab {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::IO: return "io";
    case Method::CoT: return "cot";
    case Method::ReAct: return "react";
    case Method::Ours: return "ours";
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view s) {
  const std::string l = text::lower(s);
  if (l == "io") return Method::IO;
  if (l == "cot") return Method::CoT;
  if (l == "react") return Method::ReAct;
  if (l == "ours" || l == "tree") return Method::Ours;
  return std::nullopt;
}

void MethodConfig::validate() const {
  if (num_path < 1 || num_branch < 1 || k < 1 || loop_abort_after < 1)
    throw Error("method counts must be at least 1");
  if (k > kMaxSubtasks) throw Error(fmt::format("k must be at most {}", kMaxSubtasks));
  if (!(reward_threshold >= 0.0 && reward_threshold <= 1.0))
    throw Error("reward_threshold must be in [0,1]");
}

bool MethodConfig::decomposes(EnvKind kind) const {
  if (method != Method::Ours) return false;
  return decompose.value_or(kind == EnvKind::Household);
}

std::string MethodConfig::label() const {
  if (method == Method::Ours)
    return fmt::format("ours-p{}-b{}", num_path, num_branch);
  if (num_path > 1) return fmt::format("{}-p{}", to_string(method), num_path);
  return std::string(to_string(method));
}

MethodConfig MethodConfig::baseline(Method m) {
  MethodConfig c;
  c.method = m;
  c.num_path = 1;
  c.num_branch = 1;
  return c;
}

std::vector<ChatMessage> to_chat(std::span<const DialogueTurn> turns) {
  std::vector<ChatMessage> out;
  out.reserve(turns.size());
  for (const auto& t : turns) {
    ChatRole r = t.role == Role::System        ? ChatRole::System
                 : t.role == Role::Environment ? ChatRole::User
                                               : ChatRole::Assistant;
    out.push_back({r, t.content});
  }
  return out;
}

namespace {

/// "Observation: ..." / "Action: ..." lines for the last `window` non-system turns.
std::string render_history(std::span<const DialogueTurn> turns, std::size_t window) {
  std::vector<std::string> lines;
  for (const auto& t : turns) {
    if (t.role == Role::System) continue;
    lines.push_back((t.role == Role::Environment ? "Observation: " : "Action: ") + t.content);
  }
  if (lines.size() > window) lines.erase(lines.begin(), lines.end() - static_cast<std::ptrdiff_t>(window));
  return text::join(lines, "\n");
}

}  // namespace

// ---------------------------------------------------------------------------

const std::string& SubtaskPlan::current() const {
  return subtasks.at(std::min(cursor, subtasks.size() - 1));
}

PlanParseFailure::PlanParseFailure(SubtaskPlan fallback, int attempts)
    : Error(fmt::format("planner output had no numbered list after {} attempts", attempts)),
      fallback_(std::move(fallback)),
      attempts_(attempts) {}

SubtaskPlan decompose(ModelBackend& planner, const TaskSpec& task, int k) {
  if (k < 1 || k > kMaxSubtasks)
    throw Error(fmt::format("k must be in [1, {}]", kMaxSubtasks));
  SubtaskPlan plan{task, {}, 0};
  if (k == 1) {
    plan.subtasks = {task.goal_text};
    return plan;
  }
  std::vector<ChatMessage> msgs{
      {ChatRole::System, "You are a planning assistant for household, shopping and shell tasks."},
      {ChatRole::User, prompts::decompose(task.goal_text, k)}};
  constexpr int kAttempts = 3;
  for (int attempt = 1; attempt <= kAttempts; ++attempt) {
    auto items = text::parse_numbered_list(planner.chat(msgs, DecodeParams::judging()));
    if (!items.empty()) {
      if (items.size() > static_cast<std::size_t>(k)) items.resize(static_cast<std::size_t>(k));
      plan.subtasks = std::move(items);
      return plan;
    }
    msgs.back().content = prompts::decompose(task.goal_text, k) + "\n" +
                          std::string(prompts::kPlanFormatReminder);
  }
  plan.subtasks = {task.goal_text};
  throw PlanParseFailure(std::move(plan), kAttempts);
}

JudgeVerdict normalize_judgement(std::string_view output) {
  const std::string s = text::lower(text::strip_punct(output));
  if (s == "yes") return {true, false};
  if (s == "no") return {false, false};
  return {false, true};
}

JudgeVerdict judge_subtask(ModelBackend& judge, std::span<const DialogueTurn> history,
                           std::string_view subtask) {
  if (history.empty()) throw Error("judge_subtask needs a non-empty history");
  std::vector<ChatMessage> msgs{
      {ChatRole::System, std::string(prompts::kJudgeInstruction)},
      {ChatRole::User, prompts::judge(subtask, render_history(history, kJudgeWindow))}};
  return normalize_judgement(judge.chat(msgs, DecodeParams::judging()));
}

Proposal propose_actions(ModelBackend& actor, std::span<const DialogueTurn> context,
                         int num_branch, std::string_view subtask) {
  if (num_branch < 1) throw Error("num_branch must be at least 1");
  if (context.empty() || context.back().role != Role::Environment)
    throw Error("propose_actions context must end with an environment turn");
  auto msgs = to_chat(context);
  const std::string base = msgs.back().content;
  msgs.back().content = base + "\n\n" + prompts::propose(subtask, num_branch);

  Proposal p;
  constexpr int kAttempts = 3;
  for (int attempt = 1; attempt <= kAttempts; ++attempt) {
    p.attempts = attempt;
    const std::string out = actor.chat(msgs, DecodeParams::generation());
    auto items = text::parse_numbered_list(out);
    if (items.empty() && num_branch == 1) {
      std::string line = text::first_line(out);
      if (!line.empty()) items.push_back(std::move(line));
    }
    std::vector<std::string> unique;
    for (auto& item : items)
      if (std::ranges::find(unique, item) == unique.end()) unique.push_back(std::move(item));
    if (!unique.empty()) {
      p.underfilled = unique.size() < static_cast<std::size_t>(num_branch);
      if (unique.size() > static_cast<std::size_t>(num_branch))
        unique.resize(static_cast<std::size_t>(num_branch));
      p.candidates = std::move(unique);
      return p;
    }
    msgs.back().content = base + "\n\n" + prompts::propose(subtask, num_branch) + "\n" +
                          std::string(prompts::kProposeFormatReminder);
  }
  throw NoCandidates();
}

Selection select_action(ModelBackend& judge, std::span<const DialogueTurn> context,
                        std::span<const std::string> candidates) {
  if (candidates.empty()) throw Error("select_action needs at least one candidate");
  if (candidates.size() == 1) return {0, candidates[0], false, false};
  std::vector<ChatMessage> msgs{
      {ChatRole::System, "You are a judge choosing the next action for an agent."},
      {ChatRole::User, prompts::select(candidates, render_history(context, kJudgeWindow))}};
  const std::string out = judge.chat(msgs, DecodeParams::judging());

  Selection sel{0, candidates[0], true, true};
  auto it = std::ranges::find_if(out, [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  if (it != out.end()) {
    std::size_t value = 0;
    bool overflow = false;
    for (; it != out.end() && std::isdigit(static_cast<unsigned char>(*it)); ++it) {
      value = value * 10 + static_cast<std::size_t>(*it - '0');
      if (value > candidates.size()) overflow = true;
    }
    if (!overflow && value >= 1 && value <= candidates.size()) {
      sel.index = value - 1;
      sel.action = candidates[sel.index];
      sel.malformed = false;
    }
  }
  return sel;
}

std::optional<ReactStep> parse_react(std::string_view output) {
  std::vector<std::string> lines;
  for (const auto& l : text::split_lines(output)) {
    auto t = text::trim(l);
    if (!t.empty()) lines.emplace_back(t);
  }
  if (lines.size() < 2) return std::nullopt;
  constexpr std::string_view kThought = "Thought:";
  constexpr std::string_view kAction = "Action:";
  if (!lines.front().starts_with(kThought) || !lines.back().starts_with(kAction))
    return std::nullopt;
  for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
    if (lines[i].starts_with(kAction) || lines[i].starts_with(kThought)) return std::nullopt;
  }
  ReactStep step;
  step.thought = std::string(text::trim(std::string_view(lines.front()).substr(kThought.size())));
  for (std::size_t i = 1; i + 1 < lines.size(); ++i) step.thought += "\n" + lines[i];
  step.action = std::string(text::trim(std::string_view(lines.back()).substr(kAction.size())));
  if (text::trim(std::string_view(lines.front()).substr(kThought.size())).empty() ||
      step.action.empty())
    return std::nullopt;
  return step;
}

std::string salvage_action(std::string_view output) {
  auto lines = text::split_lines(output);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    auto t = text::trim(*it);
    if (t.starts_with("Action:")) {
      auto a = text::trim(t.substr(7));
      if (!a.empty()) return std::string(a);
    }
  }
  return text::first_line(output);
}

}  // namespace agentlab
