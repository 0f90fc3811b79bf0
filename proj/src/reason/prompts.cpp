#include <fmt/format.h>

#include "agentlab/reason.hpp"

namespace agentlab::prompts {

std::string decompose(std::string_view goal, int k) {
  return fmt::format(
      "Break down the task \"{}\" into subtasks in the following format:\n"
      "1. <subtask>\n2. <subtask>\n...\n"
      "Use at most {} subtasks.",
      goal, k);
}

std::string judge(std::string_view subtask, std::string_view history) {
  return fmt::format("Subtask: {}\n\nRecent interaction:\n{}\n\n{}", subtask, history,
                     kJudgeInstruction);
}

std::string propose(std::string_view subtask, int num_branch) {
  std::string list;
  for (int i = 1; i <= num_branch; ++i) list += fmt::format("\n{}. <action>", i);
  return fmt::format(
      "Current subtask: {}\n"
      "Propose {} different candidate next action{} as a numbered list, one per line:{}",
      subtask, num_branch, num_branch == 1 ? "" : "s", list);
}

std::string select(std::span<const std::string> candidates, std::string_view history) {
  std::string list;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    list += fmt::format("{}. {}\n", i + 1, candidates[i]);
  return fmt::format(
      "Recent interaction:\n{}\n\nCandidate actions:\n{}\n"
      "Select the single best candidate for completing the task. Output only its number.",
      history, list);
}

std::string backtrack(std::string_view goal) {
  return fmt::format(
      "It was observed that the answer was not the optimal choice for task \"{}\". "
      "It is important to note that actions should be adjusted appropriately based on the "
      "historical information.",
      goal);
}

namespace {

std::string_view action_help(EnvKind kind) {
  switch (kind) {
    case EnvKind::Household:
      return "Available actions: go to <receptacle>, open <receptacle>, take <item>, "
             "put <item> in <receptacle>, look.";
    case EnvKind::Webshop:
      return "Available actions: search[<query>], view[<product id>], buy[<product id>], back.";
    case EnvKind::OsTask:
      return "Available commands: ls, cat, echo <text> > <file>, mkdir, mv, cp, rm, grep, pwd, "
             "cd, touch. Reply with done when the task is finished.";
  }
  return "";
}

}  // namespace

std::string system(Method m, EnvKind kind, std::string_view goal) {
  std::string s = fmt::format("You are an agent acting in a text environment.\nTask: {}\n{}",
                              goal, action_help(kind));
  switch (m) {
    case Method::IO:
    case Method::CoT:
      s += "\nRespond with exactly one action and nothing else.";
      break;
    case Method::ReAct:
      s += "\nRespond in the format:\nThought: <your reasoning>\nAction: <one action>";
      break;
    case Method::Ours:
      s += "\nWork through the current subtask. When asked for candidates, reply with a "
           "numbered list of actions.";
      break;
  }
  return s;
}

}  // namespace agentlab::prompts
