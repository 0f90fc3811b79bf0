#include <algorithm>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "agentlab/reason.hpp"
#include "agentlab/text.hpp"

namespace agentlab {
namespace {

using ojson = nlohmann::ordered_json;

struct Ctx {
  const MethodConfig& cfg;
  const TaskSpec& spec;
  const EnvState& initial;
  std::string goal;
  bool custom = false;
  ModelBackend& actor;
  ModelBackend& planner;
  ModelBackend& judge;
  TraceSink* trace;

  void emit(std::string_view ev, int path, int turn, ojson payload) const {
    if (trace) trace->emit(ev, path, turn, std::move(payload));
  }
};

std::string summarize_failures(const std::vector<EpisodeRecord>& paths) {
  std::string s = "Previously attempted action sequences:";
  for (std::size_t i = 0; i < paths.size(); ++i) {
    auto acts = paths[i].actions;
    if (acts.size() > kFailedSummaryCap) acts.resize(kFailedSummaryCap);
    s += fmt::format("\nPath {}: {}", i + 1, acts.empty() ? "(none)" : text::join(acts, " -> "));
  }
  return s;
}

bool single_line(std::string_view reply) {
  int n = 0;
  for (const auto& l : text::split_lines(reply))
    if (!text::trim(l).empty()) ++n;
  return n == 1;
}

struct PlanOutcome {
  std::vector<std::string> subtasks;
  bool fallback = false;
};

PlanOutcome plan(const Ctx& c) {
  TaskSpec t = c.spec;
  t.goal_text = c.goal;
  try {
    return {decompose(c.planner, t, c.cfg.k).subtasks, false};
  } catch (const PlanParseFailure& e) {
    return {e.fallback().subtasks, true};
  } catch (const BackendError&) {
    return {{c.goal}, true};
  }
}

EpisodeRecord run_path(const Ctx& c, int path, const std::string& system_prompt,
                       const std::vector<std::string>& subtasks) {
  const MethodConfig& cfg = c.cfg;
  const EnvKind kind = kind_of(c.initial);
  EnvState state = c.initial;

  EpisodeRecord rec;
  Trajectory& traj = rec.trajectory;
  traj.task_id = fmt::format("{}-{}", to_string(kind), c.spec.seed);
  traj.push(Role::System, system_prompt);
  const std::string obs0 = initial_observation(state);
  traj.push(Role::Environment, obs0);

  ojson reset{{"env_kind", to_string(kind)},
              {"seed", c.spec.seed},
              {"task_id", traj.task_id},
              {"goal", c.goal},
              {"method", cfg.label()},
              {"custom", c.custom},
              {"world", ojson::parse(dump_state(c.initial).dump())},
              {"observation", obs0},
              {"subtasks", subtasks}};
  c.emit("reset", path, 0, std::move(reset));

  const bool tree = cfg.method == Method::Ours;
  const bool judged_subtasks = tree && cfg.decomposes(kind) && !subtasks.empty();
  std::size_t cursor = 0;
  int steps_in_subtask = 0;
  const int subtask_budget = std::max(1, c.spec.max_turns / std::max(1, cfg.k));
  auto current_subtask = [&]() -> const std::string& {
    if (subtasks.empty()) return c.goal;
    return subtasks[std::min(cursor, subtasks.size() - 1)];
  };

  std::string last_action;
  int repeat = 0;

  try {
    if (cfg.method == Method::CoT && !is_done(state)) {
      std::vector<ChatMessage> msgs{{ChatRole::System, system_prompt},
                                    {ChatRole::User, obs0 + "\n\n" + std::string(prompts::kCotPreamble)}};
      ++rec.actor_calls;
      const std::string thought(text::trim(c.actor.chat(msgs, DecodeParams::generation())));
      if (!thought.empty()) traj.turns.front().content += "\nThought: " + thought;
    }

    while (!is_done(state)) {
      if (rec.steps >= c.spec.max_turns) {
        traj.truncated = true;
        break;
      }
      const int turn = rec.steps + 1;
      std::string action;
      std::string agent_text;

      switch (cfg.method) {
        case Method::IO:
        case Method::CoT: {
          ++rec.actor_calls;
          const std::string reply = c.actor.chat(to_chat(traj.turns), DecodeParams::generation());
          action = text::first_line(reply);
          if (!single_line(reply)) ++rec.format_errors;
          agent_text = action;
          break;
        }
        case Method::ReAct: {
          ++rec.actor_calls;
          const std::string reply = c.actor.chat(to_chat(traj.turns), DecodeParams::generation());
          if (auto r = parse_react(reply)) {
            action = r->action;
            agent_text = "Thought: " + r->thought + "\nAction: " + r->action;
          } else {
            ++rec.format_errors;
            action = salvage_action(reply);
            agent_text = action;
          }
          break;
        }
        case Method::Ours: {
          Proposal p;
          try {
            p = propose_actions(c.actor, traj.turns, cfg.num_branch, current_subtask());
          } catch (const NoCandidates&) {
            rec.actor_calls += 3;
            rec.format_errors += 3;
            throw;
          }
          rec.actor_calls += p.attempts;
          rec.format_errors += p.attempts - 1;
          if (p.underfilled) ++rec.underfilled_proposals;
          c.emit("propose", path, turn,
                 {{"subtask", current_subtask()}, {"candidates", p.candidates},
                  {"underfilled", p.underfilled}, {"attempts", p.attempts}});
          Selection sel = select_action(c.judge, traj.turns, p.candidates);
          if (sel.malformed) ++rec.malformed_judgements;
          c.emit("select", path, turn,
                 {{"index", sel.index}, {"action", sel.action},
                  {"judged", sel.judged}, {"malformed", sel.malformed}});
          action = sel.action;
          agent_text = action;
          break;
        }
      }

      if (action.empty()) {
        rec.abandoned_reason = "empty action";
        break;
      }
      const std::string norm = normalize_action(action);
      repeat = norm == last_action ? repeat + 1 : 1;
      last_action = norm;
      if (repeat >= cfg.loop_abort_after) {
        rec.loop_aborted = true;
        rec.abandoned_reason = fmt::format("loop: '{}' repeated {} times", action, repeat);
        break;
      }

      traj.push(Role::Agent, agent_text);
      rec.actions.push_back(action);
      StepResult r = env_step(state, action);
      ++rec.steps;
      traj.push(Role::Environment, r.observation);
      c.emit("step", path, turn,
             {{"action", action}, {"observation", r.observation}, {"reward", r.reward},
              {"done", r.done}});

      if (judged_subtasks && !r.done && cursor < subtasks.size()) {
        ++steps_in_subtask;
        JudgeVerdict v = judge_subtask(c.judge, traj.turns, current_subtask());
        if (v.malformed) ++rec.malformed_judgements;
        const bool forced = !v.completed && steps_in_subtask >= subtask_budget;
        c.emit("judge", path, turn,
               {{"subtask", current_subtask()}, {"completed", v.completed},
                {"malformed", v.malformed}, {"forced", forced}});
        if (v.completed || forced) {
          ++cursor;
          steps_in_subtask = 0;
        }
      }
    }
  } catch (const BackendError& e) {
    rec.abandoned_reason = fmt::format("backend: {}", e.what());
  } catch (const NoCandidates& e) {
    rec.abandoned_reason = e.what();
  }

  rec.reward = current_reward(state);
  traj.reward = rec.reward;
  traj.meta["env_kind"] = std::string(to_string(kind));
  traj.meta["seed"] = std::to_string(c.spec.seed);
  traj.meta["method"] = cfg.label();
  traj.meta["path"] = std::to_string(path);
  traj.meta["max_turns"] = std::to_string(c.spec.max_turns);
  traj.meta["feedback_source"] = "simulator";
  traj.meta["goal"] = c.goal;
  if (c.custom) traj.meta["world"] = dump_state(c.initial).dump();
  c.emit("done", path, rec.steps,
         {{"reward", rec.reward}, {"abandoned_reason", rec.abandoned_reason},
          {"truncated", traj.truncated}, {"steps", rec.steps}});
  return rec;
}

}  // namespace

ReasoningTree run_episode(const MethodConfig& cfg, const TaskSpec& spec, ModelBackend& actor,
                          ModelBackend& planner, ModelBackend& judge, TraceSink* trace) {
  return run_episode(cfg, spec, make_state(spec.env_kind, spec.seed), actor, planner, judge,
                     trace);
}

ReasoningTree run_episode(const MethodConfig& cfg, const TaskSpec& spec, const EnvState& initial,
                          ModelBackend& actor, ModelBackend& planner, ModelBackend& judge,
                          TraceSink* trace) {
  cfg.validate();
  if (kind_of(initial) != spec.env_kind) throw Error("initial state does not match env_kind");
  if (spec.max_turns < 1) throw Error("max_turns must be at least 1");

  Ctx c{cfg, spec, initial, spec.goal_text.empty() ? goal_text(initial) : spec.goal_text,
        dump_state(initial) != dump_state(make_state(spec.env_kind, spec.seed)),
        actor, planner, judge, trace};

  ReasoningTree tree;
  tree.num_path = cfg.num_path;
  tree.num_branch = cfg.num_branch;
  const bool decomposing = cfg.decomposes(spec.env_kind) && !is_done(initial);
  if (decomposing) {
    auto p = plan(c);
    tree.subtasks = std::move(p.subtasks);
    tree.plan_fallback = p.fallback;
  }

  const std::string base_system = prompts::system(cfg.method, spec.env_kind, c.goal);
  for (int path = 0; path < cfg.num_path; ++path) {
    std::string system_prompt = base_system;
    if (path > 0) {
      const std::string bt = prompts::backtrack(c.goal) + "\n" + summarize_failures(tree.paths);
      system_prompt += "\n\n" + bt;
      c.emit("backtrack", path, 0,
             {{"from_path", path - 1}, {"reward", tree.paths.back().reward}, {"prompt", bt}});
      if (decomposing && cfg.replan_on_backtrack) {
        auto p = plan(c);
        tree.subtasks = std::move(p.subtasks);
        tree.plan_fallback = tree.plan_fallback || p.fallback;
      }
    }
    tree.paths.push_back(run_path(c, path, system_prompt, tree.subtasks));
    if (tree.paths.back().reward > tree.paths[tree.best].reward) tree.best = tree.paths.size() - 1;
    if (tree.paths.back().reward >= cfg.reward_threshold || !cfg.backtrack) break;
  }
  return tree;
}

}  // namespace agentlab
