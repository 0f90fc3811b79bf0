#include "agentlab/dataforge.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "agentlab/rng.hpp"
#include "agentlab/text.hpp"

namespace agentlab {
namespace {

std::string generate_goal(const RoleCast& cast, const std::string& room) {
  std::vector<ChatMessage> msgs{{ChatRole::System, cast.prompts.question_generator},
                                {ChatRole::User, "Room:\n" + room + "\nPropose one task."}};
  for (int attempt = 0; attempt < 3; ++attempt) {
    std::string goal = text::first_line(cast.question_generator.chat(msgs, DecodeParams::generation()));
    while (!goal.empty() && goal.back() == '.') goal.pop_back();
    if (!goal.empty()) return goal;
  }
  throw GoalGenerationFailure();
}

bool is_completion(std::string_view feedback) {
  return text::trim(feedback).starts_with(kTaskComplete);
}

}  // namespace

Trajectory forge_roleplay(const RoleCast& cast, std::uint64_t seed, int max_turns) {
  if (max_turns < 2) throw Error("max_turns must be at least 2");
  const EnvState world = make_state(EnvKind::Household, seed);
  const auto& hs = std::get<HouseholdState>(world);
  const std::string room = household::describe_room(hs);
  const std::string goal = generate_goal(cast, room);

  std::string obs0 = household::reset_observation(hs);
  obs0 = obs0.substr(0, obs0.find("\nYour task is to:")) + "\nYour task is to: " + goal + ".";

  Trajectory t;
  t.task_id = fmt::format("roleplay-{}", seed);
  t.push(Role::Environment, obs0);

  const std::string env_system =
      cast.prompts.environment_agent + "\nRoom layout:\n" + room + "\nTask: " + goal;
  bool complete = false;
  std::string final_feedback;
  for (int actions = 0; actions < max_turns && !complete; ++actions) {
    std::vector<ChatMessage> actor_msgs{{ChatRole::System, cast.prompts.action_maker}};
    for (const auto& turn : t.turns) {
      actor_msgs.push_back({turn.role == Role::Agent ? ChatRole::Assistant : ChatRole::User,
                            turn.content});
    }
    std::string action = text::first_line(cast.action_maker.chat(actor_msgs, DecodeParams::generation()));
    if (action.empty()) action = "look";
    t.push(Role::Agent, action);

    // The environment agent sees the dialogue from the other side.
    std::vector<ChatMessage> env_msgs{{ChatRole::System, env_system}};
    for (const auto& turn : t.turns) {
      env_msgs.push_back({turn.role == Role::Agent ? ChatRole::User : ChatRole::Assistant,
                          turn.content});
    }
    std::string feedback(text::trim(cast.environment_agent.chat(env_msgs, DecodeParams::generation())));
    if (is_completion(feedback)) {
      complete = true;
      final_feedback = feedback;
      break;
    }
    t.push(Role::Environment, feedback.empty() ? std::string(kNothingHappens) : feedback);
  }

  t.reward = complete ? 1.0 : 0.0;
  t.truncated = !complete;
  t.meta["env_kind"] = "household";
  t.meta["seed"] = std::to_string(seed);
  t.meta["max_turns"] = std::to_string(max_turns);
  t.meta["goal"] = goal;
  t.meta["origin"] = "roleplay";
  t.meta["feedback_source"] = "environment_agent";
  if (complete) t.meta["final_feedback"] = final_feedback;
  return t;
}

// ---------------------------------------------------------------------------

std::string format_exemplar(const Trajectory& t) {
  std::string s = "### Task: " + (t.task_id.empty() ? std::string("task") : t.task_id) + "\n";
  for (const auto& turn : t.turns) {
    if (turn.role == Role::System) continue;
    s += (turn.role == Role::Environment ? "Environment: " : "Agent: ") + turn.content + "\n";
  }
  s += fmt::format("Reward: {}\n", t.reward);
  return s;
}

std::optional<Trajectory> parse_exemplar(std::string_view input) {
  auto lines = text::split_lines(input);
  auto it = std::ranges::find_if(lines, [](const std::string& l) {
    return text::trim(l).starts_with("### Task:");
  });
  if (it == lines.end()) return std::nullopt;

  Trajectory t;
  t.task_id = std::string(text::trim(text::trim(*it).substr(9)));
  std::optional<double> reward;
  for (++it; it != lines.end(); ++it) {
    std::string_view l = text::trim(*it);
    if (l.starts_with("Reward:")) {
      try {
        std::size_t used = 0;
        const std::string num(text::trim(l.substr(7)));
        double r = std::stod(num, &used);
        if (used != num.size()) return std::nullopt;
        reward = r;
      } catch (const std::exception&) {
        return std::nullopt;
      }
      break;
    }
    if (l.starts_with("Environment:")) {
      t.push(Role::Environment, std::string(text::trim(l.substr(12))));
    } else if (l.starts_with("Agent:")) {
      t.push(Role::Agent, std::string(text::trim(l.substr(6))));
    } else if (l.starts_with("###")) {
      return std::nullopt;
    } else if (!t.turns.empty() && !l.empty()) {
      t.turns.back().content += "\n" + std::string(l);
    }
  }
  if (!reward || !std::isfinite(*reward)) return std::nullopt;
  t.reward = *reward;
  if (!validate_trajectory(t).ok()) return std::nullopt;
  return t;
}

ExemplarResult forge_exemplar(ModelBackend& backend, const std::vector<Trajectory>& exemplars,
                              EnvKind env_kind, int n, std::uint64_t seed) {
  if (n < 1) throw Error("n must be at least 1");
  if (exemplars.empty()) throw Error("at least one exemplar is required");
  for (const auto& e : exemplars) {
    if (!validate_trajectory(e).ok()) throw InvalidTrajectory(validate_trajectory(e));
    auto it = e.meta.find("env_kind");
    if (it != e.meta.end() && parse_env_kind(it->second) != env_kind)
      throw Error("exemplar " + e.task_id + " has a different env_kind");
  }

  ExemplarResult res;
  Rng rng(seed);
  std::vector<std::size_t> order(exemplars.size());
  for (int draw = 0; draw < n; ++draw) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(std::span(order));
    const auto shown = static_cast<std::size_t>(
        rng.between(1, static_cast<int>(std::min<std::size_t>(3, exemplars.size()))));
    std::string prompt = fmt::format("Here are example {} agent trajectories:\n\n", to_string(env_kind));
    for (std::size_t i = 0; i < shown; ++i) prompt += format_exemplar(exemplars[order[i]]) + "\n";
    prompt +=
        "Write one new trajectory for a different task in exactly the same format, starting "
        "with \"### Task:\" and ending with a \"Reward:\" line.";
    std::vector<ChatMessage> msgs{
        {ChatRole::System, "You write realistic agent interaction trajectories."},
        {ChatRole::User, prompt}};
    auto parsed = parse_exemplar(backend.chat(msgs, DecodeParams::generation()));
    if (!parsed || parsed->reward < 0.0 || parsed->reward > 1.0) {
      ++res.dropped;
      continue;
    }
    if (parsed->task_id.empty()) parsed->task_id = fmt::format("exemplar-{}-{}", seed, draw);
    parsed->meta["env_kind"] = std::string(to_string(env_kind));
    parsed->meta["origin"] = "exemplar";
    parsed->meta["feedback_source"] = "generated";
    res.trajectories.push_back(std::move(*parsed));
  }
  if (res.trajectories.empty()) throw AllOutputsUnparseable(res.dropped);
  return res;
}

// ---------------------------------------------------------------------------

std::string extract_action(std::string_view agent_turn) {
  auto lines = text::split_lines(agent_turn);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    auto l = text::trim(*it);
    if (l.starts_with("Action:")) return std::string(text::trim(l.substr(7)));
  }
  return std::string(text::trim(agent_turn));
}

namespace {

bool reports_failure(std::string_view feedback) {
  for (std::string_view p : {"nothing happens", "cannot", "can't", "not", "no such", "unable"})
    if (text::contains_phrase(feedback, p)) return true;
  return false;
}

const std::string* meta_get(const Trajectory& t, const char* key) {
  auto it = t.meta.find(key);
  return it == t.meta.end() ? nullptr : &it->second;
}

struct ReplayCheck {
  bool ran = false;
  bool failed = false;
  std::string note;
};

ReplayCheck replay_check(const Trajectory& t, EnvKind kind) {
  ReplayCheck rc;
  std::optional<EnvState> state;
  try {
    if (const auto* w = meta_get(t, "world")) {
      state = load_state(nlohmann::json::parse(*w));
    } else if (const auto* s = meta_get(t, "seed")) {
      state = make_state(kind, std::stoull(*s));
    }
  } catch (const std::exception& e) {
    rc.note = std::string("R4: world unavailable: ") + e.what();
    return rc;
  }
  if (!state) {
    rc.note = "R4: no seed or world to replay";
    return rc;
  }

  // Role-play goals come from the question generator, not the seed.
  if (kind == EnvKind::Household) {
    if (const auto* g = meta_get(t, "goal")) {
      auto& hs = std::get<HouseholdState>(*state);
      if (household::goal_text(hs.goal) != *g) {
        auto parsed = household::parse_goal(*g);
        if (!parsed) {
          rc.note = "R4: goal is outside the simulator grammar";
          return rc;
        }
        hs = household::from_layout(hs.receptacles, hs.openable, *parsed, hs.room);
      }
    }
  }
  rc.ran = true;

  const auto* fs = meta_get(t, "feedback_source");
  const bool exact = fs && *fs == "simulator";
  std::vector<std::string> seen;
  for (std::size_t i = 0; i < t.turns.size(); ++i) {
    const auto& turn = t.turns[i];
    if (turn.role == Role::Environment) {
      // The task statement names the goal item without showing it.
      std::string shown;
      for (const auto& line : text::split_lines(turn.content))
        if (!text::trim(line).starts_with("Your task is to:")) shown += line + "\n";
      seen.push_back(std::move(shown));
      continue;
    }
    if (turn.role != Role::Agent) continue;
    const std::string action = extract_action(turn.content);
    if (kind == EnvKind::Household) {
      if (auto item = household::taken_item(action)) {
        const bool observed = std::ranges::any_of(
            seen, [&](const std::string& o) { return text::contains_phrase(o, *item); });
        if (!observed) {
          rc.failed = true;
          return rc;
        }
      }
    }
    if (is_done(*state)) {
      rc.failed = true;
      return rc;
    }
    StepResult r = env_step(*state, action);
    if (i + 1 < t.turns.size() && t.turns[i + 1].role == Role::Environment) {
      const std::string& recorded = t.turns[i + 1].content;
      if (exact) {
        if (recorded != r.observation) {
          rc.failed = true;
          return rc;
        }
      } else if ((r.observation == kNothingHappens) != reports_failure(recorded)) {
        rc.failed = true;
        return rc;
      }
    }
  }
  if (std::abs(current_reward(*state) - t.reward) > 1e-9) rc.failed = true;
  return rc;
}

}  // namespace

FilterVerdict auto_filter(const Trajectory& t) {
  FilterVerdict v;
  auto fail = [&](const char* rule) {
    if (std::ranges::find(v.reasons, rule) == v.reasons.end()) v.reasons.emplace_back(rule);
  };

  if (!validate_trajectory(t).ok()) fail("R1");

  std::vector<std::string> actions;
  std::size_t body = 0;
  for (const auto& turn : t.turns) {
    if (turn.role == Role::System) continue;
    ++body;
    if (turn.role == Role::Agent) actions.push_back(extract_action(turn.content));
  }

  for (std::size_t i = 2; i < actions.size(); ++i) {
    const auto a = normalize_action(actions[i]);
    if (a == normalize_action(actions[i - 1]) && a == normalize_action(actions[i - 2])) {
      fail("R2");
      break;
    }
  }

  std::optional<EnvKind> kind;
  if (const auto* k = meta_get(t, "env_kind")) kind = parse_env_kind(*k);
  if (!kind) {
    v.needs_review = true;
    v.review_notes.push_back("R3: no simulator grammar for this env_kind");
    v.review_notes.push_back("R4: no simulator for this env_kind");
  } else {
    if (!std::ranges::all_of(actions, [&](const std::string& a) { return action_parses(*kind, a); }))
      fail("R3");
    if (std::ranges::find(v.reasons, "R1") == v.reasons.end()) {
      ReplayCheck rc = replay_check(t, *kind);
      if (!rc.ran) {
        v.needs_review = true;
        v.review_notes.push_back(rc.note);
      } else if (rc.failed) {
        fail("R4");
      }
    }
  }

  int max_turns = kind ? default_max_turns(*kind) : 20;
  if (const auto* m = meta_get(t, "max_turns")) {
    try {
      max_turns = std::stoi(*m);
    } catch (const std::exception&) {
    }
  }
  if (body < 2 || body > static_cast<std::size_t>(2 * max_turns)) fail("R5");

  v.keep = v.reasons.empty();
  return v;
}

Trajectory simulate_trajectory(const EnvState& initial, std::uint64_t seed,
                               const std::vector<std::string>& actions, int max_turns) {
  EnvState s = initial;
  const EnvKind kind = kind_of(s);
  Trajectory t;
  t.task_id = fmt::format("{}-{}", to_string(kind), seed);
  t.push(Role::Environment, initial_observation(s));
  for (const auto& a : actions) {
    if (is_done(s)) break;
    t.push(Role::Agent, a);
    t.push(Role::Environment, env_step(s, a).observation);
  }
  t.reward = current_reward(s);
  t.meta["env_kind"] = std::string(to_string(kind));
  t.meta["seed"] = std::to_string(seed);
  t.meta["max_turns"] = std::to_string(max_turns);
  t.meta["feedback_source"] = "simulator";
  if (dump_state(initial) != dump_state(make_state(kind, seed)))
    t.meta["world"] = dump_state(initial).dump();
  return t;
}

ReviewQueue::ReviewQueue(const std::filesystem::path& path) : out_(path) {
  if (!out_) throw Error("cannot open review queue " + path.string());
}

void ReviewQueue::push(const Trajectory& t, const FilterVerdict& v) {
  DatasetRecord r = to_record(t, DataSource::Agent);
  r.meta["review_notes"] = text::join(v.review_notes, "; ");
  const std::string line = to_jsonl_line(r);
  std::lock_guard lock(mu_);
  out_ << line << '\n';
  out_.flush();
  ++count_;
}

std::size_t ReviewQueue::size() const {
  std::lock_guard lock(mu_);
  return count_;
}

}  // namespace agentlab
