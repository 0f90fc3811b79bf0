#include "agentlab/envs.hpp"

#include <unordered_set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace agentlab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

EnvKind kind_of(const EnvState& s) {
  return std::visit(overloaded{[](const HouseholdState&) { return EnvKind::Household; },
                               [](const WebshopState&) { return EnvKind::Webshop; },
                               [](const OsTaskState&) { return EnvKind::OsTask; }},
                    s);
}

EnvState make_state(EnvKind kind, std::uint64_t seed) {
  switch (kind) {
    case EnvKind::Household: return household::generate(seed);
    case EnvKind::Webshop: return webshop::generate(seed);
    case EnvKind::OsTask: return ostask::generate(seed);
  }
  throw UnsupportedEnvKind(fmt::format("unsupported env kind {}", static_cast<int>(kind)));
}

ResetResult env_reset(const TaskSpec& spec) {
  EnvState s = make_state(spec.env_kind, spec.seed);
  std::string obs = initial_observation(s);
  return {std::move(s), std::move(obs)};
}

TaskSpec make_task(EnvKind kind, std::uint64_t seed) {
  TaskSpec spec;
  spec.env_kind = kind;
  spec.seed = seed;
  spec.goal_text = goal_text(make_state(kind, seed));
  spec.max_turns = default_max_turns(kind);
  return spec;
}

std::string initial_observation(const EnvState& s) {
  return std::visit(overloaded{[](const HouseholdState& h) { return household::reset_observation(h); },
                               [](const WebshopState& w) { return webshop::reset_observation(w); },
                               [](const OsTaskState& o) { return ostask::reset_observation(o); }},
                    s);
}

std::string goal_text(const EnvState& s) {
  return std::visit(overloaded{[](const HouseholdState& h) { return household::goal_text(h.goal); },
                               [](const WebshopState& w) { return webshop::goal_text(w); },
                               [](const OsTaskState& o) { return o.goal_check.description; }},
                    s);
}

StepResult env_step(EnvState& s, std::string_view action) {
  return std::visit(overloaded{[&](HouseholdState& h) { return household::step(h, action); },
                               [&](WebshopState& w) { return webshop::step(w, action); },
                               [&](OsTaskState& o) { return ostask::step(o, action); }},
                    s);
}

bool is_done(const EnvState& s) {
  return std::visit([](const auto& st) { return st.done; }, s);
}

double current_reward(const EnvState& s) {
  return std::visit([](const auto& st) { return st.done ? st.reward : 0.0; }, s);
}

bool action_parses(EnvKind kind, std::string_view action) {
  switch (kind) {
    case EnvKind::Household: return household::parses(action);
    case EnvKind::Webshop: return webshop::parses(action);
    case EnvKind::OsTask: return ostask::parses(action);
  }
  return false;
}

std::vector<std::string> candidate_actions(const EnvState& s) {
  return std::visit(overloaded{[](const HouseholdState& h) { return household::candidate_actions(h); },
                               [](const WebshopState& w) { return webshop::candidate_actions(w); },
                               [](const OsTaskState& o) { return ostask::candidate_actions(o); }},
                    s);
}

nlohmann::json dump_state(const EnvState& s) {
  nlohmann::json state =
      std::visit(overloaded{[](const HouseholdState& h) { return household::to_json(h); },
                            [](const WebshopState& w) { return webshop::to_json(w); },
                            [](const OsTaskState& o) { return ostask::to_json(o); }},
                 s);
  return {{"env_kind", std::string(to_string(kind_of(s)))}, {"state", std::move(state)}};
}

EnvState load_state(const nlohmann::json& j) {
  auto kind = parse_env_kind(j.at("env_kind").get<std::string>());
  if (!kind) throw UnsupportedEnvKind("unsupported env kind " + j.at("env_kind").dump());
  const auto& st = j.at("state");
  switch (*kind) {
    case EnvKind::Household: return household::from_json(st);
    case EnvKind::Webshop: return webshop::from_json(st);
    case EnvKind::OsTask: return ostask::from_json(st);
  }
  throw UnsupportedEnvKind("unsupported env kind");
}

std::string transition_key(const EnvState& s) {
  auto j = dump_state(s);
  auto& st = j["state"];
  st.erase("steps_taken");
  st.erase("transcript");
  return j.dump();
}

// ---------------------------------------------------------------------------

SearchBudgetExceeded::SearchBudgetExceeded(std::size_t cap)
    : Error(fmt::format("oracle search exceeded its node cap of {}", cap)) {}

OracleResult oracle_solve(const EnvState& initial, int max_depth, std::size_t node_cap) {
  if (max_depth < 0 || max_depth > kMaxOracleDepth)
    throw Error(fmt::format("oracle max_depth must be in [0, {}]", kMaxOracleDepth));

  struct Node {
    EnvState state;
    std::ptrdiff_t parent;
    std::string action;
  };
  std::vector<Node> nodes;
  nodes.push_back({initial, -1, {}});

  OracleResult result;
  result.best_reward = current_reward(initial);
  std::size_t best_node = 0;

  auto plan_to = [&](std::size_t idx) {
    std::vector<std::string> plan;
    for (auto i = static_cast<std::ptrdiff_t>(idx); nodes[i].parent >= 0; i = nodes[i].parent)
      plan.push_back(nodes[i].action);
    return std::vector<std::string>(plan.rbegin(), plan.rend());
  };

  if (is_done(initial) || result.best_reward >= 1.0) return result;

  std::unordered_set<std::string> seen{transition_key(initial)};
  std::vector<std::size_t> frontier{0};
  for (int depth = 1; depth <= max_depth && !frontier.empty(); ++depth) {
    std::vector<std::size_t> next;
    for (std::size_t idx : frontier) {
      for (const auto& action : candidate_actions(nodes[idx].state)) {
        EnvState child = nodes[idx].state;
        env_step(child, action);
        if (++result.nodes_expanded > node_cap) throw SearchBudgetExceeded(node_cap);
        if (!seen.insert(transition_key(child)).second) continue;
        const double r = current_reward(child);
        const bool done = is_done(child);
        nodes.push_back({std::move(child), static_cast<std::ptrdiff_t>(idx), action});
        if (r > result.best_reward) {
          result.best_reward = r;
          best_node = nodes.size() - 1;
          if (r >= 1.0) {
            result.best_plan = plan_to(best_node);
            return result;
          }
        }
        if (!done) next.push_back(nodes.size() - 1);
      }
    }
    frontier = std::move(next);
  }
  result.best_plan = plan_to(best_node);
  return result;
}

OracleResult oracle_solve(const TaskSpec& spec, int max_depth, std::size_t node_cap) {
  return oracle_solve(env_reset(spec).state, max_depth, node_cap);
}

}  // namespace agentlab
