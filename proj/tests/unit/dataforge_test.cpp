#include <algorithm>

#include <doctest.h>

#include "agentlab/dataforge.hpp"
#include "support.hpp"

using namespace agentlab;
using namespace agentlab::testing;

namespace {

Trajectory oracle_trajectory(std::uint64_t seed) {
  const EnvState s = make_state(EnvKind::Household, seed);
  return simulate_trajectory(s, seed, oracle_solve(s, 6).best_plan, 20);
}

std::vector<std::string> reasons(const Trajectory& t) { return auto_filter(t).reasons; }
using Rules = std::vector<std::string>;

Trajectory os_example() {
  Trajectory t;
  t.task_id = "os-demo";
  t.push(Role::Environment, "Create the directory /home/user/backup.");
  t.push(Role::Agent, "mkdir /home/user/backup");
  t.push(Role::Environment, "(no output)");
  t.push(Role::Agent, "done");
  t.push(Role::Environment, "Task submitted.");
  t.reward = 1.0;
  t.meta["env_kind"] = "os";
  return t;
}

}  // namespace

TEST_SUITE("dataforge") {
  TEST_CASE("role-play reproduces the soap-bottle flow") {
    auto qg = ScriptedBackend::from_responses({"put a soap bottle in the toilet"});
    auto actor = ScriptedBackend::from_responses(
        {"look around and find a soap bottle", "take up the soap bottle and go to the toilet",
         "put the soap bottle in the toilet"});
    auto env = ScriptedBackend::from_responses(
        {"On the sink, you see a soap bottle.", "You pick up the soap bottle and reach the toilet.",
         "TASK COMPLETE: the soap bottle is in the toilet."});
    Trajectory t = forge_roleplay({qg, actor, env}, 5, 10);
    CHECK(t.turns.size() == 6);
    CHECK(t.reward == 1.0);
    CHECK_FALSE(t.truncated);
    CHECK(validate_trajectory(t).ok());
    CHECK(t.turns.front().content.ends_with("Your task is to: put a soap bottle in the toilet."));
    CHECK(t.turns.back().role == Role::Agent);
    CHECK(t.meta.at("final_feedback").starts_with("TASK COMPLETE"));
  }

  TEST_CASE("immediate completion gives two turns") {
    auto qg = ScriptedBackend::from_responses({"put a towel in the drawer"});
    auto actor = ScriptedBackend::from_responses({"put towel in drawer"});
    auto env = ScriptedBackend::from_responses({"TASK COMPLETE"});
    Trajectory t = forge_roleplay({qg, actor, env}, 1, 5);
    CHECK(t.turns.size() == 2);
    CHECK(t.reward == 1.0);
  }

  TEST_CASE("never completing truncates at max_turns") {
    auto qg = ScriptedBackend::from_responses({"put a towel in the drawer"});
    auto actor = ScriptedBackend::from_responses(std::vector<std::string>(4, "look"));
    auto env = ScriptedBackend::from_responses(std::vector<std::string>(4, "Nothing changes."));
    Trajectory t = forge_roleplay({qg, actor, env}, 1, 4);
    CHECK(t.truncated);
    CHECK(t.reward == 0.0);
    CHECK(t.agent_turns().size() == 4);
    CHECK(validate_trajectory(t).ok());
  }

  TEST_CASE("empty goals are retried twice, then fail") {
    auto qg = ScriptedBackend::from_responses({"", "  ", "\n"});
    auto other = ScriptedBackend::from_responses({});
    CHECK_THROWS_AS(forge_roleplay({qg, other, other}, 1, 4), GoalGenerationFailure);
    CHECK(qg.calls() == 3);
    CHECK_THROWS_AS(forge_roleplay({qg, other, other}, 1, 1), Error);
  }

  TEST_CASE("role-play is deterministic per seed") {
    auto run = [] {
      auto qg = ScriptedBackend::from_responses({"put a towel in the drawer"});
      auto actor = ScriptedBackend::from_responses({"go to drawer", "look"});
      auto env = ScriptedBackend::from_responses({"You arrive at the drawer.", "TASK COMPLETE"});
      return forge_roleplay({qg, actor, env}, 77, 6);
    };
    CHECK(run() == run());
  }

  TEST_CASE("exemplar text round-trips") {
    Trajectory t = os_example();
    t.turns[2].content = "line one\nline two";
    auto back = parse_exemplar("Sure, here it is:\n" + format_exemplar(t));
    REQUIRE(back);
    CHECK(back->turns == t.turns);
    CHECK(back->reward == 1.0);
    CHECK_FALSE(parse_exemplar("Environment: x\nAgent: y\nReward: 1"));
    CHECK_FALSE(parse_exemplar("### Task: a\nEnvironment: x\nAgent: y\n"));
    CHECK_FALSE(parse_exemplar("### Task: a\nAgent: y\nReward: 1"));
  }

  TEST_CASE("exemplar forging counts parsed and dropped outputs") {
    const std::string good = format_exemplar(os_example());
    auto echo = ScriptedBackend::from_responses({good});
    ExemplarResult one = forge_exemplar(echo, {os_example()}, EnvKind::OsTask, 1);
    REQUIRE(one.trajectories.size() == 1);
    CHECK(one.trajectories[0].turns == os_example().turns);
    CHECK(one.trajectories[0].meta.at("env_kind") == "os");

    auto prose = ScriptedBackend::from_responses({"I cannot.", "No.", "Hmm."});
    try {
      forge_exemplar(prose, {os_example()}, EnvKind::OsTask, 3);
      FAIL("expected AllOutputsUnparseable");
    } catch (const AllOutputsUnparseable& e) {
      CHECK(e.dropped() == 3);
    }

    auto mixed = ScriptedBackend::from_responses({good, "nope", good, "Reward: 1", good});
    ExemplarResult r = forge_exemplar(mixed, {os_example()}, EnvKind::OsTask, 5);
    CHECK(r.trajectories.size() == 3);
    CHECK(r.dropped == 2);
  }

  TEST_CASE("exemplar prompts show between one and three examples") {
    std::vector<Trajectory> shots(5, os_example());
    for (std::size_t i = 0; i < shots.size(); ++i) shots[i].task_id = "shot-" + std::to_string(i);
    auto b = ScriptedBackend::from_responses(std::vector<std::string>(20, format_exemplar(os_example())));
    forge_exemplar(b, shots, EnvKind::OsTask, 20, 3);
    CHECK(b.calls() == 20);
    Trajectory web = os_example();
    web.meta["env_kind"] = "webshop";
    CHECK_THROWS(forge_exemplar(b, {web}, EnvKind::OsTask, 1));
  }

  TEST_CASE("oracle trajectories always pass the filter") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Trajectory t = oracle_trajectory(seed);
      FilterVerdict v = auto_filter(t);
      CHECK_MESSAGE(v.keep, "seed ", seed);
      CHECK(v.reasons.empty());
      CHECK_FALSE(v.needs_review);
    }
  }

  TEST_CASE("R2: three identical consecutive actions") {
    const EnvState s = make_state(EnvKind::Household, 2);
    CHECK(reasons(simulate_trajectory(s, 2, {"look", "look", "look"}, 20)) == Rules{"R2"});
    CHECK(reasons(simulate_trajectory(s, 2, {"look", "look"}, 20)).empty());
  }

  TEST_CASE("R3: an action outside the grammar") {
    const EnvState s = make_state(EnvKind::Household, 2);
    CHECK(reasons(simulate_trajectory(s, 2, {"look", "dance wildly"}, 20)) == Rules{"R3"});
  }

  TEST_CASE("R4: taking an item never observed") {
    const auto hs = std::get<HouseholdState>(make_state(EnvKind::Household, 2));
    Trajectory t;
    t.push(Role::Environment, household::reset_observation(hs));
    t.push(Role::Agent, "take " + hs.goal.item);
    t.push(Role::Environment, "You pick up the " + hs.goal.item + ".");
    t.meta = {{"env_kind", "household"}, {"seed", "2"}, {"feedback_source", "environment_agent"}};
    CHECK(reasons(t) == Rules{"R4"});
  }

  TEST_CASE("R4: recorded reward disagrees with the replay") {
    Trajectory t = oracle_trajectory(4);
    t.reward = 0.0;
    CHECK(reasons(t) == Rules{"R4"});
    t = oracle_trajectory(4);
    t.turns[2].content = "You see something else entirely.";
    CHECK(reasons(t) == Rules{"R4"});
  }

  TEST_CASE("R4 accepts consistent role-play feedback") {
    const auto hs = std::get<HouseholdState>(make_state(EnvKind::Household, 3));
    const auto plan = oracle_solve(EnvState(hs), 6).best_plan;
    Trajectory t = simulate_trajectory(EnvState(hs), 3, plan, 20);
    t.meta["feedback_source"] = "environment_agent";
    for (auto& turn : t.turns)
      if (turn.role == Role::Environment && turn.index > 0) turn.content = "Alright. " + turn.content;
    CHECK(auto_filter(t).keep);
  }

  TEST_CASE("R5: too short or too long") {
    const EnvState s = make_state(EnvKind::Household, 2);
    CHECK(reasons(simulate_trajectory(s, 2, {}, 20)) == Rules{"R5"});
    auto acts = candidate_actions(s);
    std::vector<std::string> walk;
    for (const auto& a : acts)
      if (a.starts_with("go to") && walk.size() < 3) walk.push_back(a);
    CHECK(reasons(simulate_trajectory(s, 2, walk, 1)) == Rules{"R5"});
  }

  TEST_CASE("R1 and soft failures") {
    Trajectory bad = oracle_trajectory(1);
    bad.turns[1].role = Role::Environment;
    auto r = reasons(bad);
    CHECK(std::ranges::find(r, "R1") != r.end());

    Trajectory unknown = os_example();
    unknown.meta["env_kind"] = "database";
    FilterVerdict v = auto_filter(unknown);
    CHECK(v.keep);
    CHECK(v.needs_review);

    Trajectory no_seed = os_example();
    v = auto_filter(no_seed);
    CHECK(v.keep);
    CHECK(v.needs_review);
  }

  TEST_CASE("extracting actions from ReAct turns") {
    CHECK(extract_action("Thought: hmm\nAction: look") == "look");
    CHECK(extract_action("  go to sink ") == "go to sink");
  }

  TEST_CASE("the review queue appends JSONL") {
    auto dir = scratch_dir("review");
    {
      ReviewQueue q(dir / "review.jsonl");
      FilterVerdict v;
      v.needs_review = true;
      v.review_notes = {"R4: no seed"};
      q.push(os_example(), v);
      q.push(os_example(), v);
      CHECK(q.size() == 2);
    }
    auto records = read_jsonl_file((dir / "review.jsonl").string());
    REQUIRE(records.size() == 2);
    CHECK(records[0].meta.at("review_notes") == "R4: no seed");
  }
}
