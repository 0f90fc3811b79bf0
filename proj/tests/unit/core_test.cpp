#include <sstream>

#include <doctest.h>

#include "agentlab/core.hpp"
#include "agentlab/text.hpp"
#include "support.hpp"

using namespace agentlab;

namespace {

Trajectory small() {
  Trajectory t;
  t.task_id = "t1";
  t.push(Role::Environment, "You are in the middle of a room.");
  t.push(Role::Agent, "look");
  t.push(Role::Environment, "Nothing happens.");
  t.reward = 0.5;
  return t;
}

bool has(const ValidationReport& r, std::string_view msg) {
  for (const auto& v : r.violations)
    if (v == msg) return true;
  return false;
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("validation accepts alternating turns with an optional system turn") {
    Trajectory t;
    t.push(Role::System, "sys");
    t.push(Role::Environment, "obs");
    t.push(Role::Agent, "act");
    CHECK(validate_trajectory(t).ok());
    CHECK(validate_trajectory(small()).ok());
  }

  TEST_CASE("validation reports every broken invariant") {
    Trajectory t = small();
    t.reward = 1.5;
    CHECK(has(validate_trajectory(t), "reward out of [0,1]"));

    CHECK(has(validate_trajectory(Trajectory{}), "no turns"));

    t = small();
    t.turns[1].role = Role::Environment;
    CHECK(has(validate_trajectory(t), "alternation break at index 1"));

    t = small();
    t.push(Role::System, "late");
    CHECK(has(validate_trajectory(t), "system turn at index 3"));

    t = small();
    t.turns[1].content.clear();
    CHECK(has(validate_trajectory(t), "empty content at index 1"));

    t = small();
    t.turns[2].index = 7;
    CHECK(has(validate_trajectory(t), "bad index at position 2 (found 7)"));

    t = small();
    t.meta["truncated"] = "true";
    CHECK(has(validate_trajectory(t), "reserved meta key 'truncated'"));

    t = small();
    t.turns.front().role = Role::Agent;
    CHECK_FALSE(validate_trajectory(t).ok());
  }

  TEST_CASE("NaN reward is rejected") {
    Trajectory t = small();
    t.reward = std::numeric_limits<double>::quiet_NaN();
    CHECK(has(validate_trajectory(t), "reward out of [0,1]"));
  }

  TEST_CASE("record conversion maps roles and carries the truncated flag") {
    Trajectory t = small();
    t.truncated = true;
    t.meta["seed"] = "4";
    DatasetRecord r = to_record(t, DataSource::Agent);
    REQUIRE(r.messages.size() == 3);
    CHECK(r.messages[0].role == ChatRole::User);
    CHECK(r.messages[1].role == ChatRole::Assistant);
    CHECK(r.meta.at("truncated") == "true");
    CHECK(from_record(r) == t);
  }

  TEST_CASE("invalid trajectories cannot become records") {
    Trajectory t = small();
    t.turns[1].role = Role::Environment;
    CHECK_THROWS_AS(to_record(t, DataSource::Agent), InvalidTrajectory);
  }

  TEST_CASE("a general record opening with an assistant message is not a trajectory") {
    DatasetRecord r;
    r.task_id = "g";
    r.source = DataSource::General;
    r.messages = {{ChatRole::Assistant, "hello"}, {ChatRole::User, "hi"}};
    CHECK_THROWS_AS(from_record(r), InvalidTrajectory);
  }

  TEST_CASE("JSONL lines keep schema key order") {
    DatasetRecord r = to_record(small(), DataSource::General);
    const std::string line = to_jsonl_line(r);
    CHECK(line.find("\"task_id\"") < line.find("\"messages\""));
    CHECK(line.find("\"messages\"") < line.find("\"reward\""));
    CHECK(line.find("\"reward\"") < line.find("\"source\""));
    CHECK(line.find("\"source\"") < line.find("\"meta\""));
    CHECK(line.find("\"general\"") != std::string::npos);
    CHECK(line.find('\n') == std::string::npos);
    CHECK(parse_jsonl_line(line) == r);
  }

  TEST_CASE("parse errors carry the 1-based line number") {
    const std::string good = to_jsonl_line(to_record(small(), DataSource::Agent));
    std::istringstream in(good + "\n\n{not json}\n");
    try {
      read_jsonl(in);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }

  TEST_CASE("unknown or missing keys are rejected") {
    CHECK_THROWS_AS(parse_jsonl_line(R"({"task_id":"x","messages":[],"reward":0,"source":"agent","meta":{},"extra":1})"),
                    ParseError);
    CHECK_THROWS_AS(parse_jsonl_line(R"({"task_id":"x","messages":[],"reward":0,"meta":{}})"),
                    ParseError);
    CHECK_THROWS_AS(parse_jsonl_line(R"({"task_id":"x","messages":[{"role":"robot","content":"a"}],"reward":0,"source":"agent","meta":{}})"),
                    ParseError);
  }

  TEST_CASE("random trajectories survive both conversions") {
    Rng rng(99);
    for (std::size_t i = 0; i < 300; ++i) {
      Trajectory t = testing::random_trajectory(rng, i);
      REQUIRE(validate_trajectory(t).ok());
      DatasetRecord r = to_record(t, i % 2 ? DataSource::Agent : DataSource::General);
      CHECK(parse_jsonl_line(to_jsonl_line(r)) == r);
      CHECK(from_record(r) == t);
    }
  }
}

TEST_SUITE("text") {
  TEST_CASE("numbered lists") {
    auto items = text::parse_numbered_list("Plan:\n1. find soap\n2) take it\nnoise\n3. put it");
    REQUIRE(items.size() == 3);
    CHECK(items[1] == "take it");
    CHECK(text::parse_numbered_list("no list here").empty());
  }

  TEST_CASE("phrase search is word bounded and case-insensitive") {
    CHECK(text::contains_phrase("On the sink, you see a Soap Bottle.", "soap bottle"));
    CHECK_FALSE(text::contains_phrase("soapbottle", "soap bottle"));
    CHECK_FALSE(text::contains_phrase("a cabinetry", "cabinet"));
  }

  TEST_CASE("punctuation stripping") {
    CHECK(text::strip_punct("  yes. ") == "yes");
    CHECK(text::strip_punct("\"No!\"") == "No");
  }
}
