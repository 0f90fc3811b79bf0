#include <set>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "agentlab/mixer.hpp"
#include "support.hpp"

using namespace agentlab;
using namespace agentlab::testing;

namespace {

struct Sources {
  std::filesystem::path dir, agent, general;
};

Sources make_sources(const std::string& name, std::size_t n_agent, std::size_t n_general) {
  Sources s;
  s.dir = scratch_dir(name);
  s.agent = s.dir / "agent.jsonl";
  s.general = s.dir / "general.jsonl";
  Rng rng(9);
  std::vector<DatasetRecord> a, g;
  for (std::size_t i = 0; i < n_agent; ++i) a.push_back(to_record(random_trajectory(rng, i), DataSource::Agent));
  for (std::size_t i = 0; i < n_general; ++i) {
    DatasetRecord r;
    r.task_id = "general-" + std::to_string(i);
    r.source = DataSource::General;
    r.messages = {{ChatRole::User, "q" + std::to_string(i)}, {ChatRole::Assistant, "a"}};
    g.push_back(r);
  }
  write_jsonl_file(s.agent.string(), a);
  write_jsonl_file(s.general.string(), g);
  return s;
}

MixConfig config(const Sources& s, double lambda, std::size_t n, std::uint64_t seed = 1) {
  MixConfig c;
  c.lambda = lambda;
  c.n_total = n;
  c.seed = seed;
  c.agent_path = s.agent;
  c.general_path = s.general;
  c.out_path = s.dir / "mix.jsonl";
  return c;
}

std::size_t count_source(const std::filesystem::path& p, DataSource src) {
  std::size_t n = 0;
  for (const auto& r : read_jsonl_file(p.string())) n += r.source == src ? 1 : 0;
  return n;
}

}  // namespace

TEST_SUITE("mixer") {
  TEST_CASE("agent share rounds half up") {
    CHECK(agent_count(0.0, 10) == 0);
    CHECK(agent_count(1.0, 10) == 10);
    CHECK(agent_count(0.2, 10000) == 2000);
    CHECK(agent_count(0.5, 5) == 3);
    CHECK(agent_count(0.25, 2) == 1);
    CHECK(agent_count(0.5, 10001) == 5001);
    CHECK(agent_count(0.3, 7) == 2);
  }

  TEST_CASE("exact counts in the output file") {
    auto s = make_sources("mix-exact", 40, 60);
    MixReport r = mix(config(s, 0.2, 5000));
    CHECK(r.n_agent == 1000);
    CHECK(r.n_general == 4000);
    CHECK(r.achieved_fraction == doctest::Approx(0.2));
    CHECK(count_source(r.out_path, DataSource::Agent) == 1000);
    CHECK(count_source(r.out_path, DataSource::General) == 4000);
  }

  TEST_CASE("lambda boundaries need only one source") {
    auto s = make_sources("mix-bounds", 5, 5);
    auto c = config(s, 1.0, 7);
    c.general_path = s.dir / "missing.jsonl";
    CHECK(mix(c).n_general == 0);
    CHECK(count_source(c.out_path, DataSource::Agent) == 7);
    c = config(s, 0.0, 7);
    c.agent_path = s.dir / "missing.jsonl";
    CHECK(mix(c).n_agent == 0);
  }

  TEST_CASE("identical configs give identical bytes") {
    auto s = make_sources("mix-digest", 30, 30);
    MixReport a = mix(config(s, 0.4, 50, 123));
    const std::string first = slurp(a.out_path);
    MixReport b = mix(config(s, 0.4, 50, 123));
    CHECK(a.digest == b.digest);
    CHECK(slurp(b.out_path) == first);
    CHECK(a.digest == sha256_hex(first));
    CHECK(mix(config(s, 0.4, 50, 124)).digest != a.digest);
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("sampling without replacement") {
    auto s = make_sources("mix-norepl", 10, 10);
    auto c = config(s, 0.5, 20);
    c.sampling = Sampling::WithoutReplacement;
    MixReport r = mix(c);
    auto records = read_jsonl_file(r.out_path.string());
    std::set<std::string> ids;
    for (const auto& rec : records) ids.insert(rec.task_id);
    CHECK(ids.size() == 20);

    c.n_total = 22;
    CHECK_THROWS_AS(mix(c), SourceTooSmall);
    c.sampling = Sampling::WithReplacement;
    CHECK(mix(c).n_agent == 11);
  }

  TEST_CASE("invalid parameters") {
    auto s = make_sources("mix-invalid", 3, 3);
    CHECK_THROWS_AS(mix(config(s, 1.5, 10)), Error);
    CHECK_THROWS_AS(mix(config(s, -0.1, 10)), Error);
    CHECK_THROWS_AS(mix(config(s, 0.5, 0)), Error);
    auto empty = make_sources("mix-empty", 0, 3);
    CHECK_THROWS_AS(mix(config(empty, 0.5, 4)), SourceTooSmall);
  }

  TEST_CASE("malformed source lines report their line number") {
    auto s = make_sources("mix-bad", 3, 3);
    spit(s.agent, slurp(s.agent) + "\n{\"task_id\": 1}\n");
    try {
      mix(config(s, 0.5, 4));
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 5);
    }
  }

  TEST_CASE("sweeps write one file per lambda") {
    auto s = make_sources("mix-sweep", 10, 10);
    auto reports = sweep(config(s, 0.0, 10), {0.0, 0.2, 0.5, 0.2});
    REQUIRE(reports.size() == 4);
    CHECK(reports[0].out_path.filename() == "mix-l0.jsonl");
    CHECK(reports[1].out_path.filename() == "mix-l0.2.jsonl");
    CHECK(reports[2].out_path.filename() == "mix-l0.5.jsonl");
    CHECK(reports[3].out_path.filename() == "mix-l0.2-3.jsonl");
    CHECK(reports[2].n_agent == 5);
    for (const auto& r : reports) CHECK(std::filesystem::exists(r.out_path));
    CHECK(sweep(config(s, 0.0, 10), {}).empty());
    CHECK_THROWS(sweep(config(s, 0.0, 10), {0.1, 2.0}));
  }

  TEST_CASE("reports serialize as JSON") {
    auto s = make_sources("mix-report", 4, 4);
    auto j = nlohmann::json::parse(mix(config(s, 0.5, 4)).to_json());
    CHECK(j["n_agent"] == 2);
    CHECK(j["digest"].get<std::string>().size() == 64);
  }
}
