#include <cmath>
#include <fstream>
#include <sstream>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "agentlab/bench.hpp"
#include "agentlab/trace.hpp"
#include "scenarios.hpp"
#include "support.hpp"

using namespace agentlab;
using namespace agentlab::testing;
using nlohmann::json;

namespace {

void write_script_file(const std::filesystem::path& p, const std::vector<ScriptEntry>& entries) {
  std::ofstream out(p, std::ios::binary);
  write_script(out, entries);
}

std::vector<ScriptEntry> plan_script(const std::vector<std::string>& plan) {
  std::vector<ScriptEntry> s;
  for (const auto& a : plan) s.push_back({MatchRule::any(), a});
  return s;
}

/// Household seeds 1 and 2: seed 1 follows the oracle plan, seed 2 only looks.
/// Backend "short" has a one-line script for every seed.
json matrix_config(const std::filesystem::path& dir) {
  write_script_file(dir / "good-1.jsonl", plan_script(household_plan(1)));
  write_script_file(dir / "good-2.jsonl", always("look"));
  for (int s : {1, 2}) write_script_file(dir / ("short-" + std::to_string(s) + ".jsonl"), always("look", 1));
  return json{{"backends",
               {{"good", {{"type", "scripted"}, {"script", "good-{seed}.jsonl"}}},
                {"short", {{"actor", {{"type", "scripted"}, {"script", "short-{seed}.jsonl"}}}}}}},
              {"envs", {{{"env_kind", "household"}, {"seeds", {1, 2}}}}},
              {"methods", {"io"}},
              {"episodes_per_cell", 2},
              {"out_dir", "out"}};
}

CellResult cell(std::string b, std::string e, std::string m, std::vector<double> rewards) {
  CellResult c;
  c.backend = std::move(b);
  c.env = std::move(e);
  c.method = std::move(m);
  c.rewards = std::move(rewards);
  for (std::size_t i = 0; i < c.rewards.size(); ++i) c.seeds.push_back(i);
  c.errors.resize(c.rewards.size());
  std::vector<double> scaled;
  for (double r : c.rewards) scaled.push_back(r * 100.0);
  c.average = aggregate(scaled);
  return c;
}

BenchReport small_report() {
  BenchReport r;
  r.backends = {"m1"};
  r.envs = {"household", "webshop"};
  r.methods = {"io", "react"};
  r.cells = {cell("m1", "household", "io", {1.0, 0.0}), cell("m1", "webshop", "io", {0.5, 0.25}),
             cell("m1", "household", "react", {1.0, 1.0}), cell("m1", "webshop", "react", {0.0, 0.0})};
  r.cells[1].format_error_rate = 0.25;
  return r;
}

}  // namespace

TEST_SUITE("bench") {
  TEST_CASE("aggregate: two-decimal half-up mean") {
    CHECK(aggregate({48.5}) == 48.50);
    CHECK(aggregate({33.875}) == 33.88);
    CHECK(aggregate({34.075}) == 34.08);
    CHECK(aggregate({0.0, 0.0}) == 0.00);
    CHECK(aggregate({10.0, 20.0, 30.0, 40.0, 69.4}) == 33.88);
    CHECK(aggregate({100.0, 0.0, 0.0}) == 33.33);
    CHECK_THROWS_AS(aggregate({}), EmptyScores);
  }

  TEST_CASE("aggregate stays within half a cent of the mean") {
    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
      std::vector<double> v(rng.between(1, 10));
      double sum = 0;
      for (auto& x : v) sum += (x = static_cast<double>(rng.below(10001)) / 100.0);
      const double mean = sum / static_cast<double>(v.size());
      const double a = aggregate(v);
      CHECK(a >= mean - 0.005 - 1e-9);
      CHECK(a <= mean + 0.005 + 1e-9);
      CHECK(a * 100.0 == doctest::Approx(std::round(a * 100.0)));
    }
  }

  TEST_CASE("matrix cells, averages and trace files") {
    auto dir = scratch_dir("bench-matrix");
    BenchConfig cfg = parse_bench_config(matrix_config(dir), dir);
    CHECK(cfg.out_dir == dir / "out");
    BenchReport rep = run_matrix(cfg);
    REQUIRE(rep.cells.size() == 2);

    const CellResult* good = rep.find("good", "household", "io");
    REQUIRE(good);
    CHECK(good->rewards == std::vector<double>{1.0, 0.0});
    CHECK(good->average == 50.0);
    CHECK(good->errors == std::vector<std::string>{"", ""});

    // Exhausted scripts fail their own cell only.
    const CellResult* bad = rep.find("short", "household", "io");
    REQUIRE(bad);
    CHECK(bad->rewards == std::vector<double>{0.0, 0.0});
    CHECK(bad->errors[0].starts_with("backend"));
    CHECK(bad->average == 0.0);

    for (const char* b : {"good", "short"})
      for (int s : {1, 2}) {
        auto p = cfg.out_dir / "traces" / trace_file_name(b, "household", "io", s);
        REQUIRE(std::filesystem::exists(p));
        std::ifstream in(p);
        CHECK(replay_trace(in).ok());
      }
  }

  TEST_CASE("episodes_per_cell takes a seed prefix") {
    auto dir = scratch_dir("bench-prefix");
    json j = matrix_config(dir);
    j["episodes_per_cell"] = 1;
    BenchReport rep = run_matrix(parse_bench_config(j, dir));
    CHECK(rep.find("good", "household", "io")->seeds == std::vector<std::uint64_t>{1});
    CHECK(rep.find("good", "household", "io")->average == 100.0);
    j["episodes_per_cell"] = 3;
    CHECK_THROWS_AS(parse_bench_config(j, dir), ConfigError);
  }

  TEST_CASE("config errors") {
    auto dir = scratch_dir("bench-config");
    json base = matrix_config(dir);
    auto rejects = [&](auto edit) {
      json j = base;
      edit(j);
      CHECK_THROWS_AS(parse_bench_config(j, dir), ConfigError);
    };
    rejects([](json& j) { j.erase("backends"); });
    rejects([](json& j) { j["methods"] = {"telepathy"}; });
    rejects([](json& j) { j["methods"] = {"io", "io"}; });
    rejects([](json& j) { j["envs"][0]["env_kind"] = "moon"; });
    rejects([](json& j) { j["envs"][0]["seeds"] = {1, 1}; });
    rejects([](json& j) { j["backends"]["good"]["script"] = "missing-{seed}.jsonl"; });
    rejects([](json& j) { j["methods"] = {{{"method", "ours"}, {"num_path", 0}}}; });
    rejects([](json& j) { j["parallelism"] = 0; });
    CHECK_THROWS_AS(load_bench_config(dir / "nope.json"), ConfigError);
    spit(dir / "broken.json", "{not json");
    CHECK_THROWS_AS(load_bench_config(dir / "broken.json"), ConfigError);
  }

  TEST_CASE("method entries") {
    CHECK(parse_method_config("react").label() == "react");
    MethodConfig ours = parse_method_config(json{{"method", "ours"}, {"num_path", 3}, {"num_branch", 2}});
    CHECK(ours.label() == "ours-p3-b2");
    CHECK(parse_method_config(method_config_json(ours)).label() == ours.label());
  }

  TEST_CASE("markdown rendering has row averages and footnotes") {
    const std::string md = render(small_report(), RenderFormat::Markdown);
    CHECK(md.starts_with("| Backend | Method | household | webshop | Avg. |\n"));
    CHECK(md.find("| m1 | io | 50.00[^1] | 37.50[^2] | 43.75 |") != std::string::npos);
    CHECK(md.find("| m1 | react | 100.00[^3] | 0.00[^4] | 50.00 |") != std::string::npos);
    CHECK(md.find("[^2]: m1 / io / webshop: format_error_rate=0.25") != std::string::npos);
  }

  TEST_CASE("CSV rendering parses back to the same numbers") {
    const BenchReport r = small_report();
    std::istringstream csv(render(r, RenderFormat::Csv));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "backend,method,household,webshop,Avg.");
    std::getline(csv, line);
    CHECK(line == "m1,io,50.00,37.50,43.75");
    std::getline(csv, line);
    CHECK(line == "m1,react,100.00,0.00,50.00");
  }

  TEST_CASE("reports round-trip through JSON and recompute averages") {
    BenchReport r = small_report();
    auto j = json::parse(r.to_json().dump());
    j["cells"][0]["average"] = 99.0;
    BenchReport back = BenchReport::from_json(j);
    CHECK(back.find("m1", "household", "io")->average == 50.0);
    CHECK(render(back, RenderFormat::Csv) == render(r, RenderFormat::Csv));
    j["cells"][0]["loop_abort_rate"] = 1.5;
    CHECK_THROWS_AS(BenchReport::from_json(j), ConfigError);
    j["cells"][0]["loop_abort_rate"] = 0.0;
    j["cells"][0]["rewards"] = json::array();
    CHECK_THROWS_AS(BenchReport::from_json(j), EmptyScores);
  }

  TEST_CASE("write_report emits three files") {
    auto dir = scratch_dir("bench-write");
    write_report(small_report(), dir);
    for (const char* f : {"report.json", "report.md", "report.csv"}) CHECK(std::filesystem::exists(dir / f));
    CHECK(BenchReport::from_json(json::parse(slurp(dir / "report.json"))).cells.size() == 4);
  }
}
