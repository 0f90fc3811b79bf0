// Command-line front end: data forging, mixing, benchmarking and replay.
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "agentlab/backend.hpp"
#include "agentlab/bench.hpp"
#include "agentlab/dataforge.hpp"
#include "agentlab/envs.hpp"
#include "agentlab/mixer.hpp"
#include "agentlab/trace.hpp"

namespace fs = std::filesystem;
using namespace agentlab;

namespace {

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(p.string() + ": " + e.what());
  }
}

fs::path dir_of(const fs::path& p) { return p.parent_path().empty() ? "." : p.parent_path(); }

EnvKind env_arg(const std::string& s) {
  auto k = parse_env_kind(s);
  if (!k) throw Error("unknown env '" + s + "'");
  return *k;
}

struct ForgeSink {
  std::ofstream out;
  ReviewQueue review;
  std::size_t kept = 0, rejected = 0;
  std::map<std::string, std::size_t> by_rule;

  ForgeSink(const fs::path& out_path, const fs::path& review_path)
      : out(out_path, std::ios::binary), review(review_path) {
    if (!out) throw Error("cannot write " + out_path.string());
  }

  void offer(const Trajectory& t) {
    FilterVerdict v = auto_filter(t);
    if (!v.keep) {
      ++rejected;
      for (const auto& r : v.reasons) ++by_rule[r];
    } else if (v.needs_review) {
      review.push(t, v);
    } else {
      out << to_jsonl_line(to_record(t, DataSource::Agent)) << '\n';
      ++kept;
    }
  }

  std::string summary() const {
    nlohmann::ordered_json j{{"kept", kept}, {"needs_review", review.size()},
                             {"rejected", rejected}, {"rejected_by_rule", by_rule}};
    return j.dump();
  }
};

fs::path default_review(const fs::path& out) {
  return dir_of(out) / (out.stem().string() + ".review.jsonl");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Agent data generation, tree-search reasoning and benchmarking toolkit"};
  app.require_subcommand(1);

  // forge
  auto* forge = app.add_subcommand("forge", "Generate agent trajectories");
  forge->require_subcommand(1);

  auto* roleplay = forge->add_subcommand("roleplay", "Three-role self-play on household rooms");
  int rp_n = 1, rp_max_turns = 20;
  std::uint64_t rp_seed_base = 0;
  std::string rp_out, rp_review, rp_cast;
  roleplay->add_option("--n", rp_n, "Number of trajectories")->check(CLI::PositiveNumber);
  roleplay->add_option("--seed-base", rp_seed_base, "First room seed");
  roleplay->add_option("--max-turns", rp_max_turns, "Agent actions per trajectory")
      ->check(CLI::Range(2, 1000));
  roleplay->add_option("--out", rp_out, "Kept trajectories (JSONL)")->required();
  roleplay->add_option("--review", rp_review, "Review queue (JSONL)");
  roleplay->add_option("--cast", rp_cast, "Role backend config (JSON)")->required();

  auto* exemplar = forge->add_subcommand("exemplar", "Imitate exemplar trajectories");
  int ex_n = 1;
  std::uint64_t ex_seed = 0;
  std::string ex_in, ex_env, ex_out, ex_review, ex_backend;
  exemplar->add_option("--exemplars", ex_in, "Exemplar records (JSONL)")->required();
  exemplar->add_option("--n", ex_n, "Number of draws")->check(CLI::PositiveNumber);
  exemplar->add_option("--env", ex_env, "household | webshop | os")->required();
  exemplar->add_option("--out", ex_out, "Kept trajectories (JSONL)")->required();
  exemplar->add_option("--review", ex_review, "Review queue (JSONL)");
  exemplar->add_option("--backend", ex_backend, "Generator backend config (JSON)")->required();
  exemplar->add_option("--seed", ex_seed, "Exemplar sampling seed");

  // mix / sweep
  MixConfig mc;
  std::string mix_agent, mix_general, mix_out;
  bool replacement = false;
  auto add_mix_opts = [&](CLI::App* c) {
    c->add_option("--agent", mix_agent, "Agent records (JSONL)")->required();
    c->add_option("--general", mix_general, "General records (JSONL)")->required();
    c->add_option("--n", mc.n_total, "Output record count")->required()->check(CLI::PositiveNumber);
    c->add_option("--seed", mc.seed, "Sampling seed");
    c->add_flag("--replacement", replacement, "Sample with replacement");
    c->add_option("--out", mix_out, "Output file")->required();
  };
  auto* mix_cmd = app.add_subcommand("mix", "Blend agent and general data at ratio lambda");
  add_mix_opts(mix_cmd);
  mix_cmd->add_option("--lambda", mc.lambda, "Agent fraction")->check(CLI::Range(0.0, 1.0));
  auto* sweep_cmd = app.add_subcommand("sweep", "One mix per lambda");
  add_mix_opts(sweep_cmd);
  std::vector<double> lambdas;
  sweep_cmd->add_option("--lambdas", lambdas, "Comma-separated lambdas")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0));

  // bench / replay
  auto* bench = app.add_subcommand("bench", "Run a benchmark matrix");
  std::string bench_cfg, bench_out;
  bench->add_option("--config", bench_cfg, "bench.json")->required();
  bench->add_option("--out-dir", bench_out, "Override out_dir");

  auto* replay = app.add_subcommand("replay", "Re-execute trace files against the simulators");
  std::vector<std::string> traces;
  replay->add_option("--trace", traces, "Trace file(s)")->required();

  // env / oracle
  auto* env_cmd = app.add_subcommand("env", "Dump a seeded world");
  std::string env_name;
  std::uint64_t env_seed = 0;
  env_cmd->add_option("--env", env_name, "household | webshop | os")->required();
  env_cmd->add_option("--seed", env_seed, "World seed")->required();

  auto* oracle = app.add_subcommand("oracle", "Brute-force the best plan for a seeded task");
  std::string or_env, or_script;
  std::uint64_t or_seed = 0;
  int or_depth = 6;
  oracle->add_option("--env", or_env, "household | webshop | os")->required();
  oracle->add_option("--seed", or_seed, "World seed")->required();
  oracle->add_option("--depth", or_depth, "Search depth")->check(CLI::Range(1, kMaxOracleDepth));
  oracle->add_option("--script", or_script, "Write the plan as a strict actor script");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*roleplay) {
      const auto cast_cfg = read_json(rp_cast);
      RolePrompts prompts;
      if (cast_cfg.contains("prompts")) {
        const auto& p = cast_cfg["prompts"];
        prompts.question_generator = p.value("question_generator", prompts.question_generator);
        prompts.action_maker = p.value("action_maker", prompts.action_maker);
        prompts.environment_agent = p.value("environment_agent", prompts.environment_agent);
      }
      ForgeSink sink(rp_out, rp_review.empty() ? default_review(rp_out) : fs::path(rp_review));
      std::size_t failed = 0;
      for (int i = 0; i < rp_n; ++i) {
        const std::uint64_t seed = rp_seed_base + static_cast<std::uint64_t>(i);
        auto qg = make_backend(cast_cfg.at("question_generator"), dir_of(rp_cast), seed);
        auto am = make_backend(cast_cfg.at("action_maker"), dir_of(rp_cast), seed);
        auto ea = make_backend(cast_cfg.at("environment_agent"), dir_of(rp_cast), seed);
        try {
          sink.offer(forge_roleplay(RoleCast{*qg, *am, *ea, prompts}, seed, rp_max_turns));
        } catch (const Error& e) {
          ++failed;
          std::cerr << fmt::format("seed {}: {}\n", seed, e.what());
        }
      }
      auto j = nlohmann::ordered_json::parse(sink.summary());
      j["generation_failures"] = failed;
      std::cout << j.dump() << '\n';
      return 0;
    }
    if (*exemplar) {
      const EnvKind kind = env_arg(ex_env);
      std::vector<Trajectory> shots;
      for (const auto& r : read_jsonl_file(ex_in)) shots.push_back(from_record(r));
      auto backend = make_backend(read_json(ex_backend), dir_of(ex_backend), ex_seed);
      ForgeSink sink(ex_out, ex_review.empty() ? default_review(ex_out) : fs::path(ex_review));
      ExemplarResult res;
      try {
        res = forge_exemplar(*backend, shots, kind, ex_n, ex_seed);
      } catch (const AllOutputsUnparseable& e) {
        std::cerr << e.what() << '\n';
        return 1;
      }
      for (const auto& t : res.trajectories) sink.offer(t);
      auto j = nlohmann::ordered_json::parse(sink.summary());
      j["dropped_unparseable"] = res.dropped;
      std::cout << j.dump() << '\n';
      return 0;
    }
    if (*mix_cmd || *sweep_cmd) {
      mc.agent_path = mix_agent;
      mc.general_path = mix_general;
      mc.out_path = mix_out;
      mc.sampling = replacement ? Sampling::WithReplacement : Sampling::WithoutReplacement;
      if (*mix_cmd) {
        std::cout << mix(mc).to_json() << '\n';
      } else {
        for (const auto& r : sweep(mc, lambdas)) std::cout << r.to_json() << '\n';
      }
      return 0;
    }
    if (*bench) {
      BenchConfig cfg = load_bench_config(bench_cfg);
      if (!bench_out.empty()) cfg.out_dir = bench_out;
      BenchReport rep = run_matrix(cfg);
      write_report(rep, cfg.out_dir);
      std::cout << render(rep, RenderFormat::Markdown);
      return 0;
    }
    if (*replay) {
      bool ok = true;
      for (const auto& t : traces) {
        ReplayReport r = replay_trace_file(t);
        for (const auto& f : r.failures) std::cerr << t << ": " << f << '\n';
        if (!r.ok()) {
          ok = false;
          if (r.paths == 0) std::cerr << t << ": no paths recorded\n";
        }
        std::cout << fmt::format("{}: {} paths, {} steps, {}\n", t, r.paths, r.steps,
                                 r.ok() ? "ok" : "FAILED");
      }
      return ok ? 0 : 1;
    }
    if (*env_cmd) {
      const EnvState s = make_state(env_arg(env_name), env_seed);
      nlohmann::ordered_json j{{"goal", goal_text(s)},
                               {"observation", initial_observation(s)},
                               {"world", nlohmann::ordered_json::parse(dump_state(s).dump())}};
      std::cout << j.dump(2) << '\n';
      return 0;
    }
    if (*oracle) {
      const TaskSpec spec = make_task(env_arg(or_env), or_seed);
      OracleResult r = oracle_solve(spec, or_depth);
      nlohmann::ordered_json j{{"best_reward", r.best_reward},
                               {"plan", r.best_plan},
                               {"nodes_expanded", r.nodes_expanded}};
      std::cout << j.dump() << '\n';
      if (!or_script.empty()) {
        std::vector<ScriptEntry> entries;
        for (const auto& a : r.best_plan) entries.push_back({MatchRule::any(), a});
        std::ofstream out(or_script, std::ios::binary);
        write_script(out, entries);
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
