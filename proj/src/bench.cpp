#include "agentlab/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "agentlab/backend.hpp"
#include "agentlab/envs.hpp"

namespace agentlab {

double aggregate(const std::vector<double>& scores) {
  if (scores.empty()) throw EmptyScores();
  const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) /
                      static_cast<double>(scores.size());
  // Epsilon absorbs representation error in sums such as 169.4 / 5.
  return std::floor(mean * 100.0 + 0.5 + 1e-7) / 100.0;
}

// ---------------------------------------------------------------------------
// Config

MethodConfig parse_method_config(const nlohmann::json& j) {
  MethodConfig m;
  std::string name;
  if (j.is_string()) {
    name = j.get<std::string>();
  } else if (j.is_object() && j.contains("method")) {
    name = j["method"].get<std::string>();
  } else {
    throw ConfigError("method entry needs a \"method\" name");
  }
  auto parsed = parse_method(name);
  if (!parsed) throw ConfigError("unknown method '" + name + "'");
  m = *parsed == Method::Ours ? MethodConfig{} : MethodConfig::baseline(*parsed);
  if (j.is_object()) {
    m.num_path = j.value("num_path", m.num_path);
    m.num_branch = j.value("num_branch", m.num_branch);
    m.k = j.value("k", m.k);
    m.reward_threshold = j.value("reward_threshold", m.reward_threshold);
    m.loop_abort_after = j.value("loop_abort_after", m.loop_abort_after);
    if (j.contains("decompose") && !j["decompose"].is_null()) m.decompose = j["decompose"].get<bool>();
    m.backtrack = j.value("backtrack", m.backtrack);
    m.replan_on_backtrack = j.value("replan_on_backtrack", m.replan_on_backtrack);
  }
  try {
    m.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return m;
}

nlohmann::ordered_json method_config_json(const MethodConfig& m) {
  nlohmann::ordered_json j{{"method", to_string(m.method)},
                           {"num_path", m.num_path},
                           {"num_branch", m.num_branch},
                           {"k", m.k},
                           {"reward_threshold", m.reward_threshold},
                           {"loop_abort_after", m.loop_abort_after}};
  j["decompose"] = m.decompose ? nlohmann::ordered_json(*m.decompose) : nlohmann::ordered_json(nullptr);
  j["backtrack"] = m.backtrack;
  j["replan_on_backtrack"] = m.replan_on_backtrack;
  return j;
}

void BenchConfig::validate() const {
  if (backends.empty() || envs.empty() || methods.empty())
    throw ConfigError("config needs at least one backend, env and method");
  if (episodes_per_cell < 1) throw ConfigError("episodes_per_cell must be positive");
  if (parallelism < 1) throw ConfigError("parallelism must be positive");
  std::set<std::string> labels;
  for (const auto& m : methods)
    if (!labels.insert(m.label()).second) throw ConfigError("duplicate method " + m.label());
  std::set<std::string> names;
  for (const auto& [name, _] : backends) {
    if (name.empty() || name.find("__") != std::string::npos || name.find('/') != std::string::npos)
      throw ConfigError("backend name '" + name + "' is not usable in file names");
    if (!names.insert(name).second) throw ConfigError("duplicate backend " + name);
  }
  std::set<EnvKind> kinds;
  for (const auto& e : envs) {
    if (!kinds.insert(e.env_kind).second)
      throw ConfigError(fmt::format("env {} listed twice", to_string(e.env_kind)));
    std::set<std::uint64_t> seen(e.seeds.begin(), e.seeds.end());
    if (seen.size() != e.seeds.size())
      throw ConfigError(fmt::format("duplicate seeds for env {}", to_string(e.env_kind)));
    if (e.seeds.size() < static_cast<std::size_t>(episodes_per_cell))
      throw ConfigError(fmt::format("env {} has fewer seeds than episodes_per_cell",
                                    to_string(e.env_kind)));
  }
}

BenchConfig parse_bench_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  BenchConfig c;
  c.base_dir = base_dir;
  try {
    for (const auto& [name, b] : j.at("backends").items()) {
      BackendSet set;
      set.actor = b.contains("actor") ? b["actor"] : b;
      if (b.contains("planner")) set.planner = b["planner"];
      if (b.contains("judge")) set.judge = b["judge"];
      c.backends.emplace_back(name, std::move(set));
    }
    for (const auto& e : j.at("envs")) {
      const auto name = e.at("env_kind").get<std::string>();
      auto kind = parse_env_kind(name);
      if (!kind) throw ConfigError("unknown env_kind '" + name + "'");
      c.envs.push_back({*kind, e.at("seeds").get<std::vector<std::uint64_t>>()});
    }
    for (const auto& m : j.at("methods")) c.methods.push_back(parse_method_config(m));
    c.episodes_per_cell = j.value("episodes_per_cell", 1);
    c.parallelism = j.value("parallelism", 1);
    std::filesystem::path out = j.value("out_dir", std::string("bench-out"));
    c.out_dir = out.is_absolute() ? out : base_dir / out;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bench config: ") + e.what());
  }
  c.validate();
  // Fail early on unconstructible backends.
  for (const auto& [name, set] : c.backends) {
    for (const auto* b : {&set.actor, &set.planner, &set.judge}) {
      if (b->is_null()) continue;
      try {
        make_backend(*b, base_dir, c.envs.front().seeds.front());
      } catch (const std::exception& e) {
        throw ConfigError(fmt::format("backend {}: {}", name, e.what()));
      }
    }
  }
  return c;
}

BenchConfig load_bench_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_bench_config(j, path.parent_path().empty() ? "." : path.parent_path());
}

// ---------------------------------------------------------------------------
// Matrix

std::string trace_file_name(std::string_view backend, std::string_view env,
                            std::string_view method, std::uint64_t seed) {
  return fmt::format("{}__{}__{}__seed{}.jsonl", backend, env, method, seed);
}

namespace {

struct CellJob {
  std::size_t backend;
  std::size_t env;
  std::size_t method;
};

CellResult run_cell(const BenchConfig& cfg, const CellJob& job) {
  const auto& [bname, bset] = cfg.backends[job.backend];
  const EnvSeeds& env = cfg.envs[job.env];
  const MethodConfig& method = cfg.methods[job.method];

  CellResult cell;
  cell.backend = bname;
  cell.env = std::string(to_string(env.env_kind));
  cell.method = method.label();

  int format_errors = 0, actor_calls = 0, aborted = 0, paths = 0;
  for (int i = 0; i < cfg.episodes_per_cell; ++i) {
    const std::uint64_t seed = env.seeds[static_cast<std::size_t>(i)];
    cell.seeds.push_back(seed);
    double reward = 0.0;
    std::string error;
    const auto trace_path =
        cfg.out_dir / "traces" / trace_file_name(cell.backend, cell.env, cell.method, seed);
    std::ofstream trace_out(trace_path, std::ios::binary);
    JsonlTraceWriter trace(trace_out);
    try {
      auto actor = make_backend(bset.actor, cfg.base_dir, seed);
      auto planner = bset.planner.is_null() ? nullptr : make_backend(bset.planner, cfg.base_dir, seed);
      auto judge = bset.judge.is_null() ? nullptr : make_backend(bset.judge, cfg.base_dir, seed);
      ReasoningTree tree =
          run_episode(method, make_task(env.env_kind, seed), *actor,
                      planner ? *planner : *actor, judge ? *judge : *actor, &trace);
      reward = tree.best_reward();
      for (const auto& p : tree.paths) {
        format_errors += p.format_errors;
        actor_calls += p.actor_calls;
        aborted += p.loop_aborted ? 1 : 0;
        ++paths;
        if (error.empty() && p.abandoned_reason.starts_with("backend")) error = p.abandoned_reason;
      }
    } catch (const std::exception& e) {
      reward = 0.0;
      error = e.what();
    }
    cell.rewards.push_back(reward);
    cell.errors.push_back(error);
  }
  cell.format_error_rate =
      actor_calls ? static_cast<double>(format_errors) / static_cast<double>(actor_calls) : 0.0;
  cell.format_error_rate = std::min(1.0, cell.format_error_rate);
  cell.loop_abort_rate = paths ? static_cast<double>(aborted) / static_cast<double>(paths) : 0.0;
  std::vector<double> scaled;
  for (double r : cell.rewards) scaled.push_back(r * 100.0);
  cell.average = aggregate(scaled);
  return cell;
}

}  // namespace

BenchReport run_matrix(const BenchConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir / "traces");

  BenchReport rep;
  for (const auto& [name, _] : cfg.backends) rep.backends.push_back(name);
  for (const auto& e : cfg.envs) rep.envs.emplace_back(to_string(e.env_kind));
  for (const auto& m : cfg.methods) rep.methods.push_back(m.label());

  std::vector<CellJob> jobs;
  for (std::size_t b = 0; b < cfg.backends.size(); ++b)
    for (std::size_t e = 0; e < cfg.envs.size(); ++e)
      for (std::size_t m = 0; m < cfg.methods.size(); ++m) jobs.push_back({b, e, m});

  rep.cells.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) rep.cells[i] = run_cell(cfg, jobs[i]);
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.parallelism), jobs.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Report

const CellResult* BenchReport::find(std::string_view backend, std::string_view env,
                                    std::string_view method) const {
  for (const auto& c : cells)
    if (c.backend == backend && c.env == env && c.method == method) return &c;
  return nullptr;
}

nlohmann::ordered_json BenchReport::to_json() const {
  nlohmann::ordered_json j{{"backends", backends}, {"envs", envs}, {"methods", methods}};
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : cells) {
    arr.push_back({{"backend", c.backend},
                   {"env", c.env},
                   {"method", c.method},
                   {"seeds", c.seeds},
                   {"rewards", c.rewards},
                   {"errors", c.errors},
                   {"format_error_rate", c.format_error_rate},
                   {"loop_abort_rate", c.loop_abort_rate},
                   {"average", c.average}});
  }
  j["cells"] = std::move(arr);
  return j;
}

BenchReport BenchReport::from_json(const nlohmann::json& j) {
  BenchReport r;
  try {
    r.backends = j.at("backends").get<std::vector<std::string>>();
    r.envs = j.at("envs").get<std::vector<std::string>>();
    r.methods = j.at("methods").get<std::vector<std::string>>();
    for (const auto& cj : j.at("cells")) {
      CellResult c;
      c.backend = cj.at("backend").get<std::string>();
      c.env = cj.at("env").get<std::string>();
      c.method = cj.at("method").get<std::string>();
      c.seeds = cj.at("seeds").get<std::vector<std::uint64_t>>();
      c.rewards = cj.at("rewards").get<std::vector<double>>();
      c.errors = cj.value("errors", std::vector<std::string>(c.rewards.size()));
      c.format_error_rate = cj.value("format_error_rate", 0.0);
      c.loop_abort_rate = cj.value("loop_abort_rate", 0.0);
      if (c.format_error_rate < 0 || c.format_error_rate > 1 || c.loop_abort_rate < 0 ||
          c.loop_abort_rate > 1)
        throw ConfigError("report rates must lie in [0,1]");
      std::vector<double> scaled;
      for (double x : c.rewards) scaled.push_back(x * 100.0);
      c.average = aggregate(scaled);
      r.cells.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("report: ") + e.what());
  }
  return r;
}

namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::string render(const BenchReport& report, RenderFormat format) {
  std::string out;
  std::vector<std::string> footnotes;
  if (format == RenderFormat::Markdown) {
    out = "| Backend | Method |";
    for (const auto& e : report.envs) out += " " + e + " |";
    out += " Avg. |\n|---|---|";
    for (std::size_t i = 0; i <= report.envs.size(); ++i) out += "---:|";
    out += "\n";
  } else {
    out = "backend,method";
    for (const auto& e : report.envs) out += "," + csv_field(e);
    out += ",Avg.\n";
  }

  for (const auto& b : report.backends) {
    for (const auto& m : report.methods) {
      std::vector<double> row;
      std::string line = format == RenderFormat::Markdown
                             ? "| " + b + " | " + m + " |"
                             : csv_field(b) + "," + csv_field(m);
      for (const auto& e : report.envs) {
        const CellResult* c = report.find(b, e, m);
        std::string value = c ? fmt::format("{:.2f}", c->average) : "";
        if (c) row.push_back(c->average);
        if (format == RenderFormat::Markdown) {
          if (c) {
            footnotes.push_back(fmt::format(
                "[^{}]: {} / {} / {}: format_error_rate={:.2f}, loop_abort_rate={:.2f}",
                footnotes.size() + 1, b, m, e, c->format_error_rate, c->loop_abort_rate));
            value += fmt::format("[^{}]", footnotes.size());
          }
          line += " " + value + " |";
        } else {
          line += "," + value;
        }
      }
      const std::string avg = row.empty() ? "" : fmt::format("{:.2f}", aggregate(row));
      line += format == RenderFormat::Markdown ? " " + avg + " |" : "," + avg;
      out += line + "\n";
    }
  }
  if (format == RenderFormat::Markdown && !footnotes.empty()) {
    out += "\n";
    for (const auto& f : footnotes) out += f + "\n";
  }
  return out;
}

void write_report(const BenchReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const char* name, const std::string& body) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    out << body;
  };
  write("report.json", report.to_json().dump(2) + "\n");
  write("report.md", render(report, RenderFormat::Markdown));
  write("report.csv", render(report, RenderFormat::Csv));
}

}  // namespace agentlab
