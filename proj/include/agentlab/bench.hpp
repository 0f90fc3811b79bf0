// Benchmark matrix: backend x environment x method, one episode per seed.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentlab/core.hpp"
#include "agentlab/reason.hpp"

namespace agentlab {

class ConfigError : public Error {
 public:
  using Error::Error;
};

class EmptyScores : public Error {
 public:
  EmptyScores() : Error("cannot aggregate an empty score list") {}
};

struct BackendSet {
  nlohmann::json actor;
  /// Null: the actor instance doubles as planner / judge.
  nlohmann::json planner;
  nlohmann::json judge;
};

struct EnvSeeds {
  EnvKind env_kind = EnvKind::Household;
  std::vector<std::uint64_t> seeds;
};

struct BenchConfig {
  std::vector<std::pair<std::string, BackendSet>> backends;
  std::vector<EnvSeeds> envs;
  std::vector<MethodConfig> methods;
  int episodes_per_cell = 1;
  int parallelism = 1;
  std::filesystem::path out_dir;
  /// Directory that relative script paths resolve against.
  std::filesystem::path base_dir;

  void validate() const;
};

/// Throws ConfigError. Relative paths resolve against `base_dir`.
BenchConfig parse_bench_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
BenchConfig load_bench_config(const std::filesystem::path& path);
MethodConfig parse_method_config(const nlohmann::json& j);
nlohmann::ordered_json method_config_json(const MethodConfig& m);

struct CellResult {
  std::string backend;
  std::string env;
  std::string method;
  std::vector<std::uint64_t> seeds;
  std::vector<double> rewards;
  /// Per seed; empty when the episode ran cleanly.
  std::vector<std::string> errors;
  double format_error_rate = 0.0;
  double loop_abort_rate = 0.0;
  /// aggregate(rewards x 100).
  double average = 0.0;
};

struct BenchReport {
  std::vector<std::string> backends;
  std::vector<std::string> envs;
  std::vector<std::string> methods;
  std::vector<CellResult> cells;

  const CellResult* find(std::string_view backend, std::string_view env,
                         std::string_view method) const;
  nlohmann::ordered_json to_json() const;
  /// Averages are recomputed from the per-seed rewards.
  static BenchReport from_json(const nlohmann::json& j);
};

/// Arithmetic mean rounded half-up to 2 decimals.
double aggregate(const std::vector<double>& scores);

BenchReport run_matrix(const BenchConfig& cfg);

enum class RenderFormat { Markdown, Csv };
std::string render(const BenchReport& report, RenderFormat format);

/// Writes report.json, report.md and report.csv into `dir`.
void write_report(const BenchReport& report, const std::filesystem::path& dir);

std::string trace_file_name(std::string_view backend, std::string_view env,
                            std::string_view method, std::uint64_t seed);

}  // namespace agentlab
