// Blends agent and general instruction datasets at ratio lambda by sample
// count. Output is a seeded shuffle and byte-identical for identical configs.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "agentlab/core.hpp"

namespace agentlab {

enum class Sampling { WithReplacement, WithoutReplacement };

struct MixConfig {
  double lambda = 0.5;
  std::size_t n_total = 0;
  std::uint64_t seed = 0;
  std::filesystem::path agent_path;
  std::filesystem::path general_path;
  std::filesystem::path out_path;
  Sampling sampling = Sampling::WithReplacement;
};

struct MixReport {
  std::filesystem::path out_path;
  double lambda = 0.0;
  std::size_t n_agent = 0;
  std::size_t n_general = 0;
  double achieved_fraction = 0.0;
  /// Hex SHA-256 of the output file.
  std::string digest;

  std::string to_json() const;
};

class SourceTooSmall : public Error {
 public:
  SourceTooSmall(const std::string& which, std::size_t have, std::size_t need);
};

/// Round-half-up of lambda * n.
std::size_t agent_count(double lambda, std::size_t n);

MixReport mix(const MixConfig& cfg);

/// `<stem>-l<lambda><ext>`; a lambda seen earlier in the list also gets
/// `-<index>`.
std::vector<MixReport> sweep(const MixConfig& base, const std::vector<double>& lambdas);

std::string sha256_hex(std::string_view bytes);

}  // namespace agentlab
