#include "agentlab/mixer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "agentlab/rng.hpp"
#include "agentlab/text.hpp"

namespace agentlab {

SourceTooSmall::SourceTooSmall(const std::string& which, std::size_t have, std::size_t need)
    : Error(fmt::format("{} source has {} records but {} are needed without replacement", which,
                        have, need)) {}

std::size_t agent_count(double lambda, std::size_t n) {
  // The epsilon keeps products like 0.5 * 10001 from rounding down through
  // representation error.
  return static_cast<std::size_t>(std::floor(lambda * static_cast<double>(n) + 0.5 + 1e-9));
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

std::string MixReport::to_json() const {
  nlohmann::ordered_json j{{"out_path", out_path.string()}, {"lambda", lambda},
                           {"n_agent", n_agent},            {"n_general", n_general},
                           {"achieved_fraction", achieved_fraction},
                           {"digest", digest}};
  return j.dump();
}

namespace {

/// Source lines verified to parse; output reuses the original bytes.
std::vector<std::string> load_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open " + p.string());
  std::vector<std::string> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    parse_jsonl_line(line, n);
    out.push_back(line);
  }
  return out;
}

void draw(Rng& rng, const std::vector<std::string>& src, std::size_t count, Sampling mode,
          const char* which, std::vector<const std::string*>& out) {
  if (count == 0) return;
  if (src.empty() || (mode == Sampling::WithoutReplacement && src.size() < count))
    throw SourceTooSmall(which, src.size(), count);
  if (mode == Sampling::WithReplacement) {
    for (std::size_t i = 0; i < count; ++i) out.push_back(&src[rng.below(src.size())]);
    return;
  }
  std::vector<std::size_t> idx(src.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + rng.below(idx.size() - i);
    std::swap(idx[i], idx[j]);
    out.push_back(&src[idx[i]]);
  }
}

}  // namespace

MixReport mix(const MixConfig& cfg) {
  if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0)) throw Error("lambda must be in [0,1]");
  if (cfg.n_total == 0) throw Error("n_total must be positive");
  const std::size_t n_agent = agent_count(cfg.lambda, cfg.n_total);
  const std::size_t n_general = cfg.n_total - n_agent;

  const auto agent = n_agent ? load_lines(cfg.agent_path) : std::vector<std::string>{};
  const auto general = n_general ? load_lines(cfg.general_path) : std::vector<std::string>{};

  Rng rng(cfg.seed);
  std::vector<const std::string*> picked;
  picked.reserve(cfg.n_total);
  draw(rng, agent, n_agent, cfg.sampling, "agent", picked);
  draw(rng, general, n_general, cfg.sampling, "general", picked);
  rng.shuffle(std::span(picked));

  std::string body;
  for (const auto* l : picked) body += *l + '\n';
  {
    std::ofstream out(cfg.out_path, std::ios::binary);
    if (!out) throw Error("cannot write " + cfg.out_path.string());
    out << body;
  }
  MixReport r;
  r.out_path = cfg.out_path;
  r.lambda = cfg.lambda;
  r.n_agent = n_agent;
  r.n_general = n_general;
  r.achieved_fraction = static_cast<double>(n_agent) / static_cast<double>(cfg.n_total);
  r.digest = sha256_hex(body);
  return r;
}

std::vector<MixReport> sweep(const MixConfig& base, const std::vector<double>& lambdas) {
  for (double l : lambdas)
    if (!(l >= 0.0 && l <= 1.0)) throw Error("lambda must be in [0,1]");
  std::vector<MixReport> out;
  std::vector<std::string> used;
  const auto dir = base.out_path.parent_path();
  const auto stem = base.out_path.stem().string();
  const auto ext = base.out_path.extension().string();
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    std::string tag = fmt::format("-l{}", lambdas[i]);
    if (std::ranges::find(used, tag) != used.end()) tag += fmt::format("-{}", i);
    used.push_back(tag);
    MixConfig c = base;
    c.lambda = lambdas[i];
    c.out_path = dir / (stem + tag + ext);
    out.push_back(mix(c));
  }
  return out;
}

}  // namespace agentlab
