#pragma once

#include <string>
#include <string_view>

#include "agentlab/core.hpp"

namespace agentlab {

struct StepResult {
  std::string observation;
  double reward = 0.0;
  bool done = false;

  friend bool operator==(const StepResult&, const StepResult&) = default;
};

/// Observation for unparseable or illegal actions.
inline constexpr std::string_view kNothingHappens = "Nothing happens.";

class EpisodeAlreadyDone : public Error {
 public:
  EpisodeAlreadyDone() : Error("episode already done") {}
};

class UnsupportedEnvKind : public Error {
 public:
  using Error::Error;
};

/// Lowercased, trimmed, internal whitespace collapsed.
std::string normalize_action(std::string_view action);

}  // namespace agentlab
