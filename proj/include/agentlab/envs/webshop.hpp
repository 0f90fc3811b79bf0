// Seeded single-category shop: search, view, buy. Purchases earn partial
// credit for matched attributes, halved when over budget.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "agentlab/envs/step.hpp"

namespace agentlab {

struct Product {
  std::string id;
  std::string title;
  std::vector<std::string> attributes;  // sorted
  double price = 0.0;

  friend bool operator==(const Product&, const Product&) = default;
};

struct WebshopState {
  std::string category;
  std::vector<Product> catalog;
  std::vector<std::string> query_results;
  std::optional<std::string> viewing;
  std::vector<std::string> required_attributes;  // sorted
  std::optional<double> budget;
  std::optional<std::string> purchased;
  int steps_taken = 0;
  bool done = false;
  double reward = 0.0;

  friend bool operator==(const WebshopState&, const WebshopState&) = default;
};

namespace webshop {

WebshopState generate(std::uint64_t seed);

std::string goal_text(const WebshopState& s);
std::string reset_observation(const WebshopState& s);

/// Reward for buying `p` under the state's requirements.
double purchase_reward(const WebshopState& s, const Product& p);

const Product* find_product(const WebshopState& s, std::string_view id);

StepResult step(WebshopState& s, std::string_view action);

/// search[q] / view[id] / buy[id] / back
bool parses(std::string_view action);

/// search over the category and each required attribute, view of every
/// current result, buy of the viewed item, back.
std::vector<std::string> candidate_actions(const WebshopState& s);

/// Product id referenced by a view[...] or buy[...] action.
std::optional<std::string> referenced_id(std::string_view action);

nlohmann::json to_json(const WebshopState& s);
WebshopState from_json(const nlohmann::json& j);

}  // namespace webshop
}  // namespace agentlab
