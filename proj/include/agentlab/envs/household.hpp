// Seeded household rooms: receptacles holding items, some of which must be
// opened first, and a "put a <item> in the <receptacle>" goal.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "agentlab/envs/step.hpp"

namespace agentlab {

struct HouseholdGoal {
  std::string item;
  std::string receptacle;

  friend bool operator==(const HouseholdGoal&, const HouseholdGoal&) = default;
};

struct HouseholdState {
  std::string room;
  std::map<std::string, std::vector<std::string>> receptacles;
  /// Openable receptacles and whether each is currently open.
  std::map<std::string, bool> openable;
  /// Empty while standing in the middle of the room.
  std::optional<std::string> agent_location;
  std::optional<std::string> inventory;
  HouseholdGoal goal;
  int steps_taken = 0;
  bool done = false;
  double reward = 0.0;

  friend bool operator==(const HouseholdState&, const HouseholdState&) = default;
};

namespace household {

HouseholdState generate(std::uint64_t seed);

/// Builds a state from an explicit layout. Marks the episode done with
/// reward 1 when the goal already holds.
HouseholdState from_layout(std::map<std::string, std::vector<std::string>> receptacles,
                           std::map<std::string, bool> openable, HouseholdGoal goal,
                           std::string room = "room");

std::string goal_text(const HouseholdGoal& g);
/// Parses "put a/an/the/some <item> in/on [the] <receptacle>".
std::optional<HouseholdGoal> parse_goal(std::string_view text);

bool goal_satisfied(const HouseholdState& s);

/// Where an item currently is; "inventory" when held, empty when absent.
std::string locate(const HouseholdState& s, std::string_view item);

std::string reset_observation(const HouseholdState& s);
/// Full layout including closed receptacles, for data generators.
std::string describe_room(const HouseholdState& s);

StepResult step(HouseholdState& s, std::string_view action);

/// Template grammar: go to X / take X [from Y] / put X in|on Y / open X / look.
bool parses(std::string_view action);

/// Every template instantiation over the world's objects.
std::vector<std::string> candidate_actions(const HouseholdState& s);

/// Items named in an observation, in order of mention.
std::vector<std::string> mentioned_items(const HouseholdState& s, std::string_view text);

/// For a parsed "take" action, the item taken.
std::optional<std::string> taken_item(std::string_view action);

nlohmann::json to_json(const HouseholdState& s);
HouseholdState from_json(const nlohmann::json& j);

}  // namespace household
}  // namespace agentlab
