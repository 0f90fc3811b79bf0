#include "agentlab/envs/household.hpp"

#include <algorithm>
#include <array>
#include <set>

#include <nlohmann/json.hpp>

#include "agentlab/rng.hpp"
#include "agentlab/text.hpp"

namespace agentlab {

std::string normalize_action(std::string_view action) {
  std::string out;
  bool space = false;
  for (char c : text::trim(action)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space && !out.empty()) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

namespace household {
namespace {

struct RoomKind {
  const char* name;
  std::vector<std::string> receptacles;
  std::set<std::string> openable;
  std::vector<std::string> items;
};

const std::array<RoomKind, 3>& room_kinds() {
  static const std::array<RoomKind, 3> kinds = {{
      {"bathroom",
       {"bathtub", "cabinet", "countertop", "drawer", "garbagecan", "shelf", "sink",
        "toilet", "towelholder"},
       {"cabinet", "drawer"},
       {"candle", "cloth", "plunger", "scrub brush", "soap bar", "soap bottle",
        "spray bottle", "tissue box", "toilet paper", "toothbrush", "towel"}},
      {"kitchen",
       {"cabinet", "coffeemachine", "countertop", "diningtable", "drawer", "fridge",
        "garbagecan", "microwave", "sink", "stoveburner"},
       {"cabinet", "drawer", "fridge", "microwave"},
       {"apple", "bowl", "bread", "cup", "egg", "fork", "knife", "lettuce", "mug", "pan",
        "plate", "potato", "spatula", "tomato"}},
      {"bedroom",
       {"armchair", "bed", "desk", "drawer", "dresser", "garbagecan", "safe", "shelf",
        "sidetable"},
       {"drawer", "safe"},
       {"alarm clock", "book", "cd", "cellphone", "keychain", "laptop", "pen", "pencil",
        "pillow", "remote control"}},
  }};
  return kinds;
}

std::string article(std::string_view noun) {
  if (!noun.empty() && std::string_view("aeiou").find(noun.front()) != std::string_view::npos)
    return "an";
  return "a";
}

std::string with_article(std::string_view noun) {
  return article(noun) + " " + std::string(noun);
}

/// "a x, a y, and a z" / "a x" / "nothing"
std::string listing(const std::vector<std::string>& nouns) {
  if (nouns.empty()) return "nothing";
  if (nouns.size() == 1) return with_article(nouns[0]);
  std::string out;
  for (std::size_t i = 0; i < nouns.size(); ++i) {
    if (i) out += ", ";
    if (i + 1 == nouns.size()) out += "and ";
    out += with_article(nouns[i]);
  }
  return out;
}

bool is_closed(const HouseholdState& s, const std::string& r) {
  auto it = s.openable.find(r);
  return it != s.openable.end() && !it->second;
}

std::string contents_sentence(const HouseholdState& s, const std::string& r) {
  if (is_closed(s, r)) return "The " + r + " is closed.";
  std::string prep = s.openable.contains(r) ? "In" : "On";
  return prep + " the " + r + ", you see " + listing(s.receptacles.at(r)) + ".";
}

std::vector<std::string> receptacle_names(const HouseholdState& s) {
  std::vector<std::string> names;
  for (const auto& [name, _] : s.receptacles) names.push_back(name);
  return names;
}

struct ParsedAction {
  enum Verb { Look, GoTo, Take, Put, Open } verb;
  std::string object;
  std::string target;
};

std::optional<ParsedAction> parse(std::string_view raw) {
  const std::string a = normalize_action(raw);
  auto rest = [&](std::string_view prefix) { return a.substr(prefix.size()); };
  if (a == "look") return ParsedAction{ParsedAction::Look, {}, {}};
  if (a.starts_with("go to ") && a.size() > 6) return ParsedAction{ParsedAction::GoTo, rest("go to "), {}};
  if (a.starts_with("open ") && a.size() > 5) return ParsedAction{ParsedAction::Open, rest("open "), {}};
  if (a.starts_with("take ") && a.size() > 5) {
    std::string body = rest("take ");
    auto pos = body.find(" from ");
    if (pos == std::string::npos) return ParsedAction{ParsedAction::Take, body, {}};
    std::string obj = body.substr(0, pos), from = body.substr(pos + 6);
    if (obj.empty() || from.empty()) return std::nullopt;
    return ParsedAction{ParsedAction::Take, obj, from};
  }
  if (a.starts_with("put ") && a.size() > 4) {
    std::string body = rest("put ");
    for (std::string_view sep : {" in/on ", " in ", " on "}) {
      auto pos = body.find(sep);
      if (pos == std::string::npos) continue;
      std::string obj = body.substr(0, pos), tgt = body.substr(pos + sep.size());
      if (obj.empty() || tgt.empty()) return std::nullopt;
      return ParsedAction{ParsedAction::Put, obj, tgt};
    }
  }
  return std::nullopt;
}

void check_goal(HouseholdState& s) {
  if (goal_satisfied(s)) {
    s.done = true;
    s.reward = 1.0;
  }
}

}  // namespace

HouseholdState generate(std::uint64_t seed) {
  Rng rng(seed ^ 0x686f757365686f6cULL);
  const RoomKind& kind = room_kinds()[rng.below(room_kinds().size())];

  auto pool = kind.receptacles;
  rng.shuffle(std::span(pool));
  pool.resize(static_cast<std::size_t>(rng.between(5, 7)));

  auto items = kind.items;
  rng.shuffle(std::span(items));
  items.resize(static_cast<std::size_t>(rng.between(4, 7)));

  HouseholdState s;
  s.room = kind.name;
  for (const auto& r : pool) {
    s.receptacles[r];
    if (kind.openable.contains(r)) s.openable[r] = false;
  }
  for (const auto& item : items) s.receptacles[pool[rng.below(pool.size())]].push_back(item);

  const std::string& goal_item = items[rng.below(items.size())];
  std::vector<std::string> targets;
  for (const auto& r : pool)
    if (locate(s, goal_item) != r) targets.push_back(r);
  s.goal = {goal_item, targets[rng.below(targets.size())]};
  return s;
}

HouseholdState from_layout(std::map<std::string, std::vector<std::string>> receptacles,
                           std::map<std::string, bool> openable, HouseholdGoal goal,
                           std::string room) {
  HouseholdState s;
  s.room = std::move(room);
  s.receptacles = std::move(receptacles);
  s.openable = std::move(openable);
  s.goal = std::move(goal);
  if (!s.receptacles.contains(s.goal.receptacle))
    throw Error("goal receptacle '" + s.goal.receptacle + "' is not in the room");
  if (locate(s, s.goal.item).empty())
    throw Error("goal item '" + s.goal.item + "' is not in the room");
  for (const auto& [name, _] : s.openable)
    if (!s.receptacles.contains(name)) throw Error("openable '" + name + "' is not a receptacle");
  check_goal(s);
  return s;
}

std::string goal_text(const HouseholdGoal& g) {
  return "put " + with_article(g.item) + " in the " + g.receptacle;
}

std::optional<HouseholdGoal> parse_goal(std::string_view raw) {
  std::string t = normalize_action(raw);
  while (!t.empty() && (t.back() == '.' || t.back() == '!')) t.pop_back();
  if (!t.starts_with("put ")) return std::nullopt;
  t = t.substr(4);
  for (std::string_view art : {"a ", "an ", "the ", "some "}) {
    if (t.starts_with(art)) {
      t = t.substr(art.size());
      break;
    }
  }
  for (std::string_view sep : {" in/on ", " in ", " on "}) {
    auto pos = t.find(sep);
    if (pos == std::string::npos) continue;
    std::string item = t.substr(0, pos);
    std::string rec = t.substr(pos + sep.size());
    if (rec.starts_with("the ")) rec = rec.substr(4);
    if (item.empty() || rec.empty()) return std::nullopt;
    return HouseholdGoal{item, rec};
  }
  return std::nullopt;
}

bool goal_satisfied(const HouseholdState& s) {
  auto it = s.receptacles.find(s.goal.receptacle);
  if (it == s.receptacles.end()) return false;
  return std::ranges::find(it->second, s.goal.item) != it->second.end();
}

std::string locate(const HouseholdState& s, std::string_view item) {
  if (s.inventory && *s.inventory == item) return "inventory";
  for (const auto& [name, items] : s.receptacles)
    if (std::ranges::find(items, item) != items.end()) return name;
  return {};
}

std::string reset_observation(const HouseholdState& s) {
  return "You are in the middle of a room. Looking quickly around you, you see " +
         listing(receptacle_names(s)) + ".\nYour task is to: " + goal_text(s.goal) + ".";
}

std::string describe_room(const HouseholdState& s) {
  std::string out = "The " + s.room + " contains:";
  for (const auto& [name, items] : s.receptacles) {
    out += "\n- " + with_article(name);
    if (s.openable.contains(name)) out += s.openable.at(name) ? " (open)" : " (closed)";
    out += " holding " + listing(items);
  }
  return out;
}

StepResult step(HouseholdState& s, std::string_view action) {
  if (s.done) throw EpisodeAlreadyDone();
  ++s.steps_taken;
  const StepResult nothing{std::string(kNothingHappens), 0.0, false};
  auto p = parse(action);
  if (!p) return nothing;

  auto at = [&](const std::string& r) { return s.agent_location && *s.agent_location == r; };
  switch (p->verb) {
    case ParsedAction::Look: {
      if (!s.agent_location)
        return {"You are in the middle of a room. Looking quickly around you, you see " +
                    listing(receptacle_names(s)) + ".",
                0.0, false};
      return {"You are at the " + *s.agent_location + ". " +
                  contents_sentence(s, *s.agent_location),
              0.0, false};
    }
    case ParsedAction::GoTo: {
      if (!s.receptacles.contains(p->object)) return nothing;
      s.agent_location = p->object;
      return {"You arrive at the " + p->object + ". " + contents_sentence(s, p->object), 0.0,
              false};
    }
    case ParsedAction::Open: {
      auto it = s.openable.find(p->object);
      if (it == s.openable.end() || it->second || !at(p->object)) return nothing;
      it->second = true;
      return {"You open the " + p->object + ". " + contents_sentence(s, p->object), 0.0,
              false};
    }
    case ParsedAction::Take: {
      if (!s.agent_location || s.inventory) return nothing;
      const std::string& here = *s.agent_location;
      if (!p->target.empty() && p->target != here) return nothing;
      if (is_closed(s, here)) return nothing;
      auto& items = s.receptacles.at(here);
      auto it = std::ranges::find(items, p->object);
      if (it == items.end()) return nothing;
      items.erase(it);
      s.inventory = p->object;
      return {"You pick up the " + p->object + " from the " + here + ".", 0.0, false};
    }
    case ParsedAction::Put: {
      if (!s.inventory || *s.inventory != p->object || !at(p->target)) return nothing;
      if (is_closed(s, p->target)) return nothing;
      s.receptacles.at(p->target).push_back(p->object);
      s.inventory.reset();
      check_goal(s);
      std::string prep = s.openable.contains(p->target) ? " in " : " on ";
      return {"You put the " + p->object + prep + "the " + p->target + ".", s.reward, s.done};
    }
  }
  return nothing;
}

bool parses(std::string_view action) { return parse(action).has_value(); }

std::vector<std::string> candidate_actions(const HouseholdState& s) {
  std::vector<std::string> out{"look"};
  for (const auto& [name, _] : s.receptacles) out.push_back("go to " + name);
  for (const auto& [name, _] : s.openable) out.push_back("open " + name);
  if (s.agent_location && !s.inventory) {
    for (const auto& item : s.receptacles.at(*s.agent_location)) out.push_back("take " + item);
  }
  if (s.inventory) {
    for (const auto& [name, _] : s.receptacles)
      out.push_back("put " + *s.inventory + " in " + name);
  }
  return out;
}

std::vector<std::string> mentioned_items(const HouseholdState& s, std::string_view text) {
  const std::string t = text::lower(text);
  std::vector<std::pair<std::size_t, std::string>> found;
  auto scan = [&](const std::string& item) {
    if (text::contains_phrase(t, item)) found.emplace_back(t.find(item), item);
  };
  for (const auto& [_, items] : s.receptacles)
    for (const auto& item : items) scan(item);
  if (s.inventory) scan(*s.inventory);
  std::ranges::sort(found);
  std::vector<std::string> out;
  for (auto& [_, item] : found) out.push_back(std::move(item));
  return out;
}

std::optional<std::string> taken_item(std::string_view action) {
  auto p = parse(action);
  if (!p || p->verb != ParsedAction::Take) return std::nullopt;
  return p->object;
}

nlohmann::json to_json(const HouseholdState& s) {
  nlohmann::json j;
  j["room"] = s.room;
  j["receptacles"] = s.receptacles;
  j["openable"] = s.openable;
  j["agent_location"] = s.agent_location ? nlohmann::json(*s.agent_location) : nlohmann::json(nullptr);
  j["inventory"] = s.inventory ? nlohmann::json(*s.inventory) : nlohmann::json(nullptr);
  j["goal"] = {{"item", s.goal.item}, {"receptacle", s.goal.receptacle}};
  j["steps_taken"] = s.steps_taken;
  j["done"] = s.done;
  j["reward"] = s.reward;
  return j;
}

HouseholdState from_json(const nlohmann::json& j) {
  HouseholdState s;
  s.room = j.at("room").get<std::string>();
  s.receptacles = j.at("receptacles").get<std::map<std::string, std::vector<std::string>>>();
  s.openable = j.at("openable").get<std::map<std::string, bool>>();
  if (!j.at("agent_location").is_null()) s.agent_location = j["agent_location"].get<std::string>();
  if (!j.at("inventory").is_null()) s.inventory = j["inventory"].get<std::string>();
  s.goal = {j.at("goal").at("item").get<std::string>(),
            j.at("goal").at("receptacle").get<std::string>()};
  s.steps_taken = j.at("steps_taken").get<int>();
  s.done = j.at("done").get<bool>();
  s.reward = j.at("reward").get<double>();
  return s;
}

}  // namespace household
}  // namespace agentlab
