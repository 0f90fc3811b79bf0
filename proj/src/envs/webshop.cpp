#include "agentlab/envs/webshop.hpp"

#include <algorithm>
#include <array>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "agentlab/rng.hpp"
#include "agentlab/text.hpp"

namespace agentlab::webshop {
namespace {

struct Category {
  const char* name;
  std::vector<std::string> attributes;
};

const std::array<Category, 4>& categories() {
  static const std::array<Category, 4> cats = {{
      {"shampoo",
       {"fragrance free", "for dry hair", "moisturizing", "natural", "paraben free",
        "sulfate free", "travel size", "vegan"}},
      {"t-shirt",
       {"black", "cotton", "large", "machine wash", "organic", "short sleeve", "slim fit",
        "v-neck"}},
      {"headphones",
       {"bluetooth", "foldable", "long battery life", "noise cancelling", "over ear",
        "waterproof", "wireless", "with microphone"}},
      {"coffee",
       {"dark roast", "decaf", "fair trade", "ground", "low acid", "organic",
        "single origin", "whole bean"}},
  }};
  return cats;
}

const std::array<const char*, 10> kBrands = {"Acme",   "Brightline", "Cobalt", "Dunmore",
                                             "Everly", "Fenwick",    "Gala",   "Harbor",
                                             "Ivory",  "Juniper"};

std::string price_str(double p) { return fmt::format("${:.2f}", p); }

std::string results_text(const WebshopState& s) {
  if (s.query_results.empty()) return "No results.";
  std::string out = "Search results:";
  for (const auto& id : s.query_results) {
    const Product* p = find_product(s, id);
    out += "\n[" + p->id + "] " + p->title + " - " + price_str(p->price);
  }
  return out;
}

std::string product_text(const Product& p) {
  return "[" + p.id + "] " + p.title + "\nPrice: " + price_str(p.price) +
         "\nAttributes: " + text::join(p.attributes, ", ") + "\nActions: buy[" + p.id +
         "], back";
}

struct ParsedAction {
  enum Verb { Search, View, Buy, Back } verb;
  std::string arg;
};

std::optional<ParsedAction> parse(std::string_view raw) {
  std::string a(text::trim(raw));
  if (text::lower(a) == "back") return ParsedAction{ParsedAction::Back, {}};
  auto bracketed = [&](std::string_view verb) -> std::optional<std::string> {
    if (!text::starts_with_ci(a, verb) || a.size() < verb.size() + 2) return std::nullopt;
    if (a[verb.size()] != '[' || a.back() != ']') return std::nullopt;
    std::string arg(text::trim(std::string_view(a).substr(verb.size() + 1,
                                                         a.size() - verb.size() - 2)));
    if (arg.empty()) return std::nullopt;
    return arg;
  };
  if (auto q = bracketed("search")) return ParsedAction{ParsedAction::Search, *q};
  if (auto id = bracketed("view")) return ParsedAction{ParsedAction::View, *id};
  if (auto id = bracketed("buy")) return ParsedAction{ParsedAction::Buy, *id};
  return std::nullopt;
}

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

WebshopState generate(std::uint64_t seed) {
  Rng rng(seed ^ 0x77656273686f7021ULL);
  const Category& cat = categories()[rng.below(categories().size())];
  WebshopState s;
  s.category = cat.name;

  const auto n_products = rng.between(8, 12);
  std::set<std::string> ids;
  static constexpr std::string_view kAlphabet = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";
  for (int i = 0; i < n_products; ++i) {
    Product p;
    do {
      p.id = "B0";
      for (int k = 0; k < 8; ++k) p.id += kAlphabet[rng.below(kAlphabet.size())];
    } while (!ids.insert(p.id).second);
    auto attrs = cat.attributes;
    rng.shuffle(std::span(attrs));
    attrs.resize(static_cast<std::size_t>(rng.between(1, 4)));
    const std::string lead = attrs.front();
    std::ranges::sort(attrs);
    p.attributes = std::move(attrs);
    p.title = std::string(kBrands[rng.below(kBrands.size())]) + " " + cat.name + ", " + lead;
    p.price = static_cast<double>(rng.between(500, 9000)) / 100.0;
    s.catalog.push_back(std::move(p));
  }

  auto req = cat.attributes;
  rng.shuffle(std::span(req));
  req.resize(static_cast<std::size_t>(rng.between(2, 3)));
  std::ranges::sort(req);
  s.required_attributes = std::move(req);
  if (rng.chance(3, 4)) s.budget = static_cast<double>(rng.between(2, 8) * 10);
  return s;
}

std::string goal_text(const WebshopState& s) {
  std::string g = "i am looking for a " + s.category + " that is " +
                  text::join(s.required_attributes, " and ");
  if (s.budget) g += fmt::format(", and price lower than {:.2f} dollars", *s.budget);
  return g;
}

std::string reset_observation(const WebshopState& s) {
  return "You are on the search page of an online shop.\nInstruction: " + goal_text(s) +
         "\nAvailable actions: search[query]";
}

double purchase_reward(const WebshopState& s, const Product& p) {
  if (s.required_attributes.empty()) return 0.0;
  std::size_t matched = 0;
  for (const auto& a : s.required_attributes)
    if (std::ranges::binary_search(p.attributes, a)) ++matched;
  double r = static_cast<double>(matched) / static_cast<double>(s.required_attributes.size());
  if (s.budget && p.price > *s.budget) r *= 0.5;
  return r;
}

const Product* find_product(const WebshopState& s, std::string_view id) {
  for (const auto& p : s.catalog)
    if (p.id == id) return &p;
  return nullptr;
}

StepResult step(WebshopState& s, std::string_view action) {
  if (s.done) throw EpisodeAlreadyDone();
  ++s.steps_taken;
  const StepResult nothing{std::string(kNothingHappens), 0.0, false};
  auto p = parse(action);
  if (!p) return nothing;

  switch (p->verb) {
    case ParsedAction::Search: {
      auto query = text::words(p->arg);
      std::vector<std::pair<int, std::size_t>> scored;
      for (std::size_t i = 0; i < s.catalog.size(); ++i) {
        auto bag = text::words(s.catalog[i].title + " " + text::join(s.catalog[i].attributes, " "));
        std::set<std::string> have(bag.begin(), bag.end());
        std::set<std::string> hits;
        for (const auto& w : query)
          if (have.contains(w)) hits.insert(w);
        if (!hits.empty()) scored.emplace_back(-static_cast<int>(hits.size()), i);
      }
      std::ranges::sort(scored);
      s.query_results.clear();
      for (auto [_, i] : scored) s.query_results.push_back(s.catalog[i].id);
      s.viewing.reset();
      return {results_text(s), 0.0, false};
    }
    case ParsedAction::View: {
      std::string id = upper(p->arg);
      if (std::ranges::find(s.query_results, id) == s.query_results.end()) return nothing;
      s.viewing = id;
      return {product_text(*find_product(s, id)), 0.0, false};
    }
    case ParsedAction::Buy: {
      std::string id = upper(p->arg);
      if (!s.viewing || *s.viewing != id) return nothing;
      const Product* prod = find_product(s, id);
      s.purchased = id;
      s.done = true;
      s.reward = purchase_reward(s, *prod);
      return {"You bought [" + prod->id + "] " + prod->title + " for " + price_str(prod->price) +
                  ".",
              s.reward, true};
    }
    case ParsedAction::Back: {
      if (s.viewing) {
        s.viewing.reset();
        return {results_text(s), 0.0, false};
      }
      if (!s.query_results.empty()) {
        s.query_results.clear();
        return {"You are on the search page.", 0.0, false};
      }
      return nothing;
    }
  }
  return nothing;
}

bool parses(std::string_view action) { return parse(action).has_value(); }

std::vector<std::string> candidate_actions(const WebshopState& s) {
  std::vector<std::string> out{"search[" + s.category + "]"};
  for (const auto& a : s.required_attributes) out.push_back("search[" + a + "]");
  for (const auto& id : s.query_results) out.push_back("view[" + id + "]");
  if (s.viewing) out.push_back("buy[" + *s.viewing + "]");
  out.push_back("back");
  return out;
}

std::optional<std::string> referenced_id(std::string_view action) {
  auto p = parse(action);
  if (!p || (p->verb != ParsedAction::View && p->verb != ParsedAction::Buy)) return std::nullopt;
  return upper(p->arg);
}

nlohmann::json to_json(const WebshopState& s) {
  nlohmann::json j;
  j["category"] = s.category;
  auto cat = nlohmann::json::array();
  for (const auto& p : s.catalog)
    cat.push_back({{"id", p.id}, {"title", p.title}, {"attributes", p.attributes}, {"price", p.price}});
  j["catalog"] = std::move(cat);
  j["query_results"] = s.query_results;
  j["viewing"] = s.viewing ? nlohmann::json(*s.viewing) : nlohmann::json(nullptr);
  j["required_attributes"] = s.required_attributes;
  j["budget"] = s.budget ? nlohmann::json(*s.budget) : nlohmann::json(nullptr);
  j["purchased"] = s.purchased ? nlohmann::json(*s.purchased) : nlohmann::json(nullptr);
  j["steps_taken"] = s.steps_taken;
  j["done"] = s.done;
  j["reward"] = s.reward;
  return j;
}

WebshopState from_json(const nlohmann::json& j) {
  WebshopState s;
  s.category = j.at("category").get<std::string>();
  for (const auto& pj : j.at("catalog")) {
    s.catalog.push_back({pj.at("id").get<std::string>(), pj.at("title").get<std::string>(),
                         pj.at("attributes").get<std::vector<std::string>>(),
                         pj.at("price").get<double>()});
  }
  s.query_results = j.at("query_results").get<std::vector<std::string>>();
  if (!j.at("viewing").is_null()) s.viewing = j["viewing"].get<std::string>();
  s.required_attributes = j.at("required_attributes").get<std::vector<std::string>>();
  if (!j.at("budget").is_null()) s.budget = j["budget"].get<double>();
  if (!j.at("purchased").is_null()) s.purchased = j["purchased"].get<std::string>();
  s.steps_taken = j.at("steps_taken").get<int>();
  s.done = j.at("done").get<bool>();
  s.reward = j.at("reward").get<double>();
  return s;
}

}  // namespace agentlab::webshop
