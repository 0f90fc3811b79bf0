#include "agentlab/envs/ostask.hpp"

#include <algorithm>
#include <array>
#include <optional>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "agentlab/rng.hpp"
#include "agentlab/text.hpp"

namespace agentlab::ostask {
namespace {

constexpr std::string_view kNoOutput = "(no output)";

std::string parent_of(const std::string& p) {
  if (p == "/") return "/";
  auto pos = p.rfind('/');
  return pos == 0 ? "/" : p.substr(0, pos);
}

std::string basename_of(const std::string& p) { return p.substr(p.rfind('/') + 1); }

std::string join_path(const std::string& dir, const std::string& name) {
  return dir == "/" ? "/" + name : dir + "/" + name;
}

bool is_dir(const OsTaskState& s, const std::string& p) { return s.directories.contains(p); }
bool is_file(const OsTaskState& s, const std::string& p) { return s.virtual_fs.contains(p); }
bool exists(const OsTaskState& s, const std::string& p) { return is_dir(s, p) || is_file(s, p); }

/// Whitespace split honoring single and double quotes.
std::optional<std::vector<std::string>> tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  bool in_token = false;
  char quote = 0;
  for (char c : s) {
    if (quote) {
      if (c == quote) {
        quote = 0;
      } else {
        cur += c;
      }
    } else if (c == '\'' || c == '"') {
      quote = c;
      in_token = true;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      if (in_token) out.push_back(std::move(cur));
      cur.clear();
      in_token = false;
    } else {
      cur += c;
      in_token = true;
    }
  }
  if (quote) return std::nullopt;
  if (in_token) out.push_back(std::move(cur));
  return out;
}

struct Command {
  std::string name;
  std::vector<std::string> args;
  std::string redirect;  // ">" or ">>" (echo only)
  std::string redirect_path;
};

std::optional<Command> parse(std::string_view raw) {
  std::string_view line = text::trim(raw);
  if (line.empty()) return std::nullopt;
  Command cmd;
  if (line == "echo" || line.starts_with("echo ")) {
    std::string_view rest = line.substr(4);
    // Split at the first unquoted '>'.
    char quote = 0;
    std::size_t gt = std::string_view::npos;
    for (std::size_t i = 0; i < rest.size(); ++i) {
      char c = rest[i];
      if (quote) {
        if (c == quote) quote = 0;
      } else if (c == '\'' || c == '"') {
        quote = c;
      } else if (c == '>') {
        gt = i;
        break;
      }
    }
    auto words = tokenize(rest.substr(0, gt));
    if (!words) return std::nullopt;
    cmd.name = "echo";
    cmd.args = std::move(*words);
    if (gt != std::string_view::npos) {
      bool append = gt + 1 < rest.size() && rest[gt + 1] == '>';
      cmd.redirect = append ? ">>" : ">";
      auto target = tokenize(rest.substr(gt + cmd.redirect.size()));
      if (!target || target->size() != 1) return std::nullopt;
      cmd.redirect_path = (*target)[0];
    }
    return cmd;
  }
  auto toks = tokenize(line);
  if (!toks || toks->empty()) return std::nullopt;
  cmd.name = (*toks)[0];
  cmd.args.assign(toks->begin() + 1, toks->end());
  const auto n = cmd.args.size();
  auto flags_ok = [&](std::initializer_list<std::string_view> allowed, std::size_t operands) {
    std::size_t flags = 0;
    for (const auto& a : cmd.args) {
      if (a.starts_with('-')) {
        if (std::ranges::find(allowed, a) == allowed.end()) return false;
        ++flags;
      }
    }
    return n - flags == operands;
  };
  if (cmd.name == "ls") return n <= 1 ? std::optional(cmd) : std::nullopt;
  if (cmd.name == "cat" || cmd.name == "touch") return n == 1 ? std::optional(cmd) : std::nullopt;
  if (cmd.name == "mv" || cmd.name == "cp" || cmd.name == "grep")
    return n == 2 ? std::optional(cmd) : std::nullopt;
  if (cmd.name == "pwd" || cmd.name == "done") return n == 0 ? std::optional(cmd) : std::nullopt;
  if (cmd.name == "cd") return n <= 1 ? std::optional(cmd) : std::nullopt;
  if (cmd.name == "mkdir") return flags_ok({"-p"}, 1) ? std::optional(cmd) : std::nullopt;
  if (cmd.name == "rm") return flags_ok({"-r", "-f", "-rf", "-fr"}, 1) ? std::optional(cmd) : std::nullopt;
  return std::nullopt;
}

std::string operand(const Command& c) {
  for (const auto& a : c.args)
    if (!a.starts_with('-')) return a;
  return {};
}

bool has_flag(const Command& c, char f) {
  for (const auto& a : c.args)
    if (a.starts_with('-') && a.find(f) != std::string::npos) return true;
  return false;
}

std::string display(const std::string& content) {
  if (content.empty()) return "(empty file)";
  std::string out = content;
  if (out.back() == '\n') out.pop_back();
  return out.empty() ? "(empty file)" : out;
}

std::optional<std::string> run(OsTaskState& s, const Command& c) {
  auto abs = [&](const std::string& p) { return resolve(s.cwd, p); };
  const std::string none(kNoOutput);

  if (c.name == "pwd") return s.cwd;
  if (c.name == "ls") {
    std::string dir = c.args.empty() ? s.cwd : abs(c.args[0]);
    if (is_file(s, dir)) return basename_of(dir);
    if (!is_dir(s, dir)) return std::nullopt;
    std::vector<std::string> names;
    for (const auto& d : s.directories)
      if (d != "/" && d != dir && parent_of(d) == dir) names.push_back(basename_of(d) + "/");
    for (const auto& [f, _] : s.virtual_fs)
      if (parent_of(f) == dir) names.push_back(basename_of(f));
    std::ranges::sort(names);
    return names.empty() ? std::string("(empty)") : text::join(names, "\n");
  }
  if (c.name == "cat") {
    auto p = abs(c.args[0]);
    if (!is_file(s, p)) return std::nullopt;
    return display(s.virtual_fs.at(p));
  }
  if (c.name == "cd") {
    std::string dir = c.args.empty() ? std::string(kHome) : abs(c.args[0]);
    if (!is_dir(s, dir)) return std::nullopt;
    s.cwd = dir;
    return none;
  }
  if (c.name == "echo") {
    std::string line = text::join(c.args, " ");
    if (c.redirect.empty()) return line.empty() ? none : line;
    auto p = abs(c.redirect_path);
    if (is_dir(s, p) || !is_dir(s, parent_of(p))) return std::nullopt;
    if (c.redirect == ">") {
      s.virtual_fs[p] = line + "\n";
    } else {
      s.virtual_fs[p] += line + "\n";
    }
    return none;
  }
  if (c.name == "touch") {
    auto p = abs(c.args[0]);
    if (is_dir(s, p) || is_file(s, p)) return none;
    if (!is_dir(s, parent_of(p))) return std::nullopt;
    s.virtual_fs[p] = "";
    return none;
  }
  if (c.name == "mkdir") {
    auto p = abs(operand(c));
    if (exists(s, p)) return std::nullopt;
    if (has_flag(c, 'p')) {
      for (std::string q = p; !exists(s, q); q = parent_of(q)) {
        if (is_file(s, q)) return std::nullopt;
        s.directories.insert(q);
      }
      return none;
    }
    if (!is_dir(s, parent_of(p))) return std::nullopt;
    s.directories.insert(p);
    return none;
  }
  if (c.name == "rm") {
    auto p = abs(operand(c));
    if (is_file(s, p)) {
      s.virtual_fs.erase(p);
      return none;
    }
    if (!is_dir(s, p) || !has_flag(c, 'r') || p == "/" || p == s.cwd ||
        s.cwd.starts_with(p + "/"))
      return std::nullopt;
    const std::string prefix = p + "/";
    std::erase_if(s.virtual_fs, [&](const auto& kv) { return kv.first.starts_with(prefix); });
    std::erase_if(s.directories, [&](const auto& d) { return d == p || d.starts_with(prefix); });
    return none;
  }
  if (c.name == "mv" || c.name == "cp") {
    auto src = abs(c.args[0]);
    auto dst = abs(c.args[1]);
    if (!is_file(s, src)) return std::nullopt;
    if (is_dir(s, dst)) dst = join_path(dst, basename_of(src));
    if (dst == src || is_dir(s, dst) || !is_dir(s, parent_of(dst))) return std::nullopt;
    s.virtual_fs[dst] = s.virtual_fs.at(src);
    if (c.name == "mv") s.virtual_fs.erase(src);
    return none;
  }
  if (c.name == "grep") {
    auto p = abs(c.args[1]);
    if (!is_file(s, p)) return std::nullopt;
    std::vector<std::string> hits;
    for (const auto& line : text::split_lines(s.virtual_fs.at(p)))
      if (!line.empty() && line.find(c.args[0]) != std::string::npos) hits.push_back(line);
    return hits.empty() ? std::string("(no matches)") : text::join(hits, "\n");
  }
  return std::nullopt;
}

struct SeedFile {
  const char* path;
  const char* format;  // {} receives a seeded number
};

constexpr std::array<SeedFile, 7> kSeedFiles = {{
    {"/home/user/notes.txt", "meeting moved to {} pm\n"},
    {"/home/user/todo.txt", "buy milk\ncall the landlord\nrenew passport by day {}\n"},
    {"/home/user/data.csv", "id,value\n1,{}\n2,17\n"},
    {"/home/user/docs/readme.md", "# Project {}\n"},
    {"/home/user/logs/app.log", "INFO started\nERROR disk {}% full\n"},
    {"/home/user/logs/old.log", "INFO rotated {} times\n"},
    {"/tmp/scratch.txt", "temp {}\n"},
}};

}  // namespace

std::string resolve(std::string_view cwd, std::string_view path) {
  std::string full = path.starts_with('/') ? std::string(path) : std::string(cwd) + "/" + std::string(path);
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i <= full.size()) {
    auto j = full.find('/', i);
    if (j == std::string::npos) j = full.size();
    std::string seg = full.substr(i, j - i);
    if (seg == "..") {
      if (!parts.empty()) parts.pop_back();
    } else if (!seg.empty() && seg != ".") {
      parts.push_back(std::move(seg));
    }
    i = j + 1;
  }
  if (parts.empty()) return "/";
  std::string out;
  for (const auto& p : parts) out += "/" + p;
  return out;
}

OsTaskState generate(std::uint64_t seed) {
  Rng rng(seed ^ 0x6f737461736b2121ULL);
  OsTaskState s;
  s.directories = {"/", "/home", "/home/user", "/home/user/docs", "/home/user/logs", "/tmp"};
  s.cwd = std::string(kHome);

  std::vector<std::size_t> order(kSeedFiles.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span(order));
  order.resize(static_cast<std::size_t>(rng.between(4, 6)));
  std::ranges::sort(order);
  for (auto i : order)
    s.virtual_fs[kSeedFiles[i].path] = fmt::format(fmt::runtime(kSeedFiles[i].format), rng.between(2, 99));
  std::vector<std::string> files;
  for (const auto& [f, _] : s.virtual_fs) files.push_back(f);

  auto pick = [&](auto const& pool) { return pool[rng.below(std::size(pool))]; };
  GoalCheck& g = s.goal_check;
  switch (rng.below(6)) {
    case 0: {
      static const std::array<const char*, 4> names = {"report.txt", "summary.txt", "draft.txt", "plan.txt"};
      static const std::array<const char*, 3> dirs = {"/home/user/docs", "/home/user", "/tmp"};
      std::string name = pick(names), dir = pick(dirs);
      g = {"file_exists", join_path(dir, name), "", "",
           "Create an empty file named " + name + " in " + dir + "."};
      break;
    }
    case 1: {
      static const std::array<const char*, 3> names = {"greeting.txt", "status.txt", "message.txt"};
      static const std::array<const char*, 3> texts = {"hello world", "backup complete", "build 42 passed"};
      std::string path = join_path(std::string(kHome), pick(names)), t = pick(texts);
      g = {"file_content", path, "", t,
           "Write the text '" + t + "' into the file " + path + "."};
      break;
    }
    case 2: {
      static const std::array<const char*, 3> names = {"archive", "projects", "backup"};
      std::string name = pick(names);
      g = {"dir_exists", join_path(std::string(kHome), name), "", "",
           "Create a directory named " + name + " in " + std::string(kHome) + "."};
      break;
    }
    case 3: {
      std::string f = files[rng.below(files.size())];
      g = {"removed", f, "", "", "Delete the file " + f + "."};
      break;
    }
    case 4: {
      std::string f = files[rng.below(files.size())];
      std::vector<std::string> dirs;
      for (const auto& d : s.directories)
        if (d != "/" && d != "/home" && d != parent_of(f)) dirs.push_back(d);
      std::string d = dirs[rng.below(dirs.size())];
      g = {"moved", f, join_path(d, basename_of(f)), s.virtual_fs.at(f),
           "Move the file " + f + " into the directory " + d + "."};
      break;
    }
    default: {
      std::string f = files[rng.below(files.size())];
      std::string dst = "/tmp/" + basename_of(f) + ".bak";
      g = {"copied", f, dst, s.virtual_fs.at(f), "Copy the file " + f + " to " + dst + "."};
      break;
    }
  }
  return s;
}

std::string reset_observation(const OsTaskState& s) {
  return "You are in a Linux shell. The current directory is " + s.cwd + ".\nTask: " +
         s.goal_check.description + "\nWhen the task is finished, reply with: done";
}

bool goal_holds(const OsTaskState& s) {
  const auto& g = s.goal_check;
  auto content_is = [&](const std::string& p, const std::string& want) {
    auto it = s.virtual_fs.find(p);
    return it != s.virtual_fs.end() && it->second == want;
  };
  if (g.kind == "file_exists") return is_file(s, g.path);
  if (g.kind == "file_content") return content_is(g.path, g.text + "\n");
  if (g.kind == "dir_exists") return is_dir(s, g.path);
  if (g.kind == "removed") return !exists(s, g.path);
  if (g.kind == "moved") return !exists(s, g.path) && content_is(g.target, g.text);
  if (g.kind == "copied") return is_file(s, g.path) && content_is(g.target, g.text);
  return false;
}

StepResult step(OsTaskState& s, std::string_view command) {
  if (s.done) throw EpisodeAlreadyDone();
  ++s.steps_taken;
  std::string cmd_text(text::trim(command));
  auto cmd = parse(cmd_text);
  StepResult r{std::string(kNothingHappens), 0.0, false};
  if (cmd && cmd->name == "done") {
    s.done = true;
    s.reward = goal_holds(s) ? 1.0 : 0.0;
    r = {s.reward > 0 ? "Task submitted. The task is complete." : "Task submitted. The task is not complete.",
         s.reward, true};
  } else if (cmd) {
    if (auto out = run(s, *cmd)) r.observation = std::move(*out);
  }
  s.transcript.emplace_back(cmd_text, r.observation);
  return r;
}

bool parses(std::string_view command) { return parse(command).has_value(); }

std::vector<std::string> candidate_actions(const OsTaskState& s) {
  const auto& g = s.goal_check;
  std::vector<std::string> targets;
  for (const auto& p : {g.path, g.target})
    if (!p.empty()) targets.push_back(p);
  std::vector<std::string> out;
  for (const auto& t : targets) {
    out.push_back("touch " + t);
    out.push_back("mkdir " + t);
  }
  if (g.kind == "file_content") out.push_back("echo '" + g.text + "' > " + g.path);
  for (const auto& [f, _] : s.virtual_fs) {
    out.push_back("rm " + f);
    for (const auto& d : s.directories) {
      out.push_back("mv " + f + " " + d);
      out.push_back("cp " + f + " " + d);
    }
    if (!g.target.empty()) {
      out.push_back("mv " + f + " " + g.target);
      out.push_back("cp " + f + " " + g.target);
    }
  }
  for (const auto& d : s.directories) out.push_back("cd " + d);
  out.push_back("done");
  return out;
}

nlohmann::json to_json(const OsTaskState& s) {
  nlohmann::json j;
  j["virtual_fs"] = s.virtual_fs;
  j["directories"] = s.directories;
  j["cwd"] = s.cwd;
  const auto& g = s.goal_check;
  j["goal_check"] = {{"kind", g.kind},
                     {"path", g.path},
                     {"target", g.target},
                     {"text", g.text},
                     {"description", g.description}};
  auto tr = nlohmann::json::array();
  for (const auto& [c, o] : s.transcript) tr.push_back({c, o});
  j["transcript"] = std::move(tr);
  j["steps_taken"] = s.steps_taken;
  j["done"] = s.done;
  j["reward"] = s.reward;
  return j;
}

OsTaskState from_json(const nlohmann::json& j) {
  OsTaskState s;
  s.virtual_fs = j.at("virtual_fs").get<std::map<std::string, std::string>>();
  s.directories = j.at("directories").get<std::set<std::string>>();
  s.cwd = j.at("cwd").get<std::string>();
  const auto& g = j.at("goal_check");
  s.goal_check = {g.at("kind").get<std::string>(), g.at("path").get<std::string>(),
                  g.at("target").get<std::string>(), g.at("text").get<std::string>(),
                  g.at("description").get<std::string>()};
  for (const auto& e : j.at("transcript"))
    s.transcript.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
  s.steps_taken = j.at("steps_taken").get<int>();
  s.done = j.at("done").get<bool>();
  s.reward = j.at("reward").get<double>();
  return s;
}

}  // namespace agentlab::ostask
