#include "agentlab/backend.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "agentlab/text.hpp"

namespace agentlab {

using json = nlohmann::json;

std::string_view to_string(BackendError::Kind k) {
  using K = BackendError::Kind;
  switch (k) {
    case K::EmptyPrompt: return "EmptyPrompt";
    case K::InvalidPrompt: return "InvalidPrompt";
    case K::ScriptExhausted: return "ScriptExhausted";
    case K::ScriptMismatch: return "ScriptMismatch";
    case K::HttpTimeout: return "HttpTimeout";
    case K::HttpStatus: return "HttpStatus";
    case K::MalformedResponse: return "MalformedResponse";
    case K::Transport: return "Transport";
  }
  return "?";
}

std::string ModelBackend::chat(std::span<const ChatMessage> messages,
                               const DecodeParams& params) {
  if (messages.empty())
    throw BackendError(BackendError::Kind::EmptyPrompt, "empty prompt");
  if (messages.back().role == ChatRole::Assistant)
    throw BackendError(BackendError::Kind::InvalidPrompt,
                       "last message must be from user or system");
  return complete(messages, params);
}

std::string prompt_text(std::span<const ChatMessage> messages) {
  std::string out;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (i) out += '\n';
    out += messages[i].content;
  }
  return out;
}

bool MatchRule::matches(std::string_view prompt) const {
  return contains.empty() || prompt.find(contains) != std::string_view::npos;
}

// ---------------------------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> script, bool strict)
    : queue_(script.begin(), script.end()), strict_(strict) {}

ScriptedBackend ScriptedBackend::from_responses(std::vector<std::string> responses,
                                                bool strict) {
  std::vector<ScriptEntry> entries;
  for (auto& r : responses) entries.push_back({MatchRule::any(), std::move(r)});
  return ScriptedBackend(std::move(entries), strict);
}

std::string ScriptedBackend::complete(std::span<const ChatMessage> messages,
                                      const DecodeParams&) {
  ++calls_;
  if (queue_.empty())
    throw BackendError(BackendError::Kind::ScriptExhausted,
                       fmt::format("script exhausted at call {}", calls_));
  const std::string prompt = prompt_text(messages);
  if (strict_) {
    if (!queue_.front().match.matches(prompt))
      throw BackendError(BackendError::Kind::ScriptMismatch,
                         fmt::format("call {} does not match the next script rule "
                                     "(contains \"{}\")",
                                     calls_, queue_.front().match.contains));
    std::string r = std::move(queue_.front().response);
    queue_.pop_front();
    return r;
  }
  for (auto it = queue_.begin(); it != queue_.end(); ++it) {
    if (it->match.matches(prompt)) {
      std::string r = std::move(it->response);
      queue_.erase(it);
      return r;
    }
  }
  throw BackendError(BackendError::Kind::ScriptMismatch,
                     fmt::format("no script rule matches call {}", calls_));
}

std::vector<ScriptEntry> parse_script(std::istream& in) {
  std::vector<ScriptEntry> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(n, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("match") || !j.contains("response") ||
        !j["response"].is_string() || !j["match"].is_object())
      throw ParseError(n, "script entry needs a 'match' object and a 'response' string");
    const auto& m = j["match"];
    ScriptEntry e;
    e.response = j["response"].get<std::string>();
    if (m.contains("contains") && m["contains"].is_string() && m.size() == 1) {
      e.match = MatchRule::containing(m["contains"].get<std::string>());
      if (e.match.contains.empty()) throw ParseError(n, "'contains' must be non-empty");
    } else if (m.contains("any") && m["any"] == true && m.size() == 1) {
      e.match = MatchRule::any();
    } else {
      throw ParseError(n, "match must be {\"contains\": str} or {\"any\": true}");
    }
    out.push_back(std::move(e));
  }
  return out;
}

ScriptedBackend load_script(const std::filesystem::path& path, bool strict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open script " + path.string());
  return ScriptedBackend(parse_script(in), strict);
}

void write_script(std::ostream& out, const std::vector<ScriptEntry>& entries) {
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    if (e.match.contains.empty()) {
      j["match"] = {{"any", true}};
    } else {
      j["match"] = {{"contains", e.match.contains}};
    }
    j["response"] = e.response;
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------

namespace {

bool retriable_status(int status) {
  return status == 408 || status == 429 || status >= 500;
}

}  // namespace

HttpBackend::HttpBackend(HttpBackendConfig cfg, Sleeper sleeper)
    : cfg_(std::move(cfg)), sleep_(std::move(sleeper)) {
  if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (cfg_.timeout_seconds <= 0) throw Error("timeout_seconds must be positive");
  if (cfg_.max_retries < 0) throw Error("max_retries must be non-negative");
  const auto& url = cfg_.endpoint_url;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("endpoint_url needs a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

std::size_t HttpBackend::attempts() const {
  std::lock_guard lock(mu_);
  return attempts_;
}

std::string HttpBackend::request_body(std::span<const ChatMessage> messages,
                                      const DecodeParams& params) const {
  nlohmann::ordered_json body;
  body["model"] = cfg_.model_name;
  auto msgs = nlohmann::ordered_json::array();
  for (const auto& m : messages)
    msgs.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  body["messages"] = std::move(msgs);
  body["temperature"] = params.temperature;
  body["max_tokens"] = params.max_output_tokens;
  body["stop"] = params.stop_sequences;
  return body.dump();
}

std::string HttpBackend::attempt(const std::string& body) const {
  httplib::Client cli(scheme_host_port_);
  const auto secs = static_cast<time_t>(cfg_.timeout_seconds);
  const auto usecs = static_cast<time_t>((cfg_.timeout_seconds - secs) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (!cfg_.auth_token_env.empty()) {
    if (const char* tok = std::getenv(cfg_.auth_token_env.c_str()); tok && *tok)
      headers.emplace("Authorization", std::string("Bearer ") + tok);
  }
  auto res = cli.Post(path_, headers, body, "application/json");
  if (!res) {
    auto err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
      throw BackendError(BackendError::Kind::HttpTimeout,
                         "request timed out: " + httplib::to_string(err));
    throw BackendError(BackendError::Kind::Transport,
                       "transport error: " + httplib::to_string(err));
  }
  if (res->status != 200)
    throw BackendError(BackendError::Kind::HttpStatus,
                       fmt::format("HTTP status {}", res->status), res->status);

  json j;
  try {
    j = json::parse(res->body);
  } catch (const json::parse_error&) {
    throw BackendError(BackendError::Kind::MalformedResponse, "response is not JSON");
  }
  const json* content = nullptr;
  if (j.is_object() && j.contains("choices") && j["choices"].is_array() &&
      !j["choices"].empty()) {
    const auto& c0 = j["choices"][0];
    if (c0.is_object() && c0.contains("message") && c0["message"].is_object() &&
        c0["message"].contains("content"))
      content = &c0["message"]["content"];
  }
  if (!content || !content->is_string())
    throw BackendError(BackendError::Kind::MalformedResponse,
                       "response lacks choices[0].message.content");
  return content->get<std::string>();
}

std::string HttpBackend::complete(std::span<const ChatMessage> messages,
                                  const DecodeParams& params) {
  const std::string body = request_body(messages, params);
  auto backoff = cfg_.initial_backoff;
  for (int retry = 0;; ++retry) {
    {
      std::lock_guard lock(mu_);
      ++attempts_;
    }
    try {
      return attempt(body);
    } catch (const BackendError& e) {
      bool transient = e.kind() == BackendError::Kind::HttpTimeout ||
                       e.kind() == BackendError::Kind::Transport ||
                       (e.kind() == BackendError::Kind::HttpStatus &&
                        retriable_status(e.status()));
      if (!transient || retry >= cfg_.max_retries) throw;
    }
    sleep_(backoff);
    backoff *= 2;
  }
}

// ---------------------------------------------------------------------------

std::unique_ptr<ModelBackend> make_backend(const json& cfg,
                                           const std::filesystem::path& base_dir,
                                           std::optional<std::uint64_t> seed) {
  if (!cfg.is_object() || !cfg.contains("type") || !cfg["type"].is_string())
    throw Error("backend config needs a string 'type'");
  const auto type = cfg["type"].get<std::string>();
  if (type == "scripted") {
    if (!cfg.contains("script") || !cfg["script"].is_string())
      throw Error("scripted backend needs 'script'");
    std::string path = cfg["script"].get<std::string>();
    if (seed) {
      for (auto pos = path.find("{seed}"); pos != std::string::npos;
           pos = path.find("{seed}", pos))
        path.replace(pos, 6, std::to_string(*seed));
    }
    std::filesystem::path p(path);
    if (p.is_relative()) p = base_dir / p;
    return std::make_unique<ScriptedBackend>(load_script(p, cfg.value("strict", false)));
  }
  if (type == "http") {
    HttpBackendConfig hc;
    hc.endpoint_url = cfg.value("endpoint", std::string());
    hc.model_name = cfg.value("model", std::string());
    hc.auth_token_env = cfg.value("auth_env", std::string());
    hc.timeout_seconds = cfg.value("timeout", 60.0);
    hc.max_retries = cfg.value("max_retries", 3);
    if (hc.endpoint_url.empty()) throw Error("http backend needs 'endpoint'");
    return std::make_unique<HttpBackend>(std::move(hc));
  }
  throw Error("unknown backend type '" + type + "'");
}

}  // namespace agentlab
