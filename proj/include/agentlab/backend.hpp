// Chat-completion backends: a deterministic scripted replayer for tests and
// offline experiments, and an HTTP client for live endpoints.
#pragma once

#include <chrono>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "agentlab/core.hpp"

namespace agentlab {

struct DecodeParams {
  double temperature = 0.7;
  int max_output_tokens = 512;
  std::vector<std::string> stop_sequences;

  /// Planner and judge calls: stable output.
  static DecodeParams judging() { return {0.0, 512, {}}; }
  /// Actor and data-generator calls.
  static DecodeParams generation() { return {0.7, 512, {}}; }
};

class BackendError : public Error {
 public:
  enum class Kind {
    EmptyPrompt,
    InvalidPrompt,
    ScriptExhausted,
    ScriptMismatch,
    HttpTimeout,
    HttpStatus,
    MalformedResponse,
    Transport,
  };

  BackendError(Kind kind, const std::string& what, int status = 0)
      : Error(what), kind_(kind), status_(status) {}

  Kind kind() const { return kind_; }
  /// HTTP status code for Kind::HttpStatus, else 0.
  int status() const { return status_; }

 private:
  Kind kind_;
  int status_;
};

std::string_view to_string(BackendError::Kind k);

/// M(y|x): maps a chat history to the assistant's reply.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  /// Validates the prompt, then delegates to complete(). The message list is
  /// never modified.
  std::string chat(std::span<const ChatMessage> messages,
                   const DecodeParams& params = {});

 protected:
  virtual std::string complete(std::span<const ChatMessage> messages,
                               const DecodeParams& params) = 0;
};

/// Concatenation of every message's content, newline-joined. This is the
/// text scripted match rules are tested against.
std::string prompt_text(std::span<const ChatMessage> messages);

// ---------------------------------------------------------------------------

struct MatchRule {
  /// Empty means "any".
  std::string contains;

  bool matches(std::string_view prompt) const;
  static MatchRule any() { return {}; }
  static MatchRule containing(std::string s) { return {std::move(s)}; }
};

struct ScriptEntry {
  MatchRule match;
  std::string response;
};

/// Replays queued responses. In strict mode every call must match the head
/// of the queue. Otherwise the first matching entry in queue order fires.
/// Single-owner: not safe for concurrent calls.
class ScriptedBackend : public ModelBackend {
 public:
  explicit ScriptedBackend(std::vector<ScriptEntry> script, bool strict = false);

  /// Convenience: every entry matches anything.
  static ScriptedBackend from_responses(std::vector<std::string> responses,
                                        bool strict = false);

  std::size_t calls() const { return calls_; }
  std::size_t remaining() const { return queue_.size(); }
  bool strict() const { return strict_; }

 protected:
  std::string complete(std::span<const ChatMessage> messages,
                       const DecodeParams& params) override;

 private:
  std::deque<ScriptEntry> queue_;
  bool strict_;
  std::size_t calls_ = 0;
};

/// Script file: JSONL, one {"match": {"contains": s} | {"any": true},
/// "response": s} per line. Blank lines are ignored.
std::vector<ScriptEntry> parse_script(std::istream& in);
ScriptedBackend load_script(const std::filesystem::path& path, bool strict = false);
void write_script(std::ostream& out, const std::vector<ScriptEntry>& entries);

// ---------------------------------------------------------------------------

struct HttpBackendConfig {
  std::string endpoint_url;  // e.g. http://127.0.0.1:8000/v1/chat/completions
  std::string model_name;
  std::string auth_token_env;  // environment variable holding the bearer token
  double timeout_seconds = 60.0;
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{1000};
};

/// POSTs the chat-completion JSON shape and reads choices[0].message.content.
/// Safe for concurrent calls; each attempt opens its own connection.
class HttpBackend : public ModelBackend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit HttpBackend(HttpBackendConfig cfg, Sleeper sleeper = {});

  const HttpBackendConfig& config() const { return cfg_; }
  /// Total HTTP attempts made over the backend's lifetime.
  std::size_t attempts() const;

  /// Request body for a call, without the auth header.
  std::string request_body(std::span<const ChatMessage> messages,
                           const DecodeParams& params) const;

 protected:
  std::string complete(std::span<const ChatMessage> messages,
                       const DecodeParams& params) override;

 private:
  std::string attempt(const std::string& body) const;

  HttpBackendConfig cfg_;
  Sleeper sleep_;
  std::string scheme_host_port_;
  std::string path_;
  mutable std::mutex mu_;
  std::size_t attempts_ = 0;
};

/// Builds a backend from a JSON config:
///   {"type": "scripted", "script": "path.jsonl", "strict": false}
///   {"type": "http", "endpoint": url, "model": name, "auth_env": VAR,
///    "timeout": seconds, "max_retries": n}
/// Relative script paths resolve against `base_dir`. Every "{seed}" in a
/// script path is replaced by `seed` when given.
std::unique_ptr<ModelBackend> make_backend(const nlohmann::json& cfg,
                                           const std::filesystem::path& base_dir,
                                           std::optional<std::uint64_t> seed = {});

}  // namespace agentlab
