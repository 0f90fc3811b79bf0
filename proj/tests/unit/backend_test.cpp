#include <atomic>
#include <cstdlib>
#include <sstream>
#include <thread>

#include <doctest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "agentlab/backend.hpp"
#include "support.hpp"

using namespace agentlab;
using namespace std::chrono_literals;

namespace {

std::vector<ChatMessage> ask(std::string q) { return {{ChatRole::User, std::move(q)}}; }

BackendError::Kind kind_of_call(ModelBackend& b, const std::vector<ChatMessage>& m) {
  try {
    b.chat(m);
  } catch (const BackendError& e) {
    return e.kind();
  }
  FAIL("expected BackendError");
  return BackendError::Kind::Transport;
}

/// Chat-completion stub on an ephemeral localhost port.
class StubServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit StubServer(Handler h) {
    server_.Post("/v1/chat/completions", [this, h](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      h(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
  }
  std::atomic<int> hits{0};

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string reply(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}
      .dump();
}

HttpBackendConfig http_cfg(const StubServer& s) {
  HttpBackendConfig c;
  c.endpoint_url = s.url();
  c.model_name = "tiny";
  c.timeout_seconds = 2;
  c.max_retries = 3;
  c.initial_backoff = 10ms;
  return c;
}

}  // namespace

TEST_SUITE("backend") {
  TEST_CASE("prompts are validated before any backend work") {
    auto b = ScriptedBackend::from_responses({"x"});
    CHECK(kind_of_call(b, {}) == BackendError::Kind::EmptyPrompt);
    CHECK(kind_of_call(b, {{ChatRole::User, "q"}, {ChatRole::Assistant, "a"}}) ==
          BackendError::Kind::InvalidPrompt);
    CHECK(b.calls() == 0);
    CHECK(b.remaining() == 1);
  }

  TEST_CASE("scripted responses replay in order and then run out") {
    auto b = ScriptedBackend::from_responses({"one", "two"});
    CHECK(b.chat(ask("a")) == "one");
    CHECK(b.chat(ask("b")) == "two");
    CHECK(kind_of_call(b, ask("c")) == BackendError::Kind::ScriptExhausted);
  }

  TEST_CASE("strict scripts require the head rule to match") {
    ScriptedBackend b({{MatchRule::containing("sink"), "go to sink"}, {MatchRule::any(), "look"}},
                      true);
    CHECK(kind_of_call(b, ask("no match here")) == BackendError::Kind::ScriptMismatch);
    CHECK(b.chat(ask("find the sink")) == "go to sink");
    CHECK(b.chat(ask("anything")) == "look");
  }

  TEST_CASE("lenient scripts fire the first matching entry") {
    ScriptedBackend b({{MatchRule::containing("judge"), "Yes"}, {MatchRule::any(), "look"}});
    CHECK(b.chat(ask("act now")) == "look");
    CHECK(b.chat(ask("please judge")) == "Yes");
    CHECK(kind_of_call(b, ask("judge again")) == BackendError::Kind::ScriptExhausted);
  }

  TEST_CASE("script files round-trip and report bad lines") {
    std::vector<ScriptEntry> entries{{MatchRule::containing("a\"b"), "x\ny"}, {MatchRule::any(), "z"}};
    std::stringstream ss;
    write_script(ss, entries);
    auto back = parse_script(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[0].match.contains == "a\"b");
    CHECK(back[0].response == "x\ny");
    CHECK(back[1].match.contains.empty());

    std::istringstream bad("{\"match\":{\"any\":true},\"response\":\"ok\"}\n{\"response\":1}\n");
    try {
      parse_script(bad);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }

  TEST_CASE("backend factory substitutes the seed into script paths") {
    auto dir = testing::scratch_dir("factory");
    testing::spit(dir / "s-42.jsonl", "{\"match\":{\"any\":true},\"response\":\"hello\"}\n");
    auto b = make_backend({{"type", "scripted"}, {"script", "s-{seed}.jsonl"}}, dir, 42);
    CHECK(b->chat(ask("q")) == "hello");
    CHECK_THROWS_AS(make_backend({{"type", "scripted"}, {"script", "s-{seed}.jsonl"}}, dir, 7), Error);
    CHECK_THROWS_AS(make_backend({{"type", "carrier-pigeon"}}, dir), Error);
  }

  TEST_CASE("http: request shape, auth header and reply extraction") {
    std::string body, auth;
    StubServer srv([&](const httplib::Request& req, httplib::Response& res) {
      body = req.body;
      auth = req.get_header_value("Authorization");
      res.set_content(reply("go to sink"), "application/json");
    });
    ::setenv("AGENTLAB_TEST_TOKEN", "sekrit", 1);
    auto cfg = http_cfg(srv);
    cfg.auth_token_env = "AGENTLAB_TEST_TOKEN";
    HttpBackend b(cfg, [](auto) {});
    const std::vector<ChatMessage> msgs{{ChatRole::System, "sys"}, {ChatRole::User, "where?"}};
    CHECK(b.chat(msgs, DecodeParams::judging()) == "go to sink");
    auto j = nlohmann::json::parse(body);
    CHECK(j["model"] == "tiny");
    CHECK(j["messages"].size() == 2);
    CHECK(j["messages"][0]["role"] == "system");
    CHECK(j["temperature"] == 0.0);
    CHECK(auth == "Bearer sekrit");
    CHECK(b.request_body(ask("q"), {}).find("sekrit") == std::string::npos);
  }

  TEST_CASE("http: transient statuses retry with doubling backoff") {
    StubServer srv([&](const httplib::Request&, httplib::Response& res) {
      static std::atomic<int> n{0};
      if (n++ < 2) {
        res.status = 503;
        return;
      }
      res.set_content(reply("ok"), "application/json");
    });
    std::vector<std::chrono::milliseconds> waits;
    HttpBackend b(http_cfg(srv), [&](auto d) { waits.push_back(d); });
    CHECK(b.chat(ask("q")) == "ok");
    CHECK(b.attempts() == 3);
    CHECK(waits == std::vector<std::chrono::milliseconds>{10ms, 20ms});
  }

  TEST_CASE("http: client errors fail fast, exhausted retries surface the status") {
    StubServer bad_request([](const httplib::Request&, httplib::Response& res) { res.status = 400; });
    HttpBackend b(http_cfg(bad_request), [](auto) {});
    try {
      b.chat(ask("q"));
      FAIL("expected BackendError");
    } catch (const BackendError& e) {
      CHECK(e.kind() == BackendError::Kind::HttpStatus);
      CHECK(e.status() == 400);
    }
    CHECK(bad_request.hits == 1);

    StubServer busy([](const httplib::Request&, httplib::Response& res) { res.status = 429; });
    HttpBackend c(http_cfg(busy), [](auto) {});
    CHECK(kind_of_call(c, ask("q")) == BackendError::Kind::HttpStatus);
    CHECK(busy.hits == 4);
  }

  TEST_CASE("http: malformed bodies are not retried") {
    StubServer srv([](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"choices\": []}", "application/json");
    });
    HttpBackend b(http_cfg(srv), [](auto) {});
    CHECK(kind_of_call(b, ask("q")) == BackendError::Kind::MalformedResponse);
    CHECK(srv.hits == 1);
  }

  TEST_CASE("http: slow servers time out") {
    StubServer srv([](const httplib::Request&, httplib::Response& res) {
      std::this_thread::sleep_for(700ms);
      res.set_content(reply("late"), "application/json");
    });
    auto cfg = http_cfg(srv);
    cfg.timeout_seconds = 0.2;
    cfg.max_retries = 0;
    HttpBackend b(cfg, [](auto) {});
    CHECK(kind_of_call(b, ask("q")) == BackendError::Kind::HttpTimeout);
  }

  TEST_CASE("http: unreachable endpoints are transport errors") {
    HttpBackendConfig cfg;
    cfg.endpoint_url = "http://127.0.0.1:1/v1/chat/completions";
    cfg.max_retries = 1;
    cfg.timeout_seconds = 1;
    int sleeps = 0;
    HttpBackend b(cfg, [&](auto) { ++sleeps; });
    auto k = kind_of_call(b, ask("q"));
    CHECK((k == BackendError::Kind::Transport || k == BackendError::Kind::HttpTimeout));
    CHECK(sleeps == 1);
  }
}
