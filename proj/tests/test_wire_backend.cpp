#include <gtest/gtest.h>
#include <httplib.h>

#include <deque>
#include <thread>

#include "kgqa/json_repair.hpp"
#include "kgqa/wire_backend.hpp"

using namespace kgqa;

namespace {

class FakeTransport final : public HttpTransport {
 public:
  struct Call {
    std::string url, path, body;
    HttpHeaders headers;
  };
  std::deque<std::optional<HttpResponse>> replies;  // nullopt = timeout
  std::vector<Call> calls;

  HttpResponse post(const std::string& base_url, const std::string& path,
                    const std::string& body, const HttpHeaders& headers,
                    double) override {
    calls.push_back({base_url, path, body, headers});
    auto r = replies.front();
    replies.pop_front();
    if (!r) throw TimeoutError("fake timeout");
    return *r;
  }
};

EnvLookup env_with(std::string token) {
  return [token](const std::string& name) -> std::optional<std::string> {
    if (name == "TEST_TOKEN") return token;
    return std::nullopt;
  };
}

EndpointConfig test_endpoint() {
  EndpointConfig c;
  c.base_url = "http://example.invalid";
  c.model = "test-model";
  c.api_key_env = "TEST_TOKEN";
  c.retry.max_attempts = 3;
  return c;
}

std::string chat_reply(const std::string& content) {
  return Json{{"choices", Json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})},
              {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 2}}}}
      .dump();
}

RenderedPrompt sample_prompt() {
  RenderedPrompt p;
  p.key = PromptKey::final_reason;
  p.system = "sys";
  p.user = "user text";
  p.context = {{"question", "not sent"}};
  return p;
}

}  // namespace

TEST(Wire, BackoffIsExponential) {
  RetryPolicy r;
  EXPECT_DOUBLE_EQ(r.backoff(1), 1.0);
  EXPECT_DOUBLE_EQ(r.backoff(2), 2.0);
  EXPECT_DOUBLE_EQ(r.backoff(4), 8.0);
}

TEST(Wire, RetriesTransientFailuresWithNominalBackoff) {
  FakeTransport t;
  t.replies = {std::nullopt, HttpResponse{429, ""}, HttpResponse{200, "ok"}};
  std::vector<double> slept;
  const auto r = post_with_retry(t, test_endpoint(), "{}", {}, [&](double s) { slept.push_back(s); });
  EXPECT_EQ(r.attempts, 3u);
  EXPECT_EQ(r.response.body, "ok");
  EXPECT_EQ(slept, (std::vector<double>{1.0, 2.0}));
  EXPECT_GE(r.wall_seconds, 3.0);
}

TEST(Wire, GivesUpAfterMaxAttempts) {
  FakeTransport t;
  t.replies = {HttpResponse{503, ""}, HttpResponse{500, ""}, HttpResponse{502, ""}};
  EXPECT_THROW(post_with_retry(t, test_endpoint(), "{}", {}, [](double) {}), TimeoutError);
  EXPECT_EQ(t.calls.size(), 3u);
}

TEST(Wire, AuthAndClientErrorsAreNotRetried) {
  FakeTransport t;
  t.replies = {HttpResponse{401, ""}};
  EXPECT_THROW(post_with_retry(t, test_endpoint(), "{}", {}, [](double) {}), AuthError);
  t.replies = {HttpResponse{400, "bad"}};
  t.calls.clear();
  EXPECT_THROW(post_with_retry(t, test_endpoint(), "{}", {}, [](double) {}), BackendError);
  EXPECT_EQ(t.calls.size(), 1u);
}

TEST(Wire, AuthHeaderComesFromTheNamedVariable) {
  const auto h = auth_headers(test_endpoint(), env_with("sekret"));
  EXPECT_EQ(h.at("Authorization"), "Bearer sekret");
  EXPECT_THROW(auth_headers(test_endpoint(), env_with("")), AuthError);
  auto open = test_endpoint();
  open.api_key_env.clear();
  EXPECT_TRUE(auth_headers(open, env_with("")).empty());
}

TEST(Wire, RequestBodyFollowsChatSchema) {
  DecodeParams d;
  d.max_tokens = 64;
  const auto body = Json::parse(WireBackend::request_body("m", sample_prompt(), d));
  EXPECT_EQ(body["model"], "m");
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][0]["content"], "sys");
  EXPECT_EQ(body["messages"][1]["role"], "user");
  EXPECT_EQ(body["messages"][1]["content"], "user text");
  EXPECT_DOUBLE_EQ(body["temperature"].get<double>(), 0.3);
  EXPECT_DOUBLE_EQ(body["top_p"].get<double>(), 1.0);
  EXPECT_EQ(body["max_tokens"], 64);
  EXPECT_EQ(body.dump().find("not sent"), std::string::npos);
}

TEST(Wire, CompleteParsesContentAndUsage) {
  auto t = std::make_shared<FakeTransport>();
  t->replies = {HttpResponse{200, chat_reply("Erin_Wagner")}};
  WireBackend b(test_endpoint(), t, [](double) {}, env_with("tok"));
  const auto c = b.complete(sample_prompt(), {});
  EXPECT_EQ(c.text, "Erin_Wagner");
  EXPECT_EQ(c.prompt_tokens, 11u);
  EXPECT_EQ(c.completion_tokens, 2u);
  EXPECT_EQ(t->calls[0].path, "/v1/chat/completions");
  EXPECT_EQ(t->calls[0].headers.at("Authorization"), "Bearer tok");
}

TEST(Wire, MalformedBodiesRaise) {
  auto t = std::make_shared<FakeTransport>();
  t->replies = {HttpResponse{200, "<html>"}, HttpResponse{200, "{\"choices\": []}"}};
  WireBackend b(test_endpoint(), t, [](double) {}, env_with("tok"));
  EXPECT_THROW(b.complete(sample_prompt(), {}), MalformedResponse);
  EXPECT_THROW(b.complete(sample_prompt(), {}), MalformedResponse);
}

TEST(Wire, RemoteEmbedderUsesEmbeddingsPath) {
  auto t = std::make_shared<FakeTransport>();
  t->replies = {HttpResponse{200, R"({"data": [{"embedding": [0.5, 0.5]}]})"},
                HttpResponse{200, R"({"data": [{"embedding": [1, 2, 3]}]})"}};
  RemoteEmbedder e(test_endpoint(), 2, t, [](double) {}, env_with("tok"));
  EXPECT_EQ(e.embed("x"), (Vector{0.5, 0.5}));
  EXPECT_EQ(t->calls[0].path, "/v1/embeddings");
  EXPECT_EQ(Json::parse(t->calls[0].body)["input"], "x");
  EXPECT_THROW(e.embed("y"), DimensionMismatch);
  EXPECT_EQ(e.fingerprint(), "remote:test-model:d2");
}

TEST(Wire, HttplibTransportTalksToALocalServer) {
  httplib::Server srv;
  std::string seen_auth;
  srv.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    const auto body = Json::parse(req.body);
    res.set_content(chat_reply("echo: " + body["messages"][1]["content"].get<std::string>()),
                    "application/json");
  });
  const int port = srv.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  auto cfg = test_endpoint();
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
  cfg.timeout_seconds = 5;
  WireBackend b(cfg, std::make_shared<HttplibTransport>(), [](double) {}, env_with("tok"));
  const auto c = b.complete(sample_prompt(), {});
  srv.stop();
  th.join();
  EXPECT_EQ(c.text, "echo: user text");
  EXPECT_EQ(seen_auth, "Bearer tok");
}
