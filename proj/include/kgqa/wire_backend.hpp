#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "kgqa/embed_index.hpp"
#include "kgqa/llm_backend.hpp"

namespace kgqa {

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::map<std::string, std::string>;

/// POST transport. Implementations throw TimeoutError for timeouts and
/// BackendError for other transport failures.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& base_url, const std::string& path,
                            const std::string& body, const HttpHeaders& headers,
                            double timeout_seconds) = 0;
};

/// cpp-httplib client; https needs the library built with OpenSSL.
class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse post(const std::string& base_url, const std::string& path,
                    const std::string& body, const HttpHeaders& headers,
                    double timeout_seconds) override;
};

struct RetryPolicy {
  std::size_t max_attempts = 5;
  double base_seconds = 1.0;
  double factor = 2.0;

  /// Backoff before attempt `n + 1`, for n >= 1.
  double backoff(std::size_t n) const;
};

using Sleeper = std::function<void(double seconds)>;
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

Sleeper real_sleeper();
EnvLookup process_env();

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  double timeout_seconds = 60.0;
  std::size_t max_concurrency = 4;
  RetryPolicy retry;
};

struct PostResult {
  HttpResponse response;
  std::size_t attempts = 0;
  double wall_seconds = 0.0;  // measured attempts plus nominal backoff
};

/// Timeouts and 429/5xx statuses are retried with exponential backoff;
/// 401/403 raise AuthError immediately.
PostResult post_with_retry(HttpTransport& transport, const EndpointConfig& cfg,
                           const std::string& body, const HttpHeaders& headers,
                           const Sleeper& sleep);

HttpHeaders auth_headers(const EndpointConfig& cfg, const EnvLookup& env);

/// Chat-completions client: messages array, model, temperature, top_p.
class WireBackend final : public LlmBackend {
 public:
  WireBackend(EndpointConfig cfg, std::shared_ptr<HttpTransport> transport,
              Sleeper sleep = real_sleeper(), EnvLookup env = process_env());

  Completion complete(const RenderedPrompt& prompt,
                      const DecodeParams& params) override;
  BackendCaps caps() const override { return {false, cfg_.max_concurrency}; }
  std::string name() const override { return "wire:" + cfg_.model; }

  static std::string request_body(const std::string& model,
                                  const RenderedPrompt& prompt,
                                  const DecodeParams& params);

 private:
  EndpointConfig cfg_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleep_;
  EnvLookup env_;
};

/// Embeddings over the same wire conventions. The chat-completions default
/// path is swapped for "/v1/embeddings".
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(EndpointConfig cfg, std::size_t dimension,
                 std::shared_ptr<HttpTransport> transport,
                 Sleeper sleep = real_sleeper(), EnvLookup env = process_env());

  Vector embed(std::string_view text) const override;
  std::string fingerprint() const override;
  std::size_t dimension() const override { return dimension_; }

 private:
  EndpointConfig cfg_;
  std::size_t dimension_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleep_;
  EnvLookup env_;
};

}  // namespace kgqa
