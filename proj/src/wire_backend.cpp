#include "kgqa/wire_backend.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "kgqa/json_repair.hpp"

namespace kgqa {

double RetryPolicy::backoff(std::size_t n) const {
  return base_seconds * std::pow(factor, static_cast<double>(n - 1));
}

Sleeper real_sleeper() {
  return [](double s) {
    std::this_thread::sleep_for(std::chrono::duration<double>(s));
  };
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

HttpResponse HttplibTransport::post(const std::string& base_url,
                                    const std::string& path,
                                    const std::string& body,
                                    const HttpHeaders& headers,
                                    double timeout_seconds) {
  httplib::Client cli(base_url);
  const auto secs = static_cast<time_t>(timeout_seconds);
  const auto usecs = static_cast<time_t>((timeout_seconds - secs) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  httplib::Headers h(headers.begin(), headers.end());
  auto res = cli.Post(path, h, body, "application/json");
  if (!res) {
    const auto err = res.error();
    const std::string what = "POST " + base_url + path + ": " + httplib::to_string(err);
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      throw TimeoutError(what);
    }
    throw BackendError(what);
  }
  return {res->status, res->body};
}

PostResult post_with_retry(HttpTransport& transport, const EndpointConfig& cfg,
                           const std::string& body, const HttpHeaders& headers,
                           const Sleeper& sleep) {
  PostResult out;
  const std::size_t max_attempts = std::max<std::size_t>(1, cfg.retry.max_attempts);
  for (std::size_t attempt = 1;; ++attempt) {
    out.attempts = attempt;
    std::string transient;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      out.response =
          transport.post(cfg.base_url, cfg.path, body, headers, cfg.timeout_seconds);
    } catch (const TimeoutError& e) {
      transient = e.what();
    }
    out.wall_seconds +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (transient.empty()) {
      const int s = out.response.status;
      if (s == 401 || s == 403) {
        throw AuthError("endpoint rejected credentials (HTTP " +
                        std::to_string(s) + ")");
      }
      if (s == 429 || s >= 500) {
        transient = "HTTP " + std::to_string(s);
      } else if (s < 200 || s >= 300) {
        throw BackendError("endpoint returned HTTP " + std::to_string(s));
      } else {
        return out;
      }
    }
    if (attempt >= max_attempts) {
      throw TimeoutError("giving up after " + std::to_string(attempt) +
                         " attempts: " + transient);
    }
    const double wait = cfg.retry.backoff(attempt);
    spdlog::warn("transient failure ({}); retrying in {:.1f}s", transient, wait);
    sleep(wait);
    out.wall_seconds += wait;
  }
}

HttpHeaders auth_headers(const EndpointConfig& cfg, const EnvLookup& env) {
  HttpHeaders h;
  if (cfg.api_key_env.empty()) return h;
  const auto token = env(cfg.api_key_env);
  if (!token || token->empty()) {
    throw AuthError("environment variable " + cfg.api_key_env +
                    " holds no API token");
  }
  h["Authorization"] = "Bearer " + *token;
  return h;
}

WireBackend::WireBackend(EndpointConfig cfg,
                         std::shared_ptr<HttpTransport> transport, Sleeper sleep,
                         EnvLookup env)
    : cfg_(std::move(cfg)),
      transport_(std::move(transport)),
      sleep_(std::move(sleep)),
      env_(std::move(env)) {}

std::string WireBackend::request_body(const std::string& model,
                                      const RenderedPrompt& prompt,
                                      const DecodeParams& params) {
  Json body{{"model", model},
            {"messages",
             Json::array({{{"role", "system"}, {"content", prompt.system}},
                          {{"role", "user"}, {"content", prompt.user}}})},
            {"temperature", params.temperature},
            {"top_p", params.top_p}};
  if (params.max_tokens) body["max_tokens"] = *params.max_tokens;
  return body.dump();
}

Completion WireBackend::complete(const RenderedPrompt& prompt,
                                 const DecodeParams& params) {
  const auto headers = auth_headers(cfg_, env_);
  const auto result = post_with_retry(
      *transport_, cfg_, request_body(cfg_.model, prompt, params), headers, sleep_);
  const Json j = Json::parse(result.response.body, nullptr, false);
  if (j.is_discarded()) throw MalformedResponse("response body is not JSON");
  Completion c;
  try {
    c.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const Json::exception&) {
    throw MalformedResponse("response lacks choices[0].message.content");
  }
  if (j.contains("usage") && j["usage"].is_object()) {
    c.prompt_tokens = j["usage"].value("prompt_tokens", std::size_t{0});
    c.completion_tokens = j["usage"].value("completion_tokens", std::size_t{0});
  } else {
    c.prompt_tokens = whitespace_tokens(prompt.system) + whitespace_tokens(prompt.user);
    c.completion_tokens = whitespace_tokens(c.text);
  }
  c.attempts = result.attempts;
  c.wall_seconds = result.wall_seconds;
  return c;
}

RemoteEmbedder::RemoteEmbedder(EndpointConfig cfg, std::size_t dimension,
                               std::shared_ptr<HttpTransport> transport,
                               Sleeper sleep, EnvLookup env)
    : cfg_(std::move(cfg)),
      dimension_(dimension),
      transport_(std::move(transport)),
      sleep_(std::move(sleep)),
      env_(std::move(env)) {
  if (cfg_.path == EndpointConfig{}.path) cfg_.path = "/v1/embeddings";
}

Vector RemoteEmbedder::embed(std::string_view text) const {
  const Json body{{"model", cfg_.model}, {"input", std::string(text)}};
  const auto result =
      post_with_retry(*transport_, cfg_, body.dump(), auth_headers(cfg_, env_), sleep_);
  const Json j = Json::parse(result.response.body, nullptr, false);
  Vector v;
  try {
    v = j.at("data").at(0).at("embedding").get<Vector>();
  } catch (const Json::exception&) {
    throw MalformedResponse("response lacks data[0].embedding");
  }
  if (v.size() != dimension_) throw DimensionMismatch(dimension_, v.size());
  return v;
}

std::string RemoteEmbedder::fingerprint() const {
  return "remote:" + cfg_.model + ":d" + std::to_string(dimension_);
}

}  // namespace kgqa
