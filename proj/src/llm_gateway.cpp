#include "kgqa/llm_gateway.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <stdexcept>

#include "kgqa/hash.hpp"
#include "kgqa/text.hpp"

namespace kgqa {

std::size_t whitespace_tokens(std::string_view text) {
  std::size_t n = 0;
  bool in_token = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r';
    if (!space && !in_token) ++n;
    in_token = !space;
  }
  return n;
}

std::string Plan::fill(std::string_view entity) const {
  std::string out = declarative_statement;
  const auto pos = out.find(kPlaceholder);
  if (pos != std::string::npos) out.replace(pos, kPlaceholder.size(), entity);
  return out;
}

Json Plan::to_json() const {
  return Json{{"keywords", keywords},
              {"planning_steps", planning_steps},
              {"declarative_statement", declarative_statement},
              {"degraded", degraded}};
}

Plan Plan::from_json(const Json& j) {
  Plan p;
  p.keywords = j.at("keywords").get<std::vector<std::string>>();
  p.planning_steps = j.at("planning_steps").get<std::vector<std::string>>();
  p.declarative_statement = j.at("declarative_statement").get<std::string>();
  p.degraded = j.value("degraded", false);
  return p;
}

bool valid_statement(std::string_view statement) {
  const auto first = statement.find(kPlaceholder);
  if (first == std::string_view::npos) return false;
  return statement.find(kPlaceholder, first + 1) == std::string_view::npos;
}

Plan degraded_plan(std::string_view question) {
  Plan p;
  p.keywords = content_words(question);
  if (p.keywords.empty()) p.keywords = word_tokens(question);
  if (p.keywords.empty()) p.keywords.emplace_back(trim(question));
  p.declarative_statement =
      std::string(trim(question)) + " The answer is " + std::string(kPlaceholder) + ".";
  p.degraded = true;
  return p;
}

namespace {

bool stringify_list(Json& j, const char* field, bool allow_scalar) {
  if (!j.contains(field)) return false;
  Json& v = j[field];
  if (v.is_string() && allow_scalar) v = Json::array({v.get<std::string>()});
  if (!v.is_array()) return false;
  for (auto& item : v) {
    if (!item.is_string()) {
      spdlog::warn("plan field '{}' held a non-string item; stringified", field);
      item = item.dump();
    }
  }
  return true;
}

}  // namespace

bool repair_plan_json(Json& j) {
  if (!j.is_object()) return false;
  if (!stringify_list(j, "keywords", true) || j["keywords"].empty()) {
    return false;
  }
  if (!stringify_list(j, "planning_steps", true)) return false;
  const auto it = j.find("declarative_statement");
  if (it == j.end() || !it->is_string()) return false;
  return valid_statement(it->get<std::string>());
}

std::optional<bool> classify_yes_no(std::string_view text) {
  const auto tokens = word_tokens(text);
  if (tokens.empty()) return std::nullopt;
  if (tokens.front() == "yes") return true;
  if (tokens.front() == "no") return false;
  return std::nullopt;
}

DualVerdict parse_dual_verdict(std::string_view text) {
  const auto tokens = word_tokens(text);
  std::optional<bool> step;
  std::optional<bool> conclusion;
  std::vector<bool> bare;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const bool is_yes = tokens[i] == "yes";
    if (is_yes || tokens[i] == "no") bare.push_back(is_yes);
    if (i + 1 < tokens.size() &&
        (tokens[i + 1] == "yes" || tokens[i + 1] == "no")) {
      const bool v = tokens[i + 1] == "yes";
      if (tokens[i] == "step" && !step) step = v;
      if (tokens[i] == "conclusion" && !conclusion) conclusion = v;
    }
  }
  if (step && conclusion) return {*step, *conclusion, true};
  DualVerdict d;
  if (bare.size() >= 2) {
    d.step = bare[0];
    d.conclusion = bare[1];
  } else if (bare.size() == 1) {
    d.step = d.conclusion = bare[0];
  }
  spdlog::warn("verification answer without both labelled verdicts: '{}'",
               std::string(trim(text)).substr(0, 80));
  return d;
}

Json UsageSnapshot::to_json() const {
  return Json{{"llm_calls", llm_calls},
              {"retry_calls", retry_calls},
              {"prompt_tokens", prompt_tokens},
              {"completion_tokens", completion_tokens},
              {"transport_attempts", transport_attempts},
              {"wall_seconds", wall_seconds},
              {"calls_by_key", calls_by_key}};
}

void UsageLedger::book(PromptKey key, const Completion& c, bool retry) {
  std::lock_guard lock(mu_);
  ++s_.llm_calls;
  if (retry) ++s_.retry_calls;
  s_.prompt_tokens += c.prompt_tokens;
  s_.completion_tokens += c.completion_tokens;
  s_.transport_attempts += c.attempts;
  s_.wall_seconds += c.wall_seconds;
  ++s_.calls_by_key[std::string(to_string(key))];
}

UsageSnapshot UsageLedger::snapshot() const {
  std::lock_guard lock(mu_);
  return s_;
}

void UsageLedger::reset() {
  std::lock_guard lock(mu_);
  s_ = {};
}

Gateway::Gateway(LlmBackend& backend, const PromptCatalog& catalog,
                 DecodeParams params, std::size_t json_retries)
    : backend_(backend),
      catalog_(catalog),
      params_(params),
      json_retries_(json_retries) {}

Completion Gateway::call(const RenderedPrompt& prompt, bool is_retry,
                         TraceSink* sink) {
  const auto t0 = std::chrono::steady_clock::now();
  Completion c;
  try {
    c = backend_.complete(prompt, params_);
  } catch (...) {
    Completion failed;
    failed.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    ledger_.book(prompt.key, failed, is_retry);
    throw;
  }
  if (c.wall_seconds == 0.0) {
    c.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
  }
  ledger_.book(prompt.key, c, is_retry);
  if (TraceSink* out = sink ? sink : trace_) {
    std::string bindings;
    for (const auto& [k, v] : prompt.context) {
      bindings += k;
      bindings += '=';
      bindings += v;
      bindings += '\x1f';
    }
    out->write(Json{{"type", "llm_call"},
                    {"key", to_string(prompt.key)},
                    {"prompt_digest", prompt.digest()},
                    {"bindings_digest", hex_digest(bindings)},
                    {"retry", is_retry},
                    {"response", c.text},
                    {"prompt_tokens", c.prompt_tokens},
                    {"completion_tokens", c.completion_tokens}});
  }
  return c;
}

Json Gateway::complete_json(const RenderedPrompt& prompt, JsonHint hint,
                            std::size_t retries, const Accept& accept,
                            TraceSink* sink) {
  std::string last;
  for (std::size_t attempt = 0; attempt <= retries; ++attempt) {
    last = call(prompt, attempt > 0, sink).text;
    if (auto j = extract_json(last, hint)) {
      if (!accept || accept(*j)) return *j;
    }
  }
  throw JsonFailure(last, retries + 1);
}

Plan Gateway::generate_plan(std::string_view question) {
  if (trim(question).empty()) {
    throw std::invalid_argument("question must be non-empty");
  }
  const auto prompt = render(PromptKey::plan_and_solve,
                             {{"Query", std::string(question)}},
                             {{"question", std::string(question)}});
  try {
    const Json j =
        complete_json(prompt, JsonHint::object, json_retries_, repair_plan_json);
    return Plan::from_json(j);
  } catch (const JsonFailure& e) {
    spdlog::warn("plan generation failed after {} attempt(s); using a degraded "
                 "plan",
                 e.attempts());
    return degraded_plan(question);
  }
}

}  // namespace kgqa
