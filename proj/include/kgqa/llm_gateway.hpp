#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kgqa/json_repair.hpp"
#include "kgqa/llm_backend.hpp"
#include "kgqa/prompts.hpp"
#include "kgqa/trace.hpp"

namespace kgqa {

inline constexpr std::string_view kPlaceholder = "*placeholder*";

struct Plan {
  std::vector<std::string> keywords;
  std::vector<std::string> planning_steps;
  std::string declarative_statement;
  bool degraded = false;

  /// The statement with its placeholder replaced by `entity`.
  std::string fill(std::string_view entity) const;
  Json to_json() const;
  static Plan from_json(const Json& j);
};

/// Exactly one `*placeholder*` occurrence.
bool valid_statement(std::string_view statement);

/// Plan synthesized without a model: content words of the question, no
/// planning steps, and "<question> The answer is *placeholder*.".
Plan degraded_plan(std::string_view question);

/// Validates and repairs a parsed plan object in place. Non-string list
/// items are stringified (logged). Returns false when the plan is unusable.
bool repair_plan_json(Json& j);

/// Case-insensitive leading yes/no token.
std::optional<bool> classify_yes_no(std::string_view text);

struct DualVerdict {
  bool step = false;
  bool conclusion = false;
  bool clean = false;  // both verdicts were stated explicitly
};

/// Reads "step: yes; conclusion: no". Without labels the first two yes/no
/// tokens are used; a single token answers both. Anything else is "no".
DualVerdict parse_dual_verdict(std::string_view text);

struct UsageSnapshot {
  std::size_t llm_calls = 0;
  std::size_t retry_calls = 0;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  std::size_t transport_attempts = 0;
  double wall_seconds = 0.0;
  std::map<std::string, std::size_t> calls_by_key;

  std::size_t base_calls() const { return llm_calls - retry_calls; }
  std::size_t total_tokens() const { return prompt_tokens + completion_tokens; }
  Json to_json() const;
};

class UsageLedger {
 public:
  void book(PromptKey key, const Completion& c, bool retry);
  UsageSnapshot snapshot() const;
  void reset();

 private:
  mutable std::mutex mu_;
  UsageSnapshot s_;
};

/// Every model interaction goes through here: booking, tracing, JSON repair.
class Gateway {
 public:
  Gateway(LlmBackend& backend, const PromptCatalog& catalog,
          DecodeParams params = {}, std::size_t json_retries = 2);

  void set_trace(TraceSink* sink) { trace_ = sink; }
  TraceSink* trace() const { return trace_; }

  RenderedPrompt render(PromptKey key, const Bindings& bindings,
                        const Bindings& context = {}) const {
    return catalog_.render(key, bindings, context);
  }

  /// One backend invocation. `sink` overrides the gateway's trace sink.
  Completion call(const RenderedPrompt& prompt, bool is_retry = false,
                  TraceSink* sink = nullptr);

  using Accept = std::function<bool(Json&)>;
  /// First parseable (and accepted) response wins; up to `retries` extra
  /// calls. Throws JsonFailure carrying the last raw response.
  Json complete_json(const RenderedPrompt& prompt, JsonHint hint,
                     std::size_t retries, const Accept& accept = {},
                     TraceSink* sink = nullptr);

  /// Never throws on bad model output: falls back to degraded_plan.
  Plan generate_plan(std::string_view question);

  UsageLedger& ledger() { return ledger_; }
  const UsageLedger& ledger() const { return ledger_; }
  LlmBackend& backend() { return backend_; }
  const PromptCatalog& catalog() const { return catalog_; }
  const DecodeParams& params() const { return params_; }
  std::size_t json_retries() const { return json_retries_; }

 private:
  LlmBackend& backend_;
  const PromptCatalog& catalog_;
  DecodeParams params_;
  std::size_t json_retries_;
  UsageLedger ledger_;
  TraceSink* trace_ = nullptr;
};

}  // namespace kgqa
