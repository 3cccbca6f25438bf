#pragma once

#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "kgqa/kg_store.hpp"
#include "kgqa/llm_backend.hpp"
#include "kgqa/llm_gateway.hpp"

namespace kgqa {

struct MockScriptEntry {
  std::vector<std::string> answers;
  std::optional<Plan> plan;  // synthesized from the question when absent
};

using MockScript = std::map<std::string, MockScriptEntry, std::less<>>;

/// JSON lines with "question", "answers" and an optional "plan" object.
/// Dataset records load as-is; extra fields are ignored.
MockScript load_mock_script(std::istream& in);
MockScript load_mock_script_file(const std::filesystem::path& path);

enum class AdequacyPolicy { entailment, always_sufficient, never_sufficient };

/// Answers every prompt from the graph and an answer key:
/// deductive checks by triple membership and answer-key entailment,
/// selection by echoing the first indices, final answers as path terminals.
class MockBackend final : public LlmBackend {
 public:
  MockBackend(const KnowledgeGraph& graph, MockScript script,
              AdequacyPolicy adequacy = AdequacyPolicy::entailment);

  Completion complete(const RenderedPrompt& prompt,
                      const DecodeParams& params) override;
  BackendCaps caps() const override { return {true, 8}; }
  std::string name() const override { return "mock"; }

  const MockScriptEntry& entry(std::string_view question) const;

 private:
  std::string respond(const RenderedPrompt& prompt) const;

  const KnowledgeGraph& graph_;
  MockScript script_;
  AdequacyPolicy adequacy_;
};

/// Test double driven by per-key response queues and rule callbacks,
/// delegating anything unmatched.
class ScriptedBackend final : public LlmBackend {
 public:
  using Rule = std::function<std::optional<std::string>(const RenderedPrompt&)>;

  explicit ScriptedBackend(LlmBackend* fallback = nullptr)
      : fallback_(fallback) {}

  /// Queued responses are consumed first, in order.
  void enqueue(PromptKey key, std::string response);
  void add_rule(Rule rule);

  Completion complete(const RenderedPrompt& prompt,
                      const DecodeParams& params) override;
  BackendCaps caps() const override { return {false, 8}; }
  std::string name() const override { return "scripted"; }

  std::size_t calls(PromptKey key) const;

 private:
  mutable std::mutex mu_;
  std::map<PromptKey, std::deque<std::string>> queues_;
  std::vector<Rule> rules_;
  std::map<PromptKey, std::size_t> calls_;
  LlmBackend* fallback_;
};

/// Serves the responses recorded in a trace, matched by prompt digest.
class ReplayBackend final : public LlmBackend {
 public:
  explicit ReplayBackend(const std::vector<Json>& trace_records);

  Completion complete(const RenderedPrompt& prompt,
                      const DecodeParams& params) override;
  std::string name() const override { return "replay"; }
  std::size_t remaining() const;

 private:
  struct Recorded {
    std::string text;
    std::size_t prompt_tokens;
    std::size_t completion_tokens;
  };
  mutable std::mutex mu_;
  std::map<std::string, std::deque<Recorded>> by_digest_;
};

}  // namespace kgqa
