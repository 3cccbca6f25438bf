#include "kgqa/backends.hpp"

#include <algorithm>
#include <fstream>
#include <istream>

#include "kgqa/text.hpp"

namespace kgqa {

MockScript load_mock_script(std::istream& in) {
  MockScript script;
  std::size_t line_no = 0;
  for (const auto& rec : read_jsonl(in)) {
    ++line_no;
    if (!rec.contains("question") || !rec["question"].is_string()) {
      throw std::runtime_error("mock script record " + std::to_string(line_no) +
                               ": missing \"question\"");
    }
    MockScriptEntry e;
    if (rec.contains("answers")) {
      e.answers = rec["answers"].get<std::vector<std::string>>();
    }
    if (rec.contains("plan")) e.plan = Plan::from_json(rec["plan"]);
    script[rec["question"].get<std::string>()] = std::move(e);
  }
  return script;
}

MockScript load_mock_script_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mock script: " + path.string());
  return load_mock_script(in);
}

MockBackend::MockBackend(const KnowledgeGraph& graph, MockScript script,
                         AdequacyPolicy adequacy)
    : graph_(graph), script_(std::move(script)), adequacy_(adequacy) {}

const MockScriptEntry& MockBackend::entry(std::string_view question) const {
  auto it = script_.find(question);
  if (it == script_.end()) throw MockMiss(std::string(question));
  return it->second;
}

namespace {

const std::string& context_value(const RenderedPrompt& p, const char* key) {
  static const std::string kEmpty;
  auto it = p.context.find(std::string_view(key));
  return it == p.context.end() ? kEmpty : it->second;
}

std::string yes_no(bool v) { return v ? "yes" : "no"; }

}  // namespace

std::string MockBackend::respond(const RenderedPrompt& prompt) const {
  const auto& e = entry(context_value(prompt, ctx::kQuestion));
  auto is_answer = [&](const std::string& entity) {
    return std::find(e.answers.begin(), e.answers.end(), entity) !=
           e.answers.end();
  };
  switch (prompt.key) {
    case PromptKey::plan_and_solve: {
      const Plan p =
          e.plan ? *e.plan : degraded_plan(context_value(prompt, ctx::kQuestion));
      Json j = p.to_json();
      j.erase("degraded");
      return j.dump();
    }
    case PromptKey::deductive_verify: {
      const auto path = parse_arrow_path(context_value(prompt, ctx::kPath));
      if (!path || path->steps.empty()) return "step: no; conclusion: no";
      const auto& last = path->steps.back();
      const std::string& prev = path->steps.size() == 1
                                    ? path->start
                                    : path->steps[path->steps.size() - 2].entity;
      return "step: " + yes_no(graph_.contains(prev, last.relation, last.entity)) +
             "; conclusion: " + yes_no(is_answer(path->terminal()));
    }
    case PromptKey::adequacy_verify: {
      switch (adequacy_) {
        case AdequacyPolicy::always_sufficient:
          return "Yes";
        case AdequacyPolicy::never_sufficient:
          return "No";
        case AdequacyPolicy::entailment: {
          const auto path = parse_arrow_path(context_value(prompt, ctx::kPath));
          return path && !path->steps.empty() && is_answer(path->terminal())
                     ? "Yes"
                     : "No";
        }
      }
      return "No";
    }
    case PromptKey::beam_select: {
      const auto open = std::stoul(context_value(prompt, ctx::kOpenSlots));
      const auto count = std::stoul(context_value(prompt, ctx::kCandidateCount));
      Json idx = Json::array();
      for (std::size_t i = 0; i < std::min(open, count); ++i) idx.push_back(i);
      return idx.dump();
    }
    case PromptKey::final_reason: {
      std::vector<std::string> terminals;
      for (auto line : split(context_value(prompt, ctx::kPaths), '\n')) {
        if (auto p = parse_arrow_path(line)) {
          if (std::find(terminals.begin(), terminals.end(), p->terminal()) ==
              terminals.end()) {
            terminals.push_back(p->terminal());
          }
        }
      }
      return join(terminals, "\n");
    }
  }
  return "";
}

Completion MockBackend::complete(const RenderedPrompt& prompt,
                                 const DecodeParams&) {
  Completion c;
  c.text = respond(prompt);
  c.prompt_tokens = whitespace_tokens(prompt.system) + whitespace_tokens(prompt.user);
  c.completion_tokens = whitespace_tokens(c.text);
  c.wall_seconds = 0.0;
  return c;
}

void ScriptedBackend::enqueue(PromptKey key, std::string response) {
  std::lock_guard lock(mu_);
  queues_[key].push_back(std::move(response));
}

void ScriptedBackend::add_rule(Rule rule) {
  std::lock_guard lock(mu_);
  rules_.push_back(std::move(rule));
}

std::size_t ScriptedBackend::calls(PromptKey key) const {
  std::lock_guard lock(mu_);
  auto it = calls_.find(key);
  return it == calls_.end() ? 0 : it->second;
}

Completion ScriptedBackend::complete(const RenderedPrompt& prompt,
                                     const DecodeParams& params) {
  std::optional<std::string> text;
  {
    std::lock_guard lock(mu_);
    ++calls_[prompt.key];
    auto& q = queues_[prompt.key];
    if (!q.empty()) {
      text = std::move(q.front());
      q.pop_front();
    } else {
      for (const auto& rule : rules_) {
        if ((text = rule(prompt))) break;
      }
    }
  }
  if (!text) {
    if (!fallback_) {
      throw BackendError("scripted backend has no response for " +
                         std::string(to_string(prompt.key)));
    }
    return fallback_->complete(prompt, params);
  }
  Completion c;
  c.text = std::move(*text);
  c.prompt_tokens = whitespace_tokens(prompt.system) + whitespace_tokens(prompt.user);
  c.completion_tokens = whitespace_tokens(c.text);
  return c;
}

ReplayBackend::ReplayBackend(const std::vector<Json>& trace_records) {
  for (const auto& r : trace_records) {
    if (r.value("type", "") != "llm_call") continue;
    by_digest_[r.at("prompt_digest").get<std::string>()].push_back(
        {r.at("response").get<std::string>(),
         r.value("prompt_tokens", std::size_t{0}),
         r.value("completion_tokens", std::size_t{0})});
  }
}

Completion ReplayBackend::complete(const RenderedPrompt& prompt,
                                   const DecodeParams&) {
  std::lock_guard lock(mu_);
  auto it = by_digest_.find(prompt.digest());
  if (it == by_digest_.end() || it->second.empty()) {
    throw ReplayMiss(std::string(to_string(prompt.key)) + " prompt " +
                     prompt.digest());
  }
  Recorded r = std::move(it->second.front());
  it->second.pop_front();
  Completion c;
  c.text = std::move(r.text);
  c.prompt_tokens = r.prompt_tokens;
  c.completion_tokens = r.completion_tokens;
  return c;
}

std::size_t ReplayBackend::remaining() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [_, q] : by_digest_) n += q.size();
  return n;
}

}  // namespace kgqa
