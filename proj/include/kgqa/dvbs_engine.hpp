#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kgqa/embed_index.hpp"
#include "kgqa/kg_store.hpp"
#include "kgqa/llm_gateway.hpp"
#include "kgqa/path_rag.hpp"

namespace kgqa {

struct SearchConfig {
  std::size_t beam_width = 4;
  std::size_t max_depth = 4;
  bool use_planning = true;
  bool use_deductive_verifier = true;
  bool use_beam_search = true;
  bool use_last_step_reasoning = true;
  bool adequacy_mode = false;

  /// Greedy (1) when beam search is ablated.
  std::size_t effective_width() const { return use_beam_search ? beam_width : 1; }
  bool verifies() const { return use_deductive_verifier || adequacy_mode; }
  void validate() const;
};

/// N*D + D + C: the most model calls a question may need.
std::size_t call_budget(std::size_t beam_width, std::size_t max_depth,
                        std::size_t c = 1);
std::size_t call_budget(const SearchConfig& config);

struct Hypothesis {
  ReasoningPath path;
  std::size_t selection_rank = 0;
  bool halted = false;
};

struct AnswerSet {
  /// Ordered by best supporting selection rank, then lexicographically.
  std::vector<std::string> answers;
  std::vector<ReasoningPath> supporting_paths;
  /// Parallel to supporting_paths: the path does not end at an answer.
  std::vector<bool> indirect;
  std::string reason;     // "no-deducible-path" when empty
  bool fallback = false;  // answers taken from path terminals
};

enum class SelectionMethod {
  all,               // no more candidates than open slots
  llm,
  llm_filled,        // valid indices padded from Path-RAG order
  fallback_invalid,  // parseable list without a usable index
  fallback_unusable, // no list after retries
  fallback_budget,   // call budget reserved for verification
};

std::string_view to_string(SelectionMethod m);

struct Selection {
  std::vector<std::size_t> chosen;
  SelectionMethod method = SelectionMethod::all;
};

/// Indices parsed from a selection answer; invalid and duplicate entries
/// dropped, at most `k` kept. nullopt when no list is present.
std::optional<std::vector<std::size_t>> parse_selection(std::string_view text,
                                                        std::size_t count,
                                                        std::size_t k);

/// Picks up to `k` of `candidates` (already in Path-RAG order).
Selection select_steps(Gateway& gw, std::string_view question, const Plan& plan,
                       const std::vector<ReasoningPath>& candidates,
                       std::size_t k, TraceSink* sink = nullptr);

/// Premises for the verifier: every step as "h -> r -> t", the last marked
/// as coming from the next step candidates.
std::string render_premises(const ReasoningPath& path);

struct StepVerdict {
  bool local = false;
  bool global = false;
  bool clean = false;
};

/// One deductive exchange judging the path's last step and the cloze filled
/// with its terminal entity.
StepVerdict deductive_verify(Gateway& gw, std::string_view question,
                             const Plan& plan, const ReasoningPath& path,
                             TraceSink* sink = nullptr);
bool verify_local(Gateway& gw, std::string_view question, const Plan& plan,
                  const ReasoningPath& prefix, const ReasoningStep& step,
                  TraceSink* sink = nullptr);
/// False without a call for an empty path.
bool verify_global(Gateway& gw, std::string_view question, const Plan& plan,
                   const ReasoningPath& path, TraceSink* sink = nullptr);
bool adequacy_verify(Gateway& gw, std::string_view question,
                     const ReasoningPath& path, TraceSink* sink = nullptr);

/// Splits a free-form answer into entries: a JSON string array when present,
/// else newline/comma/semicolon separated.
std::vector<std::string> parse_answer_list(std::string_view text);

AnswerSet final_reason(Gateway& gw, std::string_view question,
                       const std::vector<Hypothesis>& paths, bool use_llm,
                       TraceSink* sink = nullptr);

class TopicError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DvbsResult {
  AnswerSet answers;
  std::vector<Hypothesis> final_hypotheses;
  Plan plan;
  UsageSnapshot usage;
  std::vector<Json> trace;
  /// Union of Path-RAG candidate steps at each depth.
  std::vector<StepSet> candidates_per_depth;
  std::optional<std::string> failure;
  std::size_t reached_depth = 0;
};

struct Retrieval {
  const KnowledgeGraph& graph;
  const EmbeddingIndex& index;
  const Embedder& embedder;
};

/// Backend failures are caught: the result carries `failure` and the
/// partial trace. Throws TopicError when no topic entity is in the graph.
DvbsResult run_dvbs(std::string_view question,
                    const std::vector<std::string>& topic_entities,
                    const Retrieval& retrieval, Gateway& gw,
                    const SearchConfig& search, const RetrievalConfig& rconf);

Json to_json(const SearchConfig& c);
Json to_json(const RetrievalConfig& c);
SearchConfig search_config_from_json(const Json& j);
RetrievalConfig retrieval_config_from_json(const Json& j);

/// Re-runs a recorded question from its trace with no live backend.
DvbsResult replay_trace(const std::vector<Json>& trace,
                        const Retrieval& retrieval,
                        const PromptCatalog& catalog);

}  // namespace kgqa
