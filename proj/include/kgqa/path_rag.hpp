#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kgqa/embed_index.hpp"
#include "kgqa/kg_store.hpp"

namespace kgqa {

struct KeywordSet {
  std::vector<std::string> keywords;

  std::string joined_text() const;
};

enum class RetrieverMode { path_rag, vanilla, kaping };

std::string_view to_string(RetrieverMode mode);
std::optional<RetrieverMode> parse_retriever_mode(std::string_view text);

struct RetrievalConfig {
  std::size_t m = 10;
  double alpha = 0.3;
  std::size_t neighbor_cap = 256;
  RetrieverMode mode = RetrieverMode::path_rag;

  /// Throws std::invalid_argument on m == 0, alpha < 0, neighbor_cap == 0.
  void validate() const;
};

struct ScoredCandidate {
  ReasoningStep step;
  double base_score = 0.0;
  double lookahead_bonus = 0.0;
  double total_score = 0.0;
  /// The relation or entity had no stored vector and contributed 0.
  bool missing_component = false;
};

struct VocabHits {
  std::vector<RankedId> entities;
  std::vector<RankedId> relations;
};

VocabHits retrieve_vocab(const EmbeddingIndex& idx, const Embedder& emb,
                         const KeywordSet& kw, std::size_t m);

/// Similarity scoring against one question's keyword embedding.
///
/// Per-identifier similarities are computed once at construction, so the
/// scorer is immutable afterwards and safe to share across threads.
class QueryScorer {
 public:
  QueryScorer(const KnowledgeGraph& graph, const EmbeddingIndex& idx,
              const Embedder& emb, Vector query);

  const Vector& query() const { return query_; }

  /// S_rel; nullopt when the relation has no stored vector.
  std::optional<double> relation_similarity(std::string_view relation) const;
  std::optional<double> entity_similarity(std::string_view entity) const;

  /// S_0 = S_rel + S_ent, missing parts scored 0.
  double base_score(const ReasoningStep& step, bool* missing = nullptr) const;

  ScoredCandidate lookahead_score(const ReasoningStep& step, double alpha,
                                  std::size_t neighbor_cap) const;

  /// Ranked, truncated next-hop candidates of `frontier` under `config.mode`.
  std::vector<ScoredCandidate> candidate_steps(
      std::string_view frontier, const RetrievalConfig& config) const;

 private:
  double edge_base(const KnowledgeGraph::Edge& e, bool* missing) const;

  const KnowledgeGraph& graph_;
  const Embedder& emb_;
  Vector query_;
  // Indexed by graph ids; NaN marks identifiers absent from the index.
  std::vector<double> entity_sim_;
  std::vector<double> relation_sim_;
};

/// Descending total score, then (relation, entity) ascending.
void rank_candidates(std::vector<ScoredCandidate>& candidates);

struct ScoredTriple {
  Triple triple;
  double score = 0.0;
};

/// Global triple retrieval: each triple rendered "head relation tail".
std::vector<ScoredTriple> kaping_retrieve(const KnowledgeGraph& graph,
                                          const Embedder& emb,
                                          const Vector& query, std::size_t k);
std::vector<ScoredTriple> kaping_retrieve(const KnowledgeGraph& graph,
                                          const Embedder& emb,
                                          std::string_view query_text,
                                          std::size_t k);

using StepSet = std::set<ReasoningStep>;

/// Fraction of ground-truth hops whose step is in that hop's retrieved set.
/// Throws std::invalid_argument for an empty ground-truth path.
double coverage_ratio(const std::vector<StepSet>& retrieved_per_hop,
                      const ReasoningPath& ground_truth);

/// The candidate set each retriever produces at every hop when the frontier
/// follows `ground_truth`. Kaping draws one global top-m triple list and
/// keeps, per hop, the triples leaving that hop's frontier.
std::vector<StepSet> retrieval_along_path(const KnowledgeGraph& graph,
                                          const QueryScorer& scorer,
                                          const Embedder& emb,
                                          const ReasoningPath& ground_truth,
                                          const RetrievalConfig& config);

}  // namespace kgqa
