#include "kgqa/path_rag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "kgqa/text.hpp"

namespace kgqa {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

double or_zero(double v, bool* missing) {
  if (std::isnan(v)) {
    if (missing) *missing = true;
    return 0.0;
  }
  return v;
}

}  // namespace

std::string KeywordSet::joined_text() const { return join(keywords, " "); }

std::string_view to_string(RetrieverMode mode) {
  switch (mode) {
    case RetrieverMode::path_rag:
      return "path-rag";
    case RetrieverMode::vanilla:
      return "vanilla";
    case RetrieverMode::kaping:
      return "kaping";
  }
  return "unknown";
}

std::optional<RetrieverMode> parse_retriever_mode(std::string_view text) {
  if (text == "path-rag") return RetrieverMode::path_rag;
  if (text == "vanilla") return RetrieverMode::vanilla;
  if (text == "kaping") return RetrieverMode::kaping;
  return std::nullopt;
}

void RetrievalConfig::validate() const {
  if (m == 0) throw std::invalid_argument("retriever.top_m must be >= 1");
  if (!(alpha >= 0.0)) throw std::invalid_argument("retriever.alpha must be >= 0");
  if (neighbor_cap == 0) {
    throw std::invalid_argument("retriever.neighbor_cap must be >= 1");
  }
}

VocabHits retrieve_vocab(const EmbeddingIndex& idx, const Embedder& emb,
                         const KeywordSet& kw, std::size_t m) {
  const Vector q = emb.embed(kw.joined_text());
  return {idx.top_m_entities(q, m), idx.top_m_relations(q, m)};
}

QueryScorer::QueryScorer(const KnowledgeGraph& graph, const EmbeddingIndex& idx,
                         const Embedder& emb, Vector query)
    : graph_(graph), emb_(emb), query_(std::move(query)) {
  if (query_.size() != idx.dimension()) {
    throw DimensionMismatch(idx.dimension(), query_.size());
  }
  entity_sim_.resize(graph.entities().size(), kMissing);
  for (std::size_t i = 0; i < entity_sim_.size(); ++i) {
    if (auto v = idx.entity_vector(graph.entities()[i])) {
      entity_sim_[i] = cosine(query_, *v);
    }
  }
  relation_sim_.resize(graph.relations().size(), kMissing);
  for (std::size_t i = 0; i < relation_sim_.size(); ++i) {
    if (auto v = idx.relation_vector(graph.relations()[i])) {
      relation_sim_[i] = cosine(query_, *v);
    }
  }
}

std::optional<double> QueryScorer::relation_similarity(
    std::string_view relation) const {
  const auto id = graph_.relation_id(relation);
  if (!id || std::isnan(relation_sim_[*id])) return std::nullopt;
  return relation_sim_[*id];
}

std::optional<double> QueryScorer::entity_similarity(
    std::string_view entity) const {
  const auto id = graph_.entity_id(entity);
  if (!id || std::isnan(entity_sim_[*id])) return std::nullopt;
  return entity_sim_[*id];
}

double QueryScorer::base_score(const ReasoningStep& step, bool* missing) const {
  const auto r = relation_similarity(step.relation);
  const auto e = entity_similarity(step.entity);
  if (missing && (!r || !e)) *missing = true;
  return r.value_or(0.0) + e.value_or(0.0);
}

double QueryScorer::edge_base(const KnowledgeGraph::Edge& e,
                              bool* missing) const {
  return or_zero(relation_sim_[e.relation], missing) +
         or_zero(entity_sim_[e.tail], missing);
}

ScoredCandidate QueryScorer::lookahead_score(const ReasoningStep& step,
                                             double alpha,
                                             std::size_t neighbor_cap) const {
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
  ScoredCandidate c{step, 0.0, 0.0, 0.0, false};
  c.base_score = base_score(step, &c.missing_component);
  if (const auto tail = graph_.entity_id(step.entity)) {
    auto edges = graph_.out_edges(*tail);
    std::vector<KnowledgeGraph::Edge> capped;
    if (edges.size() > neighbor_cap) {
      capped.assign(edges.begin(), edges.end());
      std::stable_sort(capped.begin(), capped.end(),
                       [&](const auto& a, const auto& b) {
                         return or_zero(relation_sim_[a.relation], nullptr) >
                                or_zero(relation_sim_[b.relation], nullptr);
                       });
      capped.resize(neighbor_cap);
      edges = capped;
    }
    if (!edges.empty()) {
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& e : edges) {
        best = std::max(best, edge_base(e, nullptr));
      }
      c.lookahead_bonus = best;
    }
  }
  c.total_score = c.base_score + alpha * c.lookahead_bonus;
  return c;
}

void rank_candidates(std::vector<ScoredCandidate>& candidates) {
  std::sort(candidates.begin(), candidates.end(),
            [](const ScoredCandidate& a, const ScoredCandidate& b) {
              if (a.total_score != b.total_score) {
                return a.total_score > b.total_score;
              }
              return a.step < b.step;
            });
}

std::vector<ScoredCandidate> QueryScorer::candidate_steps(
    std::string_view frontier, const RetrievalConfig& config) const {
  config.validate();
  std::vector<ScoredCandidate> out;
  const auto steps = graph_.neighbors(frontier);
  out.reserve(steps.size());
  for (const auto& step : steps) {
    switch (config.mode) {
      case RetrieverMode::path_rag:
        out.push_back(lookahead_score(step, config.alpha, config.neighbor_cap));
        break;
      case RetrieverMode::vanilla: {
        const double s =
            cosine(query_, emb_.embed(step.relation + " " + step.entity));
        out.push_back({step, s, 0.0, s, false});
        break;
      }
      case RetrieverMode::kaping: {
        const double s = cosine(
            query_, emb_.embed(std::string(frontier) + " " + step.relation +
                               " " + step.entity));
        out.push_back({step, s, 0.0, s, false});
        break;
      }
    }
  }
  rank_candidates(out);
  if (out.size() > config.m) out.resize(config.m);
  return out;
}

std::vector<ScoredTriple> kaping_retrieve(const KnowledgeGraph& graph,
                                          const Embedder& emb,
                                          const Vector& query, std::size_t k) {
  if (k == 0) throw std::invalid_argument("kaping_retrieve requires k >= 1");
  std::vector<ScoredTriple> all;
  for (auto& t : graph.triples()) {
    const double s =
        cosine(query, emb.embed(t.head + " " + t.relation + " " + t.tail));
    all.push_back({std::move(t), s});
  }
  const std::size_t keep = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<long>(keep),
                    all.end(), [](const ScoredTriple& a, const ScoredTriple& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return a.triple < b.triple;
                    });
  all.resize(keep);
  return all;
}

std::vector<ScoredTriple> kaping_retrieve(const KnowledgeGraph& graph,
                                          const Embedder& emb,
                                          std::string_view query_text,
                                          std::size_t k) {
  return kaping_retrieve(graph, emb, emb.embed(query_text), k);
}

double coverage_ratio(const std::vector<StepSet>& retrieved_per_hop,
                      const ReasoningPath& ground_truth) {
  const std::size_t n = ground_truth.steps.size();
  if (n == 0) {
    throw std::invalid_argument("coverage ratio undefined for an empty path");
  }
  std::size_t hit = 0;
  for (std::size_t k = 0; k < n && k < retrieved_per_hop.size(); ++k) {
    if (retrieved_per_hop[k].contains(ground_truth.steps[k])) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(n);
}

std::vector<StepSet> retrieval_along_path(const KnowledgeGraph& graph,
                                          const QueryScorer& scorer,
                                          const Embedder& emb,
                                          const ReasoningPath& ground_truth,
                                          const RetrievalConfig& config) {
  std::vector<StepSet> out(ground_truth.steps.size());
  if (config.mode == RetrieverMode::kaping) {
    const auto top = kaping_retrieve(graph, emb, scorer.query(), config.m);
    const std::string* frontier = &ground_truth.start;
    for (std::size_t k = 0; k < ground_truth.steps.size(); ++k) {
      for (const auto& st : top) {
        if (st.triple.head == *frontier) {
          out[k].insert({st.triple.relation, st.triple.tail});
        }
      }
      frontier = &ground_truth.steps[k].entity;
    }
    return out;
  }
  const std::string* frontier = &ground_truth.start;
  for (std::size_t k = 0; k < ground_truth.steps.size(); ++k) {
    for (auto& c : scorer.candidate_steps(*frontier, config)) {
      out[k].insert(std::move(c.step));
    }
    frontier = &ground_truth.steps[k].entity;
  }
  return out;
}

}  // namespace kgqa
