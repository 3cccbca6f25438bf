#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "kgqa/path_rag.hpp"
#include "oracles.hpp"

using namespace kgqa;

namespace {

// T has three successors; only A and B lead further.
struct Lookahead {
  std::vector<Triple> triples = {{"T", "r1", "A"}, {"T", "r2", "B"}, {"T", "r3", "C"},
                                 {"A", "r4", "D"}, {"A", "r5", "F"}, {"B", "r6", "T"}};
  std::map<std::string, std::vector<double>> table = {
      {"T", {1, 0, 0}},   {"A", {0.2, 0.1, 0.9}}, {"B", {0.7, 0.7, 0}},
      {"C", {0.9, 0.3, 0.1}}, {"D", {0, 1, 0}},   {"F", {0.3, 0.3, 0.3}},
      {"r1", {0.1, 0.1, 1}},  {"r2", {0.5, 0.5, 0.5}}, {"r3", {1, 0.2, 0}},
      {"r4", {0, 0.9, 0.4}},  {"r5", {0.8, 0.1, 0.1}}, {"r6", {0, 0, 1}}};
  std::vector<double> query = {0.4, 0.8, 0.2};
  KnowledgeGraph graph{triples};
  oracle::TableEmbedder emb{table, 3};
  EmbeddingIndex idx = EmbeddingIndex::build(graph, emb);

  double base(const ReasoningStep& s) const {
    return oracle::cosine(query, table.at(s.relation)) +
           oracle::cosine(query, table.at(s.entity));
  }
  double total(const ReasoningStep& s, double alpha) const {
    const auto next = oracle::out_steps(triples, s.entity);
    double best = 0.0;
    if (!next.empty()) {
      best = base(next[0]);
      for (const auto& n : next) best = std::max(best, base(n));
    }
    return base(s) + alpha * best;
  }
};

}  // namespace

TEST(PathRag, LookaheadScoreMatchesBruteForce) {
  const Lookahead f;
  const QueryScorer scorer(f.graph, f.idx, f.emb, f.query);
  for (double alpha : {0.0, 0.3, 1.0, 2.5}) {
    RetrievalConfig cfg;
    cfg.alpha = alpha;
    for (const auto& c : scorer.candidate_steps("T", cfg)) {
      EXPECT_NEAR(c.total_score, f.total(c.step, alpha), 1e-12);
      EXPECT_NEAR(c.base_score, f.base(c.step), 1e-12);
      EXPECT_FALSE(c.missing_component);
    }
  }
}

TEST(PathRag, DeadEndGetsNoBonus) {
  const Lookahead f;
  const QueryScorer scorer(f.graph, f.idx, f.emb, f.query);
  const auto c = scorer.lookahead_score({"r3", "C"}, 0.3, 256);
  EXPECT_EQ(c.lookahead_bonus, 0.0);
  EXPECT_EQ(c.total_score, c.base_score);
}

TEST(PathRag, AlphaZeroRanksByBaseScore) {
  const Lookahead f;
  const QueryScorer scorer(f.graph, f.idx, f.emb, f.query);
  RetrievalConfig cfg;
  cfg.alpha = 0.0;
  const auto got = scorer.candidate_steps("T", cfg);
  auto steps = oracle::out_steps(f.triples, "T");
  std::sort(steps.begin(), steps.end(), [&](const auto& a, const auto& b) {
    return f.base(a) != f.base(b) ? f.base(a) > f.base(b) : a < b;
  });
  ASSERT_EQ(got.size(), steps.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].step, steps[i]);
}

TEST(PathRag, CandidatesAreTruncatedToM) {
  const Lookahead f;
  const QueryScorer scorer(f.graph, f.idx, f.emb, f.query);
  RetrievalConfig cfg;
  cfg.m = 2;
  const auto got = scorer.candidate_steps("T", cfg);
  ASSERT_EQ(got.size(), 2u);
  EXPECT_GE(got[0].total_score, got[1].total_score);
  EXPECT_TRUE(scorer.candidate_steps("D", cfg).empty());
}

TEST(PathRag, NeighborCapKeepsMostSimilarRelations) {
  const Lookahead f;
  const QueryScorer scorer(f.graph, f.idx, f.emb, f.query);
  // A's successors: r4 -> D and r5 -> F; plain relation similarity picks one.
  const double s4 = oracle::cosine(f.query, f.table.at("r4"));
  const double s5 = oracle::cosine(f.query, f.table.at("r5"));
  const ReasoningStep kept = s4 >= s5 ? ReasoningStep{"r4", "D"} : ReasoningStep{"r5", "F"};
  const auto c = scorer.lookahead_score({"r1", "A"}, 1.0, 1);
  EXPECT_NEAR(c.lookahead_bonus, f.base(kept), 1e-12);
}

TEST(PathRag, MissingVectorsScoreZeroAndAreFlagged) {
  const Lookahead f;
  // Index built over a smaller graph lacks C and r3.
  const KnowledgeGraph partial({{"T", "r1", "A"}, {"A", "r4", "D"}});
  const auto idx = EmbeddingIndex::build(partial, f.emb);
  const QueryScorer scorer(f.graph, idx, f.emb, f.query);
  bool missing = false;
  EXPECT_EQ(scorer.base_score({"r3", "C"}, &missing), 0.0);
  EXPECT_TRUE(missing);
  EXPECT_FALSE(scorer.relation_similarity("r3").has_value());
  ASSERT_TRUE(scorer.relation_similarity("r1").has_value());
}

TEST(PathRag, RejectsBadConfig) {
  RetrievalConfig c;
  c.m = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.alpha = -0.1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.neighbor_cap = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(parse_retriever_mode("kaping"), RetrieverMode::kaping);
  EXPECT_EQ(parse_retriever_mode("path-rag"), RetrieverMode::path_rag);
  EXPECT_FALSE(parse_retriever_mode("bm25"));
}

TEST(PathRag, VanillaAndKapingScoreRenderedText) {
  const auto g = KnowledgeGraph::load_file(oracle::data_file("iran.tsv"));
  const HashEmbedder emb;
  const auto idx = EmbeddingIndex::build(g, emb);
  const auto q = emb.embed("form of government country");
  const QueryScorer scorer(g, idx, emb, q);
  RetrievalConfig cfg;
  cfg.mode = RetrieverMode::vanilla;
  for (const auto& c : scorer.candidate_steps("Iran", cfg)) {
    EXPECT_NEAR(c.total_score,
                oracle::cosine(q, emb.embed(c.step.relation + " " + c.step.entity)), 1e-12);
  }
  cfg.mode = RetrieverMode::kaping;
  for (const auto& c : scorer.candidate_steps("Iran", cfg)) {
    EXPECT_NEAR(c.total_score,
                oracle::cosine(q, emb.embed("Iran " + c.step.relation + " " + c.step.entity)),
                1e-12);
  }
}

TEST(PathRag, KapingRetrieveIsGlobalTopK) {
  const auto g = KnowledgeGraph::load_file(oracle::data_file("iran.tsv"));
  const HashEmbedder emb;
  const auto q = emb.embed("currency countries used");
  const auto got = kaping_retrieve(g, emb, q, 3);
  auto all = g.triples();
  auto score = [&](const Triple& t) {
    return oracle::cosine(q, emb.embed(t.head + " " + t.relation + " " + t.tail));
  };
  std::sort(all.begin(), all.end(), [&](const Triple& a, const Triple& b) {
    return score(a) != score(b) ? score(a) > score(b) : a < b;
  });
  ASSERT_EQ(got.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(got[i].triple, all[i]);
  EXPECT_THROW(kaping_retrieve(g, emb, q, 0), std::invalid_argument);
}

TEST(PathRag, CoverageRatioCountsHopsInOrder) {
  const ReasoningPath gt{"A", {{"r", "B"}, {"s", "C"}, {"t", "D"}}};
  std::vector<StepSet> sets(3);
  sets[0] = {{"r", "B"}};
  sets[1] = {{"x", "C"}};
  sets[2] = {{"t", "D"}, {"s", "C"}};
  EXPECT_DOUBLE_EQ(coverage_ratio(sets, gt), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(coverage_ratio({}, gt), 0.0);
  EXPECT_THROW(coverage_ratio(sets, ReasoningPath{"A", {}}), std::invalid_argument);
}

TEST(PathRag, RetrievalAlongPathFollowsGroundTruthFrontier) {
  const Lookahead f;
  const QueryScorer scorer(f.graph, f.idx, f.emb, f.query);
  const ReasoningPath gt{"T", {{"r1", "A"}, {"r4", "D"}}};
  RetrievalConfig cfg;
  cfg.m = 1;
  const auto sets = retrieval_along_path(f.graph, scorer, f.emb, gt, cfg);
  ASSERT_EQ(sets.size(), 2u);
  const auto a = scorer.candidate_steps("T", cfg);
  const auto b = scorer.candidate_steps("A", cfg);
  EXPECT_EQ(sets[0], (StepSet{a[0].step}));
  EXPECT_EQ(sets[1], (StepSet{b[0].step}));
}

TEST(PathRag, BaseScoreIsBoundedProperty) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto kg = oracle::random_kg(rng, 15, 4, 4);
    if (kg.triples.empty()) continue;
    const KnowledgeGraph g(kg.triples);
    const HashEmbedder emb(16);
    const auto idx = EmbeddingIndex::build(g, emb);
    const QueryScorer scorer(g, idx, emb, emb.embed("rel r1 e3"));
    RetrievalConfig cfg;
    for (const auto& e : g.entities()) {
      for (const auto& c : scorer.candidate_steps(e, cfg)) {
        EXPECT_LE(std::abs(c.base_score), 2.0 + 1e-12);
        EXPECT_NEAR(c.total_score, c.base_score + 0.3 * c.lookahead_bonus, 1e-12);
      }
    }
  }
}
