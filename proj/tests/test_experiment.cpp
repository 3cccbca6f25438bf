#include <gtest/gtest.h>

#include "kgqa/backends.hpp"
#include "kgqa/experiment.hpp"
#include "oracles.hpp"

using namespace kgqa;

namespace {

struct Env {
  KnowledgeGraph graph = KnowledgeGraph::load_file(oracle::data_file("both.tsv"));
  HashEmbedder emb;
  EmbeddingIndex idx = EmbeddingIndex::build(graph, emb);
  PromptCatalog catalog;
  std::vector<QARecord> data = load_dataset_file(oracle::data_file("fixtures.jsonl").string());
  MockScript script = load_mock_script_file(oracle::data_file("fixtures.jsonl"));

  Retrieval retrieval() const { return {graph, idx, emb}; }
};

QuestionResult result(int hit, double f1, std::optional<std::string> failure = std::nullopt) {
  QuestionResult r;
  r.hits_at_1 = hit;
  r.f1 = f1;
  r.accuracy = hit;
  r.failure = std::move(failure);
  r.usage.llm_calls = 4;
  return r;
}

}  // namespace

TEST(Aggregates, FailuresAreExcludedOrCountedAsZero) {
  auto a = result(1, 1.0);
  a.coverage = 1.0;
  a.valid_steps = 2;
  a.total_steps = 2;
  a.depths = {2};
  auto b = result(0, 0.5);
  b.valid_steps = 1;
  b.total_steps = 3;
  b.depths = {1, 3};
  const auto c = result(0, 0.0, "timeout");
  const auto agg = compute_aggregates({a, b, c});
  EXPECT_EQ(agg.questions, 3u);
  EXPECT_EQ(agg.succeeded, 2u);
  EXPECT_EQ(agg.failed, 1u);
  EXPECT_DOUBLE_EQ(agg.hits_at_1, 0.5);
  EXPECT_DOUBLE_EQ(agg.f1, 0.75);
  EXPECT_DOUBLE_EQ(agg.hits_at_1_all, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(agg.f1_all, 0.5);
  EXPECT_DOUBLE_EQ(*agg.coverage, 1.0);
  EXPECT_DOUBLE_EQ(*agg.validity, 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(*agg.avg_depth, 2.0);
  EXPECT_DOUBLE_EQ(agg.avg_calls, 4.0);

  const auto empty = compute_aggregates({});
  EXPECT_EQ(empty.questions, 0u);
  EXPECT_FALSE(empty.validity);
}

TEST(Experiment, FixturesOnMock) {
  const Env env;
  MockBackend m(env.graph, env.script);
  ExperimentConfig cfg;
  cfg.name = "fixtures";
  const auto rep = run_experiment(env.data, env.retrieval(), m, env.catalog, cfg);
  ASSERT_EQ(rep.results.size(), 2u);
  EXPECT_EQ(rep.aggregates.failed, 0u);
  EXPECT_DOUBLE_EQ(rep.aggregates.hits_at_1, 1.0);
  EXPECT_DOUBLE_EQ(rep.aggregates.f1, 1.0);
  EXPECT_DOUBLE_EQ(*rep.aggregates.validity, 1.0);
  EXPECT_DOUBLE_EQ(*rep.aggregates.avg_depth, 2.0);
  for (const auto& r : rep.results) {
    EXPECT_EQ(r.call_budget, 21u);
    EXPECT_LE(r.usage.base_calls(), r.call_budget);
    ASSERT_TRUE(r.coverage);
    EXPECT_DOUBLE_EQ(*r.coverage, 1.0);
    EXPECT_GT(r.outcomes.at("halted"), 0u);
  }
}

TEST(Experiment, ReportRoundTripRecomputesAggregates) {
  const Env env;
  MockBackend m(env.graph, env.script);
  const auto rep = run_experiment(env.data, env.retrieval(), m, env.catalog, {});
  const auto j = rep.to_json();
  EXPECT_EQ(j["name"], "run");
  EXPECT_TRUE(j["config"].contains("search"));
  EXPECT_FALSE(j["questions"][0].contains("trace"));
  const auto back = RunReport::from_json(Json::parse(j.dump()));
  EXPECT_EQ(back.aggregates, rep.aggregates);
  EXPECT_EQ(compute_aggregates(back.results), rep.aggregates);
  EXPECT_EQ(back.to_json(), j);
}

TEST(Experiment, ParallelMatchesSerial) {
  const Env env;
  MockBackend m(env.graph, env.script);
  std::vector<QARecord> many;
  for (int i = 0; i < 6; ++i) {
    for (auto r : env.data) {
      r.id += std::to_string(i);
      many.push_back(r);
    }
  }
  ExperimentConfig serial, parallel;
  parallel.parallelism = 4;
  const auto a = run_experiment(many, env.retrieval(), m, env.catalog, serial);
  const auto b = run_experiment(many, env.retrieval(), m, env.catalog, parallel);
  ASSERT_EQ(a.results.size(), b.results.size());
  for (std::size_t i = 0; i < a.results.size(); ++i) {
    EXPECT_EQ(a.results[i].id, b.results[i].id);
    EXPECT_EQ(a.results[i].predicted, b.results[i].predicted);
    EXPECT_EQ(a.results[i].paths, b.results[i].paths);
    EXPECT_EQ(a.results[i].usage.llm_calls, b.results[i].usage.llm_calls);
  }
}

TEST(Experiment, FailuresAreRecordedNotThrown) {
  const Env env;
  ScriptedBackend dead;
  auto data = env.data;
  data[1].topic_entities = {"Not_In_Graph"};
  const auto rep = run_experiment(data, env.retrieval(), dead, env.catalog, {});
  ASSERT_EQ(rep.results.size(), 2u);
  EXPECT_TRUE(rep.results[0].failure);
  EXPECT_TRUE(rep.results[1].failure);
  EXPECT_EQ(rep.aggregates.failed, 2u);
  EXPECT_DOUBLE_EQ(rep.aggregates.hits_at_1_all, 0.0);
}
