#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kgqa/dvbs_engine.hpp"
#include "kgqa/metrics.hpp"

namespace kgqa {

struct ExperimentConfig {
  std::string name = "run";
  SearchConfig search;
  RetrievalConfig retrieval;
  DecodeParams decode;
  std::size_t json_retries = 2;
  std::size_t parallelism = 1;
};

struct QuestionResult {
  std::string id;
  std::string question;
  std::vector<std::string> gold;
  std::vector<std::string> predicted;
  std::vector<std::string> paths;  // arrow form
  std::vector<std::size_t> depths;
  std::string reason;
  std::optional<std::string> failure;
  bool plan_degraded = false;
  int hits_at_1 = 0;
  double f1 = 0.0;
  int accuracy = 0;
  std::optional<double> coverage;
  std::size_t valid_steps = 0;
  std::size_t total_steps = 0;
  std::map<std::string, std::size_t> outcomes;  // verdict outcome -> count
  UsageSnapshot usage;
  std::size_t call_budget = 0;
  std::vector<Json> trace;  // not serialized into the report
};

struct Aggregates {
  std::size_t questions = 0;
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  // Over successful questions.
  double hits_at_1 = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  // Failures counted as 0.
  double hits_at_1_all = 0.0;
  double f1_all = 0.0;
  double accuracy_all = 0.0;
  std::optional<double> coverage;
  std::optional<double> validity;
  std::optional<double> avg_depth;
  double avg_runtime = 0.0;
  double avg_tokens = 0.0;
  double avg_calls = 0.0;

  bool operator==(const Aggregates&) const = default;
};

Aggregates compute_aggregates(const std::vector<QuestionResult>& results);

struct RunReport {
  std::string name;
  Json config;
  std::vector<QuestionResult> results;
  Aggregates aggregates;

  Json to_json() const;
  /// Rebuilds per-question records and aggregates from to_json() output.
  static RunReport from_json(const Json& j);
};

/// CR of one run against a question's ground truth: best over its paths.
std::optional<double> report_coverage(const DvbsResult& result,
                                      const std::vector<ReasoningPath>& truth);

/// Per-question failures are recorded, never thrown.
RunReport run_experiment(const std::vector<QARecord>& dataset,
                         const Retrieval& retrieval, LlmBackend& backend,
                         const PromptCatalog& catalog,
                         const ExperimentConfig& config);

}  // namespace kgqa
