#include "kgqa/experiment.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <thread>

namespace kgqa {

namespace {

Json optional_json(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

std::optional<double> optional_from(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

UsageSnapshot usage_from_json(const Json& j) {
  UsageSnapshot u;
  u.llm_calls = j.at("llm_calls").get<std::size_t>();
  u.retry_calls = j.at("retry_calls").get<std::size_t>();
  u.prompt_tokens = j.at("prompt_tokens").get<std::size_t>();
  u.completion_tokens = j.at("completion_tokens").get<std::size_t>();
  u.transport_attempts = j.at("transport_attempts").get<std::size_t>();
  u.wall_seconds = j.at("wall_seconds").get<double>();
  u.calls_by_key = j.at("calls_by_key").get<std::map<std::string, std::size_t>>();
  return u;
}

Json result_json(const QuestionResult& r) {
  Json j{{"id", r.id},
         {"question", r.question},
         {"gold", r.gold},
         {"predicted", r.predicted},
         {"paths", r.paths},
         {"depths", r.depths},
         {"reason", r.reason},
         {"failure", r.failure ? Json(*r.failure) : Json(nullptr)},
         {"plan_degraded", r.plan_degraded},
         {"hits_at_1", r.hits_at_1},
         {"f1", r.f1},
         {"accuracy", r.accuracy},
         {"coverage", optional_json(r.coverage)},
         {"valid_steps", r.valid_steps},
         {"total_steps", r.total_steps},
         {"outcomes", r.outcomes},
         {"usage", r.usage.to_json()},
         {"call_budget", r.call_budget}};
  return j;
}

QuestionResult result_from_json(const Json& j) {
  QuestionResult r;
  r.id = j.at("id").get<std::string>();
  r.question = j.at("question").get<std::string>();
  r.gold = j.at("gold").get<std::vector<std::string>>();
  r.predicted = j.at("predicted").get<std::vector<std::string>>();
  r.paths = j.at("paths").get<std::vector<std::string>>();
  r.depths = j.at("depths").get<std::vector<std::size_t>>();
  r.reason = j.at("reason").get<std::string>();
  if (!j.at("failure").is_null()) r.failure = j["failure"].get<std::string>();
  r.plan_degraded = j.at("plan_degraded").get<bool>();
  r.hits_at_1 = j.at("hits_at_1").get<int>();
  r.f1 = j.at("f1").get<double>();
  r.accuracy = j.at("accuracy").get<int>();
  r.coverage = optional_from(j, "coverage");
  r.valid_steps = j.at("valid_steps").get<std::size_t>();
  r.total_steps = j.at("total_steps").get<std::size_t>();
  r.outcomes = j.at("outcomes").get<std::map<std::string, std::size_t>>();
  r.usage = usage_from_json(j.at("usage"));
  r.call_budget = j.at("call_budget").get<std::size_t>();
  return r;
}

Json aggregates_json(const Aggregates& a) {
  return Json{{"questions", a.questions},
              {"succeeded", a.succeeded},
              {"failed", a.failed},
              {"hits_at_1", a.hits_at_1},
              {"f1", a.f1},
              {"accuracy", a.accuracy},
              {"hits_at_1_all", a.hits_at_1_all},
              {"f1_all", a.f1_all},
              {"accuracy_all", a.accuracy_all},
              {"coverage", optional_json(a.coverage)},
              {"validity", optional_json(a.validity)},
              {"avg_depth", optional_json(a.avg_depth)},
              {"avg_runtime", a.avg_runtime},
              {"avg_tokens", a.avg_tokens},
              {"avg_calls", a.avg_calls}};
}

Aggregates aggregates_from_json(const Json& j) {
  Aggregates a;
  a.questions = j.at("questions").get<std::size_t>();
  a.succeeded = j.at("succeeded").get<std::size_t>();
  a.failed = j.at("failed").get<std::size_t>();
  a.hits_at_1 = j.at("hits_at_1").get<double>();
  a.f1 = j.at("f1").get<double>();
  a.accuracy = j.at("accuracy").get<double>();
  a.hits_at_1_all = j.at("hits_at_1_all").get<double>();
  a.f1_all = j.at("f1_all").get<double>();
  a.accuracy_all = j.at("accuracy_all").get<double>();
  a.coverage = optional_from(j, "coverage");
  a.validity = optional_from(j, "validity");
  a.avg_depth = optional_from(j, "avg_depth");
  a.avg_runtime = j.at("avg_runtime").get<double>();
  a.avg_tokens = j.at("avg_tokens").get<double>();
  a.avg_calls = j.at("avg_calls").get<double>();
  return a;
}

}  // namespace

Aggregates compute_aggregates(const std::vector<QuestionResult>& results) {
  Aggregates a;
  a.questions = results.size();
  double hits = 0, f1 = 0, acc = 0, runtime = 0, tokens = 0, calls = 0;
  double cov_sum = 0;
  std::size_t cov_n = 0;
  StepTally steps;
  std::vector<std::vector<std::size_t>> depths;
  for (const auto& r : results) {
    if (r.failure) {
      ++a.failed;
      continue;
    }
    ++a.succeeded;
    hits += r.hits_at_1;
    f1 += r.f1;
    acc += r.accuracy;
    runtime += r.usage.wall_seconds;
    tokens += static_cast<double>(r.usage.total_tokens());
    calls += static_cast<double>(r.usage.llm_calls);
    if (r.coverage) {
      cov_sum += *r.coverage;
      ++cov_n;
    }
    steps.valid += r.valid_steps;
    steps.total += r.total_steps;
    depths.push_back(r.depths);
  }
  if (a.succeeded) {
    const auto n = static_cast<double>(a.succeeded);
    a.hits_at_1 = hits / n;
    a.f1 = f1 / n;
    a.accuracy = acc / n;
    a.avg_runtime = runtime / n;
    a.avg_tokens = tokens / n;
    a.avg_calls = calls / n;
  }
  if (a.questions) {
    const auto n = static_cast<double>(a.questions);
    a.hits_at_1_all = hits / n;
    a.f1_all = f1 / n;
    a.accuracy_all = acc / n;
  }
  if (cov_n) a.coverage = cov_sum / static_cast<double>(cov_n);
  a.validity = steps.ratio();
  a.avg_depth = avg_depth(depths);
  return a;
}

Json RunReport::to_json() const {
  Json per = Json::array();
  for (const auto& r : results) per.push_back(result_json(r));
  return Json{{"name", name},
              {"config", config},
              {"aggregates", aggregates_json(aggregates)},
              {"questions", per}};
}

RunReport RunReport::from_json(const Json& j) {
  RunReport r;
  r.name = j.at("name").get<std::string>();
  r.config = j.at("config");
  r.aggregates = aggregates_from_json(j.at("aggregates"));
  for (const auto& q : j.at("questions")) r.results.push_back(result_from_json(q));
  return r;
}

std::optional<double> report_coverage(const DvbsResult& result,
                                      const std::vector<ReasoningPath>& truth) {
  std::optional<double> best;
  for (const auto& gt : truth) {
    if (gt.steps.empty()) continue;
    const double cr = coverage_ratio(result.candidates_per_depth, gt);
    best = best ? std::max(*best, cr) : cr;
  }
  return best;
}

namespace {

QuestionResult evaluate_one(const QARecord& rec, const Retrieval& retrieval,
                            LlmBackend& backend, const PromptCatalog& catalog,
                            const ExperimentConfig& config) {
  QuestionResult r;
  r.id = rec.id;
  r.question = rec.question;
  r.gold = rec.answers;
  r.call_budget = call_budget(config.search);
  Gateway gw(backend, catalog, config.decode, config.json_retries);
  DvbsResult res;
  try {
    res = run_dvbs(rec.question, rec.topic_entities, retrieval, gw,
                   config.search, config.retrieval);
  } catch (const std::exception& e) {
    r.failure = e.what();
    r.usage = gw.ledger().snapshot();
    return r;
  }
  r.usage = res.usage;
  r.trace = res.trace;
  r.failure = res.failure;
  r.reason = res.answers.reason;
  r.plan_degraded = res.plan.degraded;
  r.predicted = res.answers.answers;
  for (const auto& p : res.answers.supporting_paths) {
    r.paths.push_back(to_arrow_string(p));
    r.depths.push_back(p.depth());
    const auto v = retrieval.graph.validate(p);
    r.valid_steps += v.valid_step_count;
    r.total_steps += v.total_step_count;
  }
  for (const auto& t : res.trace) {
    if (t.value("type", "") == "verdict") ++r.outcomes[t.value("outcome", "")];
  }
  if (!r.failure) {
    r.hits_at_1 = hits_at_1(r.predicted, r.gold);
    r.f1 = f1_score(r.predicted, r.gold);
    r.accuracy = accuracy(r.predicted, r.gold);
    r.coverage = report_coverage(res, rec.ground_truth_paths);
  }
  return r;
}

}  // namespace

RunReport run_experiment(const std::vector<QARecord>& dataset,
                         const Retrieval& retrieval, LlmBackend& backend,
                         const PromptCatalog& catalog,
                         const ExperimentConfig& config) {
  RunReport report;
  report.name = config.name;
  report.config = Json{{"search", to_json(config.search)},
                       {"retrieval", to_json(config.retrieval)},
                       {"decode",
                        {{"temperature", config.decode.temperature},
                         {"top_p", config.decode.top_p}}},
                       {"json_retries", config.json_retries},
                       {"embedder", retrieval.embedder.fingerprint()}};
  report.results.resize(dataset.size());
  const std::size_t workers =
      std::clamp<std::size_t>(config.parallelism, 1, std::max<std::size_t>(1, dataset.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      report.results[i] = evaluate_one(dataset[i], retrieval, backend, catalog, config);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < dataset.size(); i = next++) {
          report.results[i] =
              evaluate_one(dataset[i], retrieval, backend, catalog, config);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& r : report.results) {
    if (r.failure) spdlog::warn("question {} failed: {}", r.id, *r.failure);
  }
  report.aggregates = compute_aggregates(report.results);
  return report;
}

}  // namespace kgqa
