#include "commands.hpp"

#include <CLI11.hpp>
#include <spdlog/fmt/fmt.h>

#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "kgqa/backends.hpp"
#include "kgqa/dvbs_engine.hpp"
#include "kgqa/experiment.hpp"
#include "kgqa/metrics.hpp"
#include "kgqa/run_config.hpp"
#include "kgqa/text.hpp"
#include "kgqa/trace.hpp"
#include "kgqa/wire_backend.hpp"

namespace kgqa::cli {

namespace {

namespace fs = std::filesystem;

/// Exit-code 2 failures: bad flags, bad config, missing inputs.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Overrides {
  std::string config_path;
  std::vector<std::string> sets;
  std::vector<std::pair<CLI::Option*, std::string>> flags;
  std::map<std::string, std::string> values;

  void add(CLI::App* app, const std::string& flag, const std::string& key,
           const std::string& help) {
    flags.emplace_back(app->add_option(flag, values[key], help), key);
  }

  RunConfig resolve() const {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value: " + s);
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [opt, key] : flags) {
      if (opt->count() > 0) cfg.set(key, values.at(key));
    }
    cfg.validate();
    return cfg;
  }
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, "run config file (key = value)");
  app->add_option("--set", o.sets, "override a config key: key=value");
  o.add(app, "--kg", "kg", "knowledge graph TSV");
  o.add(app, "--index", "index", "embedding index file");
}

void add_search(CLI::App* app, Overrides& o) {
  o.add(app, "--retriever", "retriever.mode", "path-rag | vanilla | kaping");
  o.add(app, "--top-m", "retriever.top_m", "vocabulary hits per keyword");
  o.add(app, "--alpha", "retriever.alpha", "lookahead weight");
  o.add(app, "--neighbor-cap", "retriever.neighbor_cap", "lookahead fan-out cap");
  o.add(app, "--width", "search.width", "beam width");
  o.add(app, "--depth", "search.depth", "maximum depth");
  o.add(app, "--mode", "search.mode", "deductive | adequacy");
  o.add(app, "--backend", "backend.kind", "mock | wire");
  o.add(app, "--model", "backend.model", "model name for the wire backend");
  o.add(app, "--endpoint", "backend.endpoint", "wire backend base URL");
  o.add(app, "--mock-script", "mock.script", "mock answer key (JSON lines)");
  o.add(app, "--adequacy-policy", "mock.adequacy",
        "mock adequacy verdicts: entailment | always | never");
  o.add(app, "--demonstrations", "prompts.demonstrations", "few-shot file (JSON)");
}

KnowledgeGraph load_graph(const RunConfig& cfg) {
  if (cfg.kg.empty()) throw UsageError("no knowledge graph given (--kg or kg =)");
  if (!fs::exists(cfg.kg)) throw UsageError("knowledge graph file not found: " + cfg.kg);
  try {
    return KnowledgeGraph::load_file(cfg.kg);
  } catch (const ParseError& e) {
    throw UsageError(cfg.kg + ": " + e.what());
  }
}

std::unique_ptr<Embedder> make_embedder(const RunConfig& cfg) {
  if (cfg.embedder_kind == "remote") {
    return std::make_unique<RemoteEmbedder>(cfg.embedder_endpoint, cfg.embedder_dimension,
                                            std::make_shared<HttplibTransport>());
  }
  return std::make_unique<HashEmbedder>(cfg.embedder_dimension);
}

/// Loads the configured index and checks it against graph and embedder, or
/// builds one in memory when no index path is configured.
EmbeddingIndex obtain_index(const RunConfig& cfg, const KnowledgeGraph& graph,
                            const Embedder& embedder) {
  if (cfg.index.empty()) return EmbeddingIndex::build(graph, embedder);
  if (!fs::exists(cfg.index)) {
    throw UsageError("index file not found: " + cfg.index +
                     "; build it with `kgqa index`");
  }
  auto idx = EmbeddingIndex::load_file(cfg.index);
  if (idx.fingerprint() != embedder.fingerprint()) {
    throw UsageError("index " + cfg.index + " was built with embedder '" +
                     idx.fingerprint() + "', configured embedder is '" +
                     embedder.fingerprint() + "'; re-run `kgqa index`");
  }
  if (!idx.consistent_with(graph)) {
    throw UsageError("index " + cfg.index + " does not match " + cfg.kg +
                     "; re-run `kgqa index`");
  }
  return idx;
}

PromptCatalog make_catalog(const RunConfig& cfg) {
  PromptCatalog catalog(cfg.num_demonstrations);
  if (!cfg.demonstrations.empty()) catalog.load_demonstrations(cfg.demonstrations);
  return catalog;
}

std::unique_ptr<LlmBackend> make_backend(const RunConfig& cfg,
                                         const KnowledgeGraph& graph,
                                         const std::string& script_fallback) {
  if (cfg.backend_kind == "wire") {
    if (cfg.endpoint.model.empty()) throw UsageError("wire backend needs backend.model");
    return std::make_unique<WireBackend>(cfg.endpoint,
                                         std::make_shared<HttplibTransport>());
  }
  const std::string script = cfg.mock_script.empty() ? script_fallback : cfg.mock_script;
  if (script.empty()) throw UsageError("mock backend needs mock.script");
  if (!fs::exists(script)) throw UsageError("mock script not found: " + script);
  return std::make_unique<MockBackend>(graph, load_mock_script_file(script),
                                       cfg.mock_adequacy);
}

std::string fixed3(std::optional<double> v) {
  return v ? fmt::format("{:.3f}", *v) : std::string("n/a");
}

void print_answers(std::ostream& out, const DvbsResult& res) {
  const auto& a = res.answers;
  if (a.answers.empty()) {
    out << "answers: none (" << (a.reason.empty() ? "no-deducible-path" : a.reason)
        << ")\n";
  } else {
    out << "answers:";
    for (std::size_t i = 0; i < a.answers.size(); ++i) {
      out << (i ? ", " : " ") << a.answers[i];
    }
    if (a.fallback) out << " (from path terminals)";
    out << "\n";
  }
  out << "paths:";
  if (a.supporting_paths.empty()) out << " none";
  out << "\n";
  for (std::size_t i = 0; i < a.supporting_paths.size(); ++i) {
    out << "  " << to_arrow_string(a.supporting_paths[i]);
    if (i < a.indirect.size() && a.indirect[i]) out << " [indirect]";
    out << "\n";
  }
}

void write_trace_file(const std::string& path, const std::vector<Json>& records) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write trace: " + path);
  write_jsonl(f, records);
}

std::vector<Json> read_trace_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open trace: " + path);
  return read_jsonl(f);
}

int cmd_index(const RunConfig& cfg, const std::string& out_path, std::ostream& out) {
  const std::string target = out_path.empty() ? cfg.index : out_path;
  if (target.empty()) throw UsageError("no index output path (--out or index =)");
  const auto graph = load_graph(cfg);
  const auto embedder = make_embedder(cfg);
  const auto idx = EmbeddingIndex::build(graph, *embedder);
  idx.save_file(target);
  out << "entities: " << idx.entity_count() << "\n"
      << "relations: " << idx.relation_count() << "\n"
      << "triples: " << graph.triple_count() << "\n"
      << "dimension: " << idx.dimension() << "\n"
      << "fingerprint: " << idx.fingerprint() << "\n"
      << "index: " << target << "\n";
  return kExitOk;
}

int cmd_ask(const RunConfig& cfg, const std::string& question,
            const std::vector<std::string>& topics, const std::string& trace_path,
            const std::string& replay_path, std::ostream& out, std::ostream& err) {
  const auto graph = load_graph(cfg);
  const auto embedder = make_embedder(cfg);
  const auto idx = obtain_index(cfg, graph, *embedder);
  const auto catalog = make_catalog(cfg);
  const Retrieval retrieval{graph, idx, *embedder};

  DvbsResult res;
  if (!replay_path.empty()) {
    res = replay_trace(read_trace_file(replay_path), retrieval, catalog);
  } else {
    if (question.empty()) throw UsageError("ask needs --question (or --replay)");
    if (topics.empty()) throw UsageError("ask needs at least one --topic-entity");
    auto backend = make_backend(cfg, graph, {});
    Gateway gw(*backend, catalog, cfg.decode, cfg.json_retries);
    try {
      res = run_dvbs(question, topics, retrieval, gw, cfg.search, cfg.retrieval);
    } catch (const TopicError& e) {
      throw UsageError(e.what());
    }
    const std::string tp = trace_path.empty() ? cfg.trace_path : trace_path;
    if (!tp.empty()) write_trace_file(tp, res.trace);
  }
  if (res.failure) {
    err << "error: " << *res.failure << "\n";
    return kExitRuntime;
  }
  print_answers(out, res);
  out << "calls: " << res.usage.base_calls() << " (budget " << call_budget(cfg.search)
      << ")\n";
  if (!replay_path.empty()) out << "replayed: " << replay_path << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg, const std::string& dataset_path,
             const std::string& out_path, const std::string& name, std::ostream& out) {
  if (dataset_path.empty()) throw UsageError("eval needs --dataset");
  if (!fs::exists(dataset_path)) throw UsageError("dataset not found: " + dataset_path);
  const auto dataset = load_dataset_file(dataset_path);
  if (dataset.empty()) throw std::runtime_error("no records in " + dataset_path);
  const auto graph = load_graph(cfg);
  const auto embedder = make_embedder(cfg);
  const auto idx = obtain_index(cfg, graph, *embedder);
  const auto catalog = make_catalog(cfg);
  auto backend = make_backend(cfg, graph, dataset_path);

  ExperimentConfig ec;
  ec.name = name;
  ec.search = cfg.search;
  ec.retrieval = cfg.retrieval;
  ec.decode = cfg.decode;
  ec.json_retries = cfg.json_retries;
  ec.parallelism = cfg.parallelism;
  const auto report =
      run_experiment(dataset, Retrieval{graph, idx, *embedder}, *backend, catalog, ec);

  const std::string target = out_path.empty() ? cfg.report_path : out_path;
  if (!target.empty()) {
    std::ofstream f(target);
    if (!f) throw std::runtime_error("cannot write report: " + target);
    f << report.to_json().dump(2) << "\n";
  }
  const auto& a = report.aggregates;
  out << fmt::format("{:<12}{}\n", "run", report.name)
      << fmt::format("{:<12}{}\n", "questions", a.questions)
      << fmt::format("{:<12}{}\n", "succeeded", a.succeeded)
      << fmt::format("{:<12}{}\n", "failed", a.failed)
      << fmt::format("{:<12}{:.3f}\n", "hits@1", a.hits_at_1)
      << fmt::format("{:<12}{:.3f}\n", "f1", a.f1)
      << fmt::format("{:<12}{:.3f}\n", "accuracy", a.accuracy)
      << fmt::format("{:<12}{}\n", "CR", fixed3(a.coverage))
      << fmt::format("{:<12}{}\n", "VR", fixed3(a.validity))
      << fmt::format("{:<12}{}\n", "avg_depth", fixed3(a.avg_depth))
      << fmt::format("{:<12}{:.2f}\n", "avg_calls", a.avg_calls)
      << fmt::format("{:<12}{:.1f}\n", "avg_tokens", a.avg_tokens);
  if (!target.empty()) out << fmt::format("{:<12}{}\n", "report", target);
  return a.failed == a.questions ? kExitRuntime : kExitOk;
}

int cmd_validate(const RunConfig& cfg, const std::string& paths_file, std::ostream& out) {
  if (paths_file.empty()) throw UsageError("validate needs --paths");
  const auto graph = load_graph(cfg);
  std::ifstream in(paths_file);
  if (!in) throw UsageError("cannot open paths file: " + paths_file);
  StepTally tally;
  std::size_t missing = 0, malformed = 0, paths = 0;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    ++paths;
    const auto p = parse_arrow_path(t);
    if (!p) {
      // An unparseable line stands for one invalid step.
      ++malformed;
      ++tally.total;
      continue;
    }
    const auto r = graph.validate(*p);
    tally.add(r);
    missing += r.count(StepError::missing_triple);
    malformed += r.count(StepError::format_error);
  }
  out << "paths: " << paths << "\n"
      << "steps: " << tally.total << "\n"
      << "valid: " << tally.valid << "\n"
      << "VR: " << fixed3(tally.ratio()) << "\n"
      << "missing-triple: " << missing << "\n"
      << "format-error: " << malformed << "\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-graph question answering with verified reasoning paths"};
  app.require_subcommand(1);

  Overrides o_index, o_ask, o_eval, o_validate;

  auto* index = app.add_subcommand("index", "embed the graph vocabulary into an index file");
  add_common(index, o_index);
  std::string index_out;
  index->add_option("--out", index_out, "index output path (defaults to --index)");

  auto* ask = app.add_subcommand("ask", "answer one question");
  add_common(ask, o_ask);
  add_search(ask, o_ask);
  std::string question, trace_path, replay_path;
  std::vector<std::string> topics;
  ask->add_option("--question,-q", question, "question text");
  ask->add_option("--topic-entity,-t", topics, "topic entity (repeatable)");
  ask->add_option("--trace", trace_path, "write the JSONL trace here");
  ask->add_option("--replay", replay_path, "re-derive answers from a recorded trace");

  auto* eval = app.add_subcommand("eval", "evaluate a dataset and write a report");
  add_common(eval, o_eval);
  add_search(eval, o_eval);
  std::string dataset, report_out, run_name = "run";
  eval->add_option("--dataset", dataset, "JSON-lines dataset");
  eval->add_option("--out", report_out, "report JSON path");
  eval->add_option("--name", run_name, "run name recorded in the report");
  o_eval.add(eval, "--parallelism", "eval.parallelism", "questions in flight");

  auto* validate = app.add_subcommand("validate", "validity ratio of arrow-format paths");
  add_common(validate, o_validate);
  std::string paths_file;
  validate->add_option("--paths", paths_file, "one arrow-format path per line");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (index->parsed()) return cmd_index(o_index.resolve(), index_out, out);
    if (ask->parsed()) {
      return cmd_ask(o_ask.resolve(), question, topics, trace_path, replay_path, out, err);
    }
    if (eval->parsed()) return cmd_eval(o_eval.resolve(), dataset, report_out, run_name, out);
    if (validate->parsed()) return cmd_validate(o_validate.resolve(), paths_file, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace kgqa::cli
