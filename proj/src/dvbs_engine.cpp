#include "kgqa/dvbs_engine.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <exception>
#include <future>
#include <limits>

#include "kgqa/backends.hpp"
#include "kgqa/text.hpp"

namespace kgqa {

void SearchConfig::validate() const {
  if (beam_width == 0) throw std::invalid_argument("search.width must be >= 1");
  if (max_depth == 0) throw std::invalid_argument("search.depth must be >= 1");
}

std::size_t call_budget(std::size_t beam_width, std::size_t max_depth,
                        std::size_t c) {
  return beam_width * max_depth + max_depth + c;
}

std::size_t call_budget(const SearchConfig& config) {
  return call_budget(config.effective_width(), config.max_depth);
}

std::string_view to_string(SelectionMethod m) {
  switch (m) {
    case SelectionMethod::all:
      return "all";
    case SelectionMethod::llm:
      return "llm";
    case SelectionMethod::llm_filled:
      return "llm-filled";
    case SelectionMethod::fallback_invalid:
      return "fallback-invalid";
    case SelectionMethod::fallback_unusable:
      return "fallback-unusable";
    case SelectionMethod::fallback_budget:
      return "fallback-budget";
  }
  return "unknown";
}

namespace {

std::vector<std::size_t> indices_from(const Json& list, std::size_t count,
                                      std::size_t k) {
  std::vector<std::size_t> out;
  for (const auto& item : list) {
    if (out.size() >= k) break;
    if (!item.is_number_integer()) continue;
    const auto v = item.get<long long>();
    if (v < 0 || static_cast<std::size_t>(v) >= count) continue;
    const auto idx = static_cast<std::size_t>(v);
    if (std::find(out.begin(), out.end(), idx) == out.end()) out.push_back(idx);
  }
  return out;
}

std::vector<std::size_t> first_k(std::size_t count, std::size_t k) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(count, k); ++i) out.push_back(i);
  return out;
}

}  // namespace

std::optional<std::vector<std::size_t>> parse_selection(std::string_view text,
                                                        std::size_t count,
                                                        std::size_t k) {
  const auto j = extract_json(text, JsonHint::array);
  if (!j) return std::nullopt;
  return indices_from(*j, count, k);
}

Selection select_steps(Gateway& gw, std::string_view question, const Plan& plan,
                       const std::vector<ReasoningPath>& candidates,
                       std::size_t k, TraceSink* sink) {
  if (candidates.size() <= k) {
    return {first_k(candidates.size(), k), SelectionMethod::all};
  }
  std::string listing;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i) listing += "; ";
    listing += "[" + std::to_string(i) + "] " + to_arrow_string(candidates[i]);
  }
  const auto prompt = gw.render(
      PromptKey::beam_select,
      {{"plan_context", join(plan.planning_steps, " ")},
       {"Query", std::string(question)},
       {"beam_width", std::to_string(k)},
       {"reasoning_paths", listing}},
      {{ctx::kQuestion, std::string(question)},
       {ctx::kOpenSlots, std::to_string(k)},
       {ctx::kCandidateCount, std::to_string(candidates.size())}});
  Json list;
  try {
    list = gw.complete_json(prompt, JsonHint::array, gw.json_retries(), {}, sink);
  } catch (const JsonFailure&) {
    spdlog::warn("beam selection unusable; keeping Path-RAG order");
    return {first_k(candidates.size(), k), SelectionMethod::fallback_unusable};
  }
  auto chosen = indices_from(list, candidates.size(), k);
  if (chosen.empty()) {
    spdlog::warn("beam selection named no valid index; keeping Path-RAG order");
    return {first_k(candidates.size(), k), SelectionMethod::fallback_invalid};
  }
  if (chosen.size() == k) return {std::move(chosen), SelectionMethod::llm};
  for (std::size_t i = 0; i < candidates.size() && chosen.size() < k; ++i) {
    if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) {
      chosen.push_back(i);
    }
  }
  return {std::move(chosen), SelectionMethod::llm_filled};
}

std::string render_premises(const ReasoningPath& path) {
  std::string out;
  const std::string* prev = &path.start;
  for (std::size_t i = 0; i < path.steps.size(); ++i) {
    const auto& s = path.steps[i];
    if (i) out += "; ";
    out += *prev + " -> " + s.relation + " -> " + s.entity;
    out += i + 1 == path.steps.size() ? " (from the next step candidates)"
                                      : " (from the current reasoning path)";
    prev = &s.entity;
  }
  return out;
}

StepVerdict deductive_verify(Gateway& gw, std::string_view question,
                             const Plan& plan, const ReasoningPath& path,
                             TraceSink* sink) {
  if (path.steps.empty()) return {};
  const auto prompt = gw.render(
      PromptKey::deductive_verify,
      {{"Query", std::string(question)},
       {"declarative_statement", plan.fill(path.terminal())},
       {"parsed_reasoning_path", render_premises(path)}},
      {{ctx::kQuestion, std::string(question)},
       {ctx::kPath, to_arrow_string(path)}});
  const auto d = parse_dual_verdict(gw.call(prompt, false, sink).text);
  return {d.step, d.conclusion, d.clean};
}

bool verify_local(Gateway& gw, std::string_view question, const Plan& plan,
                  const ReasoningPath& prefix, const ReasoningStep& step,
                  TraceSink* sink) {
  return deductive_verify(gw, question, plan, prefix.extended(step), sink).local;
}

bool verify_global(Gateway& gw, std::string_view question, const Plan& plan,
                   const ReasoningPath& path, TraceSink* sink) {
  if (path.steps.empty()) return false;
  return deductive_verify(gw, question, plan, path, sink).global;
}

bool adequacy_verify(Gateway& gw, std::string_view question,
                     const ReasoningPath& path, TraceSink* sink) {
  if (path.steps.empty()) return false;
  const auto prompt =
      gw.render(PromptKey::adequacy_verify,
                {{"Query", std::string(question)},
                 {"reasoning_path", to_arrow_string(path)}},
                {{ctx::kQuestion, std::string(question)},
                 {ctx::kPath, to_arrow_string(path)}});
  const auto text = gw.call(prompt, false, sink).text;
  const auto v = classify_yes_no(text);
  if (!v) spdlog::warn("adequacy answer is neither yes nor no; reading as no");
  return v.value_or(false);
}

std::vector<std::string> parse_answer_list(std::string_view text) {
  std::vector<std::string> out;
  auto add = [&](std::string_view raw) {
    auto s = trim(raw);
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') &&
        s.back() == s.front()) {
      s = trim(s.substr(1, s.size() - 2));
    }
    if (s.substr(0, 2) == "- " || s.substr(0, 2) == "* ") s = trim(s.substr(2));
    if (!s.empty() && std::find(out.begin(), out.end(), s) == out.end()) {
      out.emplace_back(s);
    }
  };
  const auto body = strip_code_fences(text);
  if (auto span = bracket_match(body, '[')) {
    const Json j = Json::parse(*span, nullptr, false);
    if (!j.is_discarded() && j.is_array() &&
        std::all_of(j.begin(), j.end(), [](const Json& x) { return x.is_string(); })) {
      for (const auto& x : j) add(x.get<std::string>());
      return out;
    }
  }
  std::string_view rest = body;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= rest.size(); ++i) {
    if (i == rest.size() || rest[i] == '\n' || rest[i] == ',' || rest[i] == ';') {
      add(rest.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

namespace {

std::vector<std::string> terminals(const std::vector<Hypothesis>& paths) {
  std::vector<std::string> out;
  for (const auto& h : paths) {
    if (std::find(out.begin(), out.end(), h.path.terminal()) == out.end()) {
      out.push_back(h.path.terminal());
    }
  }
  return out;
}

}  // namespace

AnswerSet final_reason(Gateway& gw, std::string_view question,
                       const std::vector<Hypothesis>& paths, bool use_llm,
                       TraceSink* sink) {
  AnswerSet out;
  if (paths.empty()) {
    out.reason = "no-deducible-path";
    return out;
  }
  std::vector<std::string> raw;
  if (use_llm) {
    std::vector<std::string> arrows;
    for (const auto& h : paths) arrows.push_back(to_arrow_string(h.path));
    const auto joined = join(arrows, "\n");
    const auto prompt = gw.render(
        PromptKey::final_reason,
        {{"Query", std::string(question)}, {"reasoning_path", joined}},
        {{ctx::kQuestion, std::string(question)}, {ctx::kPaths, joined}});
    raw = parse_answer_list(gw.call(prompt, false, sink).text);
    if (raw.empty()) {
      spdlog::warn("final answer unusable; answering with path terminals");
      out.fallback = true;
    }
  }
  if (raw.empty()) raw = terminals(paths);

  constexpr auto kNoRank = std::numeric_limits<std::size_t>::max();
  std::vector<std::pair<std::size_t, std::string>> ranked;
  std::vector<std::string> seen;
  for (const auto& a : raw) {
    const auto key = normalize_answer(a);
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
    seen.push_back(key);
    std::size_t rank = kNoRank;
    for (const auto& h : paths) {
      if (normalize_answer(h.path.terminal()) == key) {
        rank = std::min(rank, h.selection_rank);
      }
    }
    ranked.emplace_back(rank, a);
  }
  std::sort(ranked.begin(), ranked.end());
  for (auto& [_, a] : ranked) out.answers.push_back(std::move(a));
  for (const auto& h : paths) {
    out.supporting_paths.push_back(h.path);
    out.indirect.push_back(std::find(seen.begin(), seen.end(),
                                     normalize_answer(h.path.terminal())) ==
                           seen.end());
  }
  return out;
}

Json to_json(const SearchConfig& c) {
  return Json{{"beam_width", c.beam_width},
              {"max_depth", c.max_depth},
              {"use_planning", c.use_planning},
              {"use_deductive_verifier", c.use_deductive_verifier},
              {"use_beam_search", c.use_beam_search},
              {"use_last_step_reasoning", c.use_last_step_reasoning},
              {"adequacy_mode", c.adequacy_mode}};
}

Json to_json(const RetrievalConfig& c) {
  return Json{{"mode", to_string(c.mode)},
              {"top_m", c.m},
              {"alpha", c.alpha},
              {"neighbor_cap", c.neighbor_cap}};
}

SearchConfig search_config_from_json(const Json& j) {
  SearchConfig c;
  c.beam_width = j.at("beam_width").get<std::size_t>();
  c.max_depth = j.at("max_depth").get<std::size_t>();
  c.use_planning = j.at("use_planning").get<bool>();
  c.use_deductive_verifier = j.at("use_deductive_verifier").get<bool>();
  c.use_beam_search = j.at("use_beam_search").get<bool>();
  c.use_last_step_reasoning = j.at("use_last_step_reasoning").get<bool>();
  c.adequacy_mode = j.at("adequacy_mode").get<bool>();
  return c;
}

RetrievalConfig retrieval_config_from_json(const Json& j) {
  RetrievalConfig c;
  const auto mode = parse_retriever_mode(j.at("mode").get<std::string>());
  if (!mode) throw std::invalid_argument("unknown retriever mode in trace");
  c.mode = *mode;
  c.m = j.at("top_m").get<std::size_t>();
  c.alpha = j.at("alpha").get<double>();
  c.neighbor_cap = j.at("neighbor_cap").get<std::size_t>();
  return c;
}

namespace {

struct PoolEntry {
  std::size_t parent;  // index into the beam
  ScoredCandidate candidate;
  ReasoningPath path;
};

Json candidate_json(const ScoredCandidate& c) {
  Json j{{"relation", c.step.relation},
         {"entity", c.step.entity},
         {"base", c.base_score},
         {"bonus", c.lookahead_bonus},
         {"total", c.total_score}};
  if (c.missing_component) j["missing_component"] = true;
  return j;
}

std::vector<std::string> arrows(const std::vector<ReasoningPath>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(to_arrow_string(p));
  return out;
}

class TraceScope {
 public:
  TraceScope(Gateway& gw, TraceSink* sink) : gw_(gw), prev_(gw.trace()) {
    gw_.set_trace(sink);
  }
  ~TraceScope() { gw_.set_trace(prev_); }

 private:
  Gateway& gw_;
  TraceSink* prev_;
};

/// Runs verifications in candidate order, concurrently when the backend
/// allows, flushing each candidate's trace records in that same order.
std::vector<StepVerdict> run_verifications(Gateway& gw, TraceSink& trace,
                                           std::string_view question,
                                           const Plan& plan, bool adequacy,
                                           const std::vector<ReasoningPath>& paths) {
  std::vector<StepVerdict> verdicts(paths.size());
  std::vector<BufferSink> buffers(paths.size());
  auto work = [&](std::size_t i) {
    if (adequacy) {
      const bool ok = adequacy_verify(gw, question, paths[i], &buffers[i]);
      verdicts[i] = {true, ok, true};
    } else {
      verdicts[i] = deductive_verify(gw, question, plan, paths[i], &buffers[i]);
    }
  };
  const std::size_t limit = std::max<std::size_t>(1, gw.backend().caps().max_concurrency);
  std::exception_ptr error;
  if (limit == 1 || paths.size() <= 1) {
    try {
      for (std::size_t i = 0; i < paths.size(); ++i) work(i);
    } catch (...) {
      error = std::current_exception();
    }
  } else {
    for (std::size_t lo = 0; lo < paths.size(); lo += limit) {
      const std::size_t hi = std::min(paths.size(), lo + limit);
      std::vector<std::future<void>> jobs;
      for (std::size_t i = lo; i < hi; ++i) {
        jobs.push_back(std::async(std::launch::async, work, i));
      }
      for (auto& f : jobs) {
        try {
          f.get();
        } catch (...) {
          if (!error) error = std::current_exception();
        }
      }
      if (error) break;
    }
  }
  for (auto& b : buffers) b.flush_to(trace);
  if (error) std::rethrow_exception(error);
  return verdicts;
}

}  // namespace

DvbsResult run_dvbs(std::string_view question,
                    const std::vector<std::string>& topic_entities,
                    const Retrieval& retrieval, Gateway& gw,
                    const SearchConfig& search, const RetrievalConfig& rconf) {
  search.validate();
  rconf.validate();
  if (trim(question).empty()) throw std::invalid_argument("question is empty");
  const auto& graph = retrieval.graph;
  const std::string q(trim(question));

  std::vector<std::string> topics;
  std::vector<std::string> missing_topics;
  for (const auto& raw : topic_entities) {
    auto t = normalize_identifier(raw);
    if (!graph.has_entity(t)) {
      spdlog::warn("topic entity '{}' is not in the knowledge graph", t);
      missing_topics.push_back(std::move(t));
    } else if (std::find(topics.begin(), topics.end(), t) == topics.end()) {
      topics.push_back(std::move(t));
    }
  }
  if (topics.empty()) {
    throw TopicError("none of the topic entities is in the knowledge graph");
  }

  MemoryTrace trace;
  TraceScope scope(gw, &trace);
  DvbsResult out;
  const auto start = gw.ledger().snapshot();
  const std::size_t width = search.effective_width();
  const std::size_t budget = call_budget(search);
  const std::size_t reserve_final = search.use_last_step_reasoning ? 1 : 0;
  auto remaining = [&] {
    const auto used = gw.ledger().snapshot().base_calls() - start.base_calls();
    return budget > used ? budget - used : 0;
  };

  trace.write(Json{{"type", "header"},
                   {"schema", kTraceSchema},
                   {"question", q},
                   {"topic_entities", topics},
                   {"search", to_json(search)},
                   {"retrieval", to_json(rconf)},
                   {"decode",
                    {{"temperature", gw.params().temperature},
                     {"top_p", gw.params().top_p}}},
                   {"json_retries", gw.json_retries()},
                   {"embedder", retrieval.embedder.fingerprint()},
                   {"call_budget", budget}});
  for (const auto& t : missing_topics) {
    trace.write(Json{{"type", "warning"}, {"topic_not_in_graph", t}});
  }

  try {
    std::string plan_source = "model";
    if (search.use_planning) {
      out.plan = gw.generate_plan(q);
      if (out.plan.degraded) plan_source = "fallback";
    } else {
      out.plan = degraded_plan(q);
      out.plan.degraded = false;
      plan_source = "disabled";
    }
    Json plan_rec = out.plan.to_json();
    plan_rec["type"] = "plan";
    plan_rec["source"] = plan_source;
    trace.write(std::move(plan_rec));

    const QueryScorer scorer(
        graph, retrieval.index, retrieval.embedder,
        retrieval.embedder.embed(KeywordSet{out.plan.keywords}.joined_text()));

    std::vector<Hypothesis> beam;
    for (std::size_t i = 0; i < topics.size(); ++i) {
      beam.push_back({ReasoningPath{topics[i], {}}, i, false});
    }
    std::vector<Hypothesis> dead_ends;

    for (std::size_t depth = 1; depth <= search.max_depth; ++depth) {
      std::vector<std::size_t> live;
      for (std::size_t i = 0; i < beam.size(); ++i) {
        if (!beam[i].halted) live.push_back(i);
      }
      const std::size_t halted_count = beam.size() - live.size();
      if (live.empty() || halted_count >= width) break;
      const std::size_t open = width - halted_count;
      out.reached_depth = depth;

      std::vector<PoolEntry> pool;
      StepSet depth_union;
      for (const auto li : live) {
        const auto& h = beam[li];
        auto cands = scorer.candidate_steps(h.path.terminal(), rconf);
        Json rec{{"type", "hypothesis"},
                 {"depth", depth},
                 {"rank", h.selection_rank},
                 {"path", to_arrow_string(h.path)},
                 {"candidates", Json::array()}};
        for (const auto& c : cands) rec["candidates"].push_back(candidate_json(c));
        trace.write(std::move(rec));
        if (cands.empty() && !h.path.steps.empty()) dead_ends.push_back(h);
        for (auto& c : cands) {
          depth_union.insert(c.step);
          auto path = h.path.extended(c.step);
          pool.push_back({li, std::move(c), std::move(path)});
        }
      }
      out.candidates_per_depth.push_back(std::move(depth_union));

      std::vector<Hypothesis> next;
      for (const auto& h : beam) {
        if (h.halted) next.push_back(h);
      }
      if (pool.empty()) {
        beam = std::move(next);
        break;
      }

      std::vector<ReasoningPath> pool_paths;
      for (const auto& p : pool) pool_paths.push_back(p.path);
      Selection sel;
      const std::size_t verify_need = search.verifies() ? open : 0;
      if (pool.size() <= open) {
        sel = {first_k(pool.size(), open), SelectionMethod::all};
      } else if (remaining() >= 1 + verify_need + reserve_final) {
        sel = select_steps(gw, q, out.plan, pool_paths, open);
      } else {
        sel = {first_k(pool.size(), open), SelectionMethod::fallback_budget};
      }
      trace.write(Json{{"type", "selection"},
                       {"depth", depth},
                       {"open_slots", open},
                       {"pool_size", pool.size()},
                       {"method", to_string(sel.method)},
                       {"chosen", sel.chosen}});

      std::vector<ReasoningPath> chosen_paths;
      for (const auto i : sel.chosen) chosen_paths.push_back(pool[i].path);
      std::size_t allowed = chosen_paths.size();
      if (search.verifies()) {
        const auto rem = remaining();
        allowed = std::min(allowed, rem > reserve_final ? rem - reserve_final : 0);
      }
      std::vector<StepVerdict> verdicts;
      if (search.verifies() && allowed > 0) {
        verdicts = run_verifications(
            gw, trace, q, out.plan, search.adequacy_mode,
            std::vector<ReasoningPath>(chosen_paths.begin(),
                                       chosen_paths.begin() + static_cast<long>(allowed)));
      }

      for (std::size_t j = 0; j < chosen_paths.size(); ++j) {
        std::string outcome = "live";
        Json rec{{"type", "verdict"},
                 {"depth", depth},
                 {"path", to_arrow_string(chosen_paths[j])}};
        if (search.verifies()) {
          if (j >= allowed) {
            outcome = "pruned-budget";
          } else {
            const auto& v = verdicts[j];
            if (!search.adequacy_mode) rec["local"] = v.local;
            rec["global"] = v.global;
            if (!v.local) {
              outcome = "pruned";
            } else if (v.global) {
              outcome = "halted";
            }
          }
        }
        rec["outcome"] = outcome;
        trace.write(std::move(rec));
        if (outcome == "live" || outcome == "halted") {
          next.push_back({chosen_paths[j], 0, outcome == "halted"});
        }
      }
      for (std::size_t i = 0; i < next.size(); ++i) next[i].selection_rank = i;
      beam = std::move(next);
    }

    std::vector<Hypothesis> finals;
    for (const auto& h : beam) {
      if (search.verifies() ? h.halted : !h.path.steps.empty()) {
        finals.push_back(h);
      }
    }
    if (!search.verifies()) {
      for (const auto& h : dead_ends) finals.push_back(h);
    }
    for (std::size_t i = 0; i < finals.size(); ++i) finals[i].selection_rank = i;
    out.final_hypotheses = finals;
    out.answers = final_reason(gw, q, finals, search.use_last_step_reasoning);

    trace.write(Json{{"type", "final"},
                     {"answers", out.answers.answers},
                     {"paths", arrows(out.answers.supporting_paths)},
                     {"indirect", out.answers.indirect},
                     {"reason", out.answers.reason},
                     {"fallback", out.answers.fallback}});
  } catch (const BackendError& e) {
    out.failure = e.what();
    out.answers = {};
    out.answers.reason = "backend-failure";
    trace.write(Json{{"type", "failure"}, {"error", e.what()}});
  }
  const auto end = gw.ledger().snapshot();
  out.usage.llm_calls = end.llm_calls - start.llm_calls;
  out.usage.retry_calls = end.retry_calls - start.retry_calls;
  out.usage.prompt_tokens = end.prompt_tokens - start.prompt_tokens;
  out.usage.completion_tokens = end.completion_tokens - start.completion_tokens;
  out.usage.transport_attempts = end.transport_attempts - start.transport_attempts;
  out.usage.wall_seconds = end.wall_seconds - start.wall_seconds;
  for (const auto& [k, v] : end.calls_by_key) {
    const auto it = start.calls_by_key.find(k);
    const auto before = it == start.calls_by_key.end() ? 0 : it->second;
    if (v > before) out.usage.calls_by_key[k] = v - before;
  }
  out.trace = trace.records();
  return out;
}

DvbsResult replay_trace(const std::vector<Json>& trace,
                        const Retrieval& retrieval,
                        const PromptCatalog& catalog) {
  const auto header = std::find_if(trace.begin(), trace.end(), [](const Json& r) {
    return r.value("type", "") == "header";
  });
  if (header == trace.end()) throw std::runtime_error("trace has no header record");
  if (header->value("schema", "") != kTraceSchema) {
    throw std::runtime_error("unsupported trace schema: " +
                             header->value("schema", std::string("?")));
  }
  if (header->value("embedder", "") != retrieval.embedder.fingerprint()) {
    throw std::runtime_error("trace was recorded with embedder '" +
                             header->value("embedder", std::string("?")) +
                             "', not '" + retrieval.embedder.fingerprint() + "'");
  }
  ReplayBackend backend(trace);
  DecodeParams params;
  params.temperature = header->at("decode").at("temperature").get<double>();
  params.top_p = header->at("decode").at("top_p").get<double>();
  Gateway gw(backend, catalog, params, header->at("json_retries").get<std::size_t>());
  return run_dvbs(header->at("question").get<std::string>(),
                  header->at("topic_entities").get<std::vector<std::string>>(),
                  retrieval, gw, search_config_from_json(header->at("search")),
                  retrieval_config_from_json(header->at("retrieval")));
}

}  // namespace kgqa
