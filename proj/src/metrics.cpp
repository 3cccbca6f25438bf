#include "kgqa/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <set>

#include "kgqa/json_repair.hpp"
#include "kgqa/text.hpp"

namespace kgqa {

std::string normalize(std::string_view text) { return normalize_answer(text); }

namespace {

std::set<std::string> normalized_set(const std::vector<std::string>& xs) {
  std::set<std::string> out;
  for (const auto& x : xs) out.insert(normalize(x));
  return out;
}

void require_gold(const std::vector<std::string>& gold) {
  if (gold.empty()) throw std::invalid_argument("gold answer set is empty");
}

}  // namespace

int hits_at_1(const std::vector<std::string>& predicted,
              const std::vector<std::string>& gold) {
  require_gold(gold);
  if (predicted.empty()) return 0;
  return normalized_set(gold).contains(normalize(predicted.front())) ? 1 : 0;
}

double f1_score(const std::vector<std::string>& predicted,
                const std::vector<std::string>& gold) {
  require_gold(gold);
  const auto p = normalized_set(predicted);
  const auto g = normalized_set(gold);
  if (p.empty()) return 0.0;
  std::size_t tp = 0;
  for (const auto& x : p) tp += g.contains(x) ? 1 : 0;
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(p.size());
  const double recall = static_cast<double>(tp) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

int accuracy(const std::vector<std::string>& predicted,
             const std::vector<std::string>& gold) {
  require_gold(gold);
  const auto g = normalized_set(gold);
  for (const auto& x : predicted) {
    if (g.contains(normalize(x))) return 1;
  }
  return 0;
}

std::optional<double> validity_ratio(const KnowledgeGraph& graph,
                                     const std::vector<ReasoningPath>& paths) {
  StepTally t;
  for (const auto& p : paths) t.add(graph.validate(p));
  return t.ratio();
}

std::optional<double> avg_depth(
    const std::vector<std::vector<std::size_t>>& depths_per_question) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& q : depths_per_question) {
    if (q.empty()) continue;
    double s = 0.0;
    for (auto d : q) s += static_cast<double>(d);
    sum += s / static_cast<double>(q.size());
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

DatasetError::DatasetError(std::size_t line, const std::string& what)
    : std::runtime_error("dataset line " + std::to_string(line) + ": " + what),
      line_(line) {}

namespace {

std::vector<std::string> string_list(const Json& rec, const char* field,
                                     std::size_t line, bool required) {
  if (!rec.contains(field)) {
    if (required) throw DatasetError(line, std::string("missing \"") + field + "\"");
    return {};
  }
  const auto& v = rec[field];
  if (!v.is_array()) {
    throw DatasetError(line, std::string("\"") + field + "\" must be an array");
  }
  std::vector<std::string> out;
  for (const auto& x : v) {
    if (!x.is_string()) {
      throw DatasetError(line, std::string("\"") + field + "\" holds a non-string");
    }
    out.push_back(x.get<std::string>());
  }
  if (required && out.empty()) {
    throw DatasetError(line, std::string("\"") + field + "\" is empty");
  }
  return out;
}

}  // namespace

std::vector<QARecord> load_dataset(std::istream& in) {
  std::vector<QARecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const Json rec = Json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.is_object()) {
      throw DatasetError(line_no, "not a JSON object");
    }
    QARecord r;
    if (!rec.contains("question") || !rec["question"].is_string()) {
      throw DatasetError(line_no, "missing \"question\"");
    }
    r.question = rec["question"].get<std::string>();
    if (rec.contains("id")) {
      r.id = rec["id"].is_string() ? rec["id"].get<std::string>() : rec["id"].dump();
    } else {
      r.id = std::to_string(out.size());
    }
    r.answers = string_list(rec, "answers", line_no, true);
    r.topic_entities = string_list(rec, "topic_entities", line_no, true);
    for (const auto& s : string_list(rec, "ground_truth_paths", line_no, false)) {
      auto p = parse_arrow_path(s);
      if (!p) throw DatasetError(line_no, "unparseable ground-truth path: " + s);
      r.ground_truth_paths.push_back(std::move(*p));
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<QARecord> load_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  return load_dataset(in);
}

}  // namespace kgqa
