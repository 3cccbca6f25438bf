#include "kgqa/kg_store.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "kgqa/hash.hpp"
#include "kgqa/text.hpp"

namespace kgqa {

ReasoningPath ReasoningPath::extended(ReasoningStep step) const {
  ReasoningPath out = *this;
  out.steps.push_back(std::move(step));
  return out;
}

std::string to_arrow_string(const ReasoningPath& path) {
  std::string out = path.start;
  for (const auto& s : path.steps) {
    out += " -> ";
    out += s.relation;
    out += " -> ";
    out += s.entity;
  }
  return out;
}

std::optional<ReasoningPath> parse_arrow_path(std::string_view text) {
  static constexpr std::string_view kAscii = "->";
  static constexpr std::string_view kUnicode = "\xE2\x86\x92";  // U+2192
  std::vector<std::string> segments;
  std::size_t pos = 0;
  std::size_t seg_start = 0;
  while (pos < text.size()) {
    std::size_t width = 0;
    if (text.substr(pos, kAscii.size()) == kAscii) {
      width = kAscii.size();
    } else if (text.substr(pos, kUnicode.size()) == kUnicode) {
      width = kUnicode.size();
    }
    if (width) {
      segments.push_back(normalize_identifier(text.substr(seg_start, pos - seg_start)));
      pos += width;
      seg_start = pos;
    } else {
      ++pos;
    }
  }
  segments.push_back(normalize_identifier(text.substr(seg_start)));
  if (segments.size() % 2 == 0) return std::nullopt;
  for (const auto& s : segments) {
    if (s.empty()) return std::nullopt;
  }
  ReasoningPath path{segments.front(), {}};
  for (std::size_t i = 1; i + 1 < segments.size(); i += 2) {
    path.steps.push_back({segments[i], segments[i + 1]});
  }
  return path;
}

std::string_view to_string(StepError e) {
  switch (e) {
    case StepError::missing_triple:
      return "missing-triple";
    case StepError::format_error:
      return "format-error";
  }
  return "unknown";
}

std::size_t ValidityReport::count(StepError kind) const {
  return static_cast<std::size_t>(
      std::count(step_errors.begin(), step_errors.end(),
                 std::optional<StepError>(kind)));
}

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what),
      line_(line) {}

std::string normalize_identifier(std::string_view raw) {
  return std::string(trim(raw));
}

KnowledgeGraph::KnowledgeGraph(std::vector<Triple> triples,
                               std::vector<std::string> extra_entities) {
  for (auto& t : triples) {
    t.head = normalize_identifier(t.head);
    t.relation = normalize_identifier(t.relation);
    t.tail = normalize_identifier(t.tail);
    if (t.head.empty() || t.relation.empty() || t.tail.empty()) {
      throw std::invalid_argument("triple with an empty field");
    }
  }
  std::sort(triples.begin(), triples.end());
  triples.erase(std::unique(triples.begin(), triples.end()), triples.end());

  for (const auto& t : triples) {
    entities_.push_back(t.head);
    entities_.push_back(t.tail);
    relations_.push_back(t.relation);
  }
  for (auto& e : extra_entities) {
    auto name = normalize_identifier(e);
    if (!name.empty()) entities_.push_back(std::move(name));
  }
  std::sort(entities_.begin(), entities_.end());
  entities_.erase(std::unique(entities_.begin(), entities_.end()),
                  entities_.end());
  std::sort(relations_.begin(), relations_.end());
  relations_.erase(std::unique(relations_.begin(), relations_.end()),
                   relations_.end());

  entity_index_.reserve(entities_.size());
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    entity_index_.emplace(entities_[i], static_cast<EntityId>(i));
  }
  relation_index_.reserve(relations_.size());
  for (std::size_t i = 0; i < relations_.size(); ++i) {
    relation_index_.emplace(relations_[i], static_cast<RelationId>(i));
  }

  // Triples are sorted by (head, relation, tail) and ids are lexicographic
  // ranks, so a single pass yields CSR rows already sorted by (relation, tail).
  offsets_.assign(entities_.size() + 1, 0);
  edges_.reserve(triples.size());
  for (const auto& t : triples) {
    const EntityId h = entity_index_.find(t.head)->second;
    ++offsets_[h + 1];
    edges_.push_back({relation_index_.find(t.relation)->second,
                      entity_index_.find(t.tail)->second});
  }
  for (std::size_t i = 1; i < offsets_.size(); ++i) {
    offsets_[i] += offsets_[i - 1];
  }
}

KnowledgeGraph KnowledgeGraph::load(std::istream& in) {
  std::vector<Triple> triples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 3) {
      throw ParseError(line_no, "expected 3 tab-separated fields, got " +
                                    std::to_string(fields.size()));
    }
    Triple t{normalize_identifier(fields[0]), normalize_identifier(fields[1]),
             normalize_identifier(fields[2])};
    if (t.head.empty() || t.relation.empty() || t.tail.empty()) {
      throw ParseError(line_no, "empty field");
    }
    triples.push_back(std::move(t));
  }
  return KnowledgeGraph(std::move(triples));
}

KnowledgeGraph KnowledgeGraph::load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open knowledge graph file: " +
                             path.string());
  }
  return load(in);
}

void KnowledgeGraph::serialize(std::ostream& out) const {
  for (std::size_t h = 0; h < entities_.size(); ++h) {
    for (const auto& e : out_edges(static_cast<EntityId>(h))) {
      out << entities_[h] << '\t' << relations_[e.relation] << '\t'
          << entities_[e.tail] << '\n';
    }
  }
}

std::vector<Triple> KnowledgeGraph::triples() const {
  std::vector<Triple> out;
  out.reserve(edges_.size());
  for (std::size_t h = 0; h < entities_.size(); ++h) {
    for (const auto& e : out_edges(static_cast<EntityId>(h))) {
      out.push_back({entities_[h], relations_[e.relation], entities_[e.tail]});
    }
  }
  return out;
}

std::optional<EntityId> KnowledgeGraph::entity_id(std::string_view name) const {
  auto it = entity_index_.find(name);
  if (it == entity_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> KnowledgeGraph::relation_id(
    std::string_view name) const {
  auto it = relation_index_.find(name);
  if (it == relation_index_.end()) return std::nullopt;
  return it->second;
}

std::span<const KnowledgeGraph::Edge> KnowledgeGraph::out_edges(
    EntityId head) const {
  if (head + 1 >= offsets_.size()) return {};
  return std::span<const Edge>(edges_).subspan(
      offsets_[head], offsets_[head + 1] - offsets_[head]);
}

std::vector<ReasoningStep> KnowledgeGraph::neighbors(
    std::string_view entity) const {
  std::vector<ReasoningStep> out;
  const auto id = entity_id(entity);
  if (!id) return out;
  const auto edges = out_edges(*id);
  out.reserve(edges.size());
  for (const auto& e : edges) {
    out.push_back({relations_[e.relation], entities_[e.tail]});
  }
  return out;
}

std::size_t KnowledgeGraph::out_degree(std::string_view entity) const {
  const auto id = entity_id(entity);
  return id ? out_edges(*id).size() : 0;
}

bool KnowledgeGraph::contains(std::string_view head, std::string_view relation,
                              std::string_view tail) const {
  const auto h = entity_id(head);
  const auto r = relation_id(relation);
  const auto t = entity_id(tail);
  if (!h || !r || !t) return false;
  const auto edges = out_edges(*h);
  return std::binary_search(
      edges.begin(), edges.end(), Edge{*r, *t}, [](const Edge& a, const Edge& b) {
        return a.relation != b.relation ? a.relation < b.relation
                                        : a.tail < b.tail;
      });
}

ValidityReport KnowledgeGraph::validate(const ReasoningPath& path) const {
  ValidityReport report;
  report.total_step_count = path.steps.size();
  report.step_errors.resize(path.steps.size());
  const std::string* prev = &path.start;
  for (std::size_t k = 0; k < path.steps.size(); ++k) {
    const auto& step = path.steps[k];
    std::optional<StepError> err;
    if (prev->empty() || step.relation.empty() || step.entity.empty()) {
      err = StepError::format_error;
    } else if (!contains(*prev, step.relation, step.entity)) {
      err = StepError::missing_triple;
    }
    if (err) {
      report.step_errors[k] = err;
      if (!report.first_invalid_index) report.first_invalid_index = k;
    } else {
      ++report.valid_step_count;
    }
    prev = &step.entity;
  }
  return report;
}

KnowledgeGraph KnowledgeGraph::subgraph(const std::vector<std::string>& seeds,
                                        std::size_t hops) const {
  if (hops == 0) throw std::invalid_argument("subgraph: hops must be >= 1");
  std::vector<bool> seen(entities_.size(), false);
  std::vector<EntityId> frontier;
  for (const auto& s : seeds) {
    if (auto id = entity_id(s); id && !seen[*id]) {
      seen[*id] = true;
      frontier.push_back(*id);
    }
  }
  std::vector<Triple> kept;
  for (std::size_t depth = 0; depth < hops && !frontier.empty(); ++depth) {
    std::vector<EntityId> next;
    for (EntityId h : frontier) {
      for (const auto& e : out_edges(h)) {
        kept.push_back(
            {entities_[h], relations_[e.relation], entities_[e.tail]});
        if (!seen[e.tail]) {
          seen[e.tail] = true;
          next.push_back(e.tail);
        }
      }
    }
    frontier = std::move(next);
  }
  return KnowledgeGraph(std::move(kept));
}

std::string KnowledgeGraph::digest() const {
  std::ostringstream os;
  serialize(os);
  return hex_digest(os.str());
}

}  // namespace kgqa
