#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kgqa {

struct Triple {
  std::string head;
  std::string relation;
  std::string tail;

  auto operator<=>(const Triple&) const = default;
};

/// One hop of a reasoning path: the relation followed and the entity reached.
struct ReasoningStep {
  std::string relation;
  std::string entity;

  auto operator<=>(const ReasoningStep&) const = default;
};

/// A start entity plus an ordered (possibly empty) sequence of steps.
struct ReasoningPath {
  std::string start;
  std::vector<ReasoningStep> steps;

  std::size_t depth() const { return steps.size(); }
  /// Last entity on the path (the start entity for an empty path).
  const std::string& terminal() const {
    return steps.empty() ? start : steps.back().entity;
  }
  ReasoningPath extended(ReasoningStep step) const;

  auto operator<=>(const ReasoningPath&) const = default;
};

/// Renders "E0 -> r1 -> E1 -> r2 -> E2".
std::string to_arrow_string(const ReasoningPath& path);

/// Parses the arrow format. Accepts "->" or the UTF-8 arrow as separator.
/// Returns nullopt for empty segments or an even number of segments.
std::optional<ReasoningPath> parse_arrow_path(std::string_view text);

enum class StepError { missing_triple, format_error };

std::string_view to_string(StepError e);

struct ValidityReport {
  std::size_t valid_step_count = 0;
  std::size_t total_step_count = 0;
  std::optional<std::size_t> first_invalid_index;
  std::vector<std::optional<StepError>> step_errors;  // one slot per step

  std::size_t count(StepError kind) const;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Trims surrounding ASCII whitespace; case and punctuation are kept.
std::string normalize_identifier(std::string_view raw);

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

/// Immutable directed labeled multigraph with CSR adjacency.
///
/// Entity and relation vocabularies are stored sorted, so ids are
/// lexicographic ranks and sorting by id agrees with sorting by name.
class KnowledgeGraph {
 public:
  struct Edge {
    RelationId relation;
    EntityId tail;
  };

  KnowledgeGraph() = default;
  /// Builds from triples; normalizes identifiers and drops duplicates.
  /// `extra_entities` adds isolated vocabulary entries.
  explicit KnowledgeGraph(std::vector<Triple> triples,
                          std::vector<std::string> extra_entities = {});

  static KnowledgeGraph load(std::istream& in);
  static KnowledgeGraph load_file(const std::filesystem::path& path);
  void serialize(std::ostream& out) const;

  const std::vector<std::string>& entities() const { return entities_; }
  const std::vector<std::string>& relations() const { return relations_; }
  /// All triples, sorted.
  std::vector<Triple> triples() const;
  std::size_t triple_count() const { return edges_.size(); }
  bool empty() const { return entities_.empty(); }

  std::optional<EntityId> entity_id(std::string_view name) const;
  std::optional<RelationId> relation_id(std::string_view name) const;
  const std::string& entity_name(EntityId id) const { return entities_[id]; }
  const std::string& relation_name(RelationId id) const {
    return relations_[id];
  }

  /// Outgoing edges sorted by (relation, tail).
  std::span<const Edge> out_edges(EntityId head) const;
  /// The 1-hop neighborhood as (relation, entity) pairs; empty for unknown.
  std::vector<ReasoningStep> neighbors(std::string_view entity) const;
  std::size_t out_degree(std::string_view entity) const;

  bool contains(std::string_view head, std::string_view relation,
                std::string_view tail) const;
  bool has_entity(std::string_view name) const {
    return entity_id(name).has_value();
  }

  ValidityReport validate(const ReasoningPath& path) const;

  /// Triples reachable from `seeds` within `hops` forward traversals.
  KnowledgeGraph subgraph(const std::vector<std::string>& seeds,
                          std::size_t hops) const;

  /// Stable content hash of the triple set (hex).
  std::string digest() const;

 private:
  struct NameHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };
  using NameMap =
      std::unordered_map<std::string, std::uint32_t, NameHash, std::equal_to<>>;

  std::vector<std::string> entities_;
  std::vector<std::string> relations_;
  NameMap entity_index_;
  NameMap relation_index_;
  std::vector<std::size_t> offsets_;  // entities_.size() + 1
  std::vector<Edge> edges_;
};

}  // namespace kgqa
