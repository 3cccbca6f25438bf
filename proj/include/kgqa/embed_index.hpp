#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kgqa/kg_store.hpp"

namespace kgqa {

using Vector = std::vector<double>;

class DimensionMismatch : public std::invalid_argument {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got);
};

class EmbedError : public std::runtime_error {
 public:
  EmbedError(std::string item, const std::string& why);
  const std::string& item() const { return item_; }

 private:
  std::string item_;
};

/// Text -> dense vector. Implementations must be deterministic per
/// fingerprint and safe to call concurrently.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Vector embed(std::string_view text) const = 0;
  virtual std::string fingerprint() const = 0;
  virtual std::size_t dimension() const = 0;
};

/// Signed feature hashing of lowercase word tokens, L2-normalized.
/// Text without tokens embeds to the zero vector.
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dimension = 64);
  Vector embed(std::string_view text) const override;
  std::string fingerprint() const override;
  std::size_t dimension() const override { return dimension_; }

 private:
  std::size_t dimension_;
};

/// Cosine similarity. Throws DimensionMismatch; a zero-norm operand scores 0.
double cosine(std::span<const double> a, std::span<const double> b);

/// Number of zero-norm cosine evaluations seen by this process.
std::size_t zero_norm_cosine_count();

struct RankedId {
  std::string id;
  double score = 0.0;

  bool operator==(const RankedId&) const = default;
};

/// Sort order used by every ranking: score descending, then id ascending.
bool ranks_before(double score_a, std::string_view id_a, double score_b,
                  std::string_view id_b);

/// Exact cosine nearest-neighbor store over a graph's vocabulary.
class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;

  static EmbeddingIndex build(const KnowledgeGraph& graph,
                              const Embedder& embedder);

  std::vector<RankedId> top_m_entities(std::span<const double> query,
                                       std::size_t m) const;
  std::vector<RankedId> top_m_relations(std::span<const double> query,
                                        std::size_t m) const;

  std::optional<std::span<const double>> entity_vector(
      std::string_view id) const;
  std::optional<std::span<const double>> relation_vector(
      std::string_view id) const;

  std::size_t dimension() const { return dimension_; }
  const std::string& fingerprint() const { return fingerprint_; }
  const std::string& graph_digest() const { return graph_digest_; }
  std::size_t entity_count() const { return entities_.ids.size(); }
  std::size_t relation_count() const { return relations_.ids.size(); }
  const std::vector<std::string>& entity_ids() const { return entities_.ids; }
  const std::vector<std::string>& relation_ids() const {
    return relations_.ids;
  }

  /// True when vocabularies and the triple digest match `graph`.
  bool consistent_with(const KnowledgeGraph& graph) const;

  void save(std::ostream& out) const;
  static EmbeddingIndex load(std::istream& in);
  void save_file(const std::string& path) const;
  static EmbeddingIndex load_file(const std::string& path);

  bool operator==(const EmbeddingIndex& other) const;

 private:
  struct Table {
    std::vector<std::string> ids;  // sorted
    std::vector<double> rows;      // ids.size() x dimension, row-major
    std::vector<double> norms;
    std::unordered_map<std::string, std::size_t> lookup;

    void finalize(std::size_t dimension);
  };

  std::vector<RankedId> top_m(const Table& table, std::span<const double> query,
                              std::size_t m) const;
  std::optional<std::span<const double>> row(const Table& table,
                                             std::string_view id) const;

  std::size_t dimension_ = 0;
  std::string fingerprint_;
  std::string graph_digest_;
  Table entities_;
  Table relations_;
};

}  // namespace kgqa
