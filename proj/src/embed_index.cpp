#include "kgqa/embed_index.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "kgqa/hash.hpp"
#include "kgqa/text.hpp"

namespace kgqa {

namespace {

std::atomic<std::size_t> g_zero_norm{0};

void note_zero_norm() {
  if (g_zero_norm.fetch_add(1) == 0) {
    spdlog::warn("cosine over a zero-norm vector; scoring it as 0");
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

constexpr char kMagic[4] = {'K', 'G', 'I', 'X'};
constexpr std::uint32_t kFormatVersion = 1;

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) {
    throw std::runtime_error("index file truncated");
  }
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const auto n = read_u64(in);
  if (n > (1ull << 32)) throw std::runtime_error("index file corrupt");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw std::runtime_error("index file truncated");
  }
  return s;
}

}  // namespace

DimensionMismatch::DimensionMismatch(std::size_t expected, std::size_t got)
    : std::invalid_argument("dimension mismatch: expected " +
                            std::to_string(expected) + ", got " +
                            std::to_string(got)) {}

EmbedError::EmbedError(std::string item, const std::string& why)
    : std::runtime_error("failed to embed '" + item + "': " + why),
      item_(std::move(item)) {}

HashEmbedder::HashEmbedder(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw std::invalid_argument("dimension must be > 0");
}

Vector HashEmbedder::embed(std::string_view text) const {
  Vector v(dimension_, 0.0);
  for (const auto& tok : word_tokens(text)) {
    const std::uint64_t h = fnv1a64(tok);
    const double sign = ((h >> 32) & 1u) ? -1.0 : 1.0;
    v[h % dimension_] += sign;
  }
  const double norm = std::sqrt(dot(v, v));
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
  return v;
}

std::string HashEmbedder::fingerprint() const {
  return "hash-fnv1a-signed-d" + std::to_string(dimension_) + "-v1";
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) {
    note_zero_norm();
    return 0.0;
  }
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

std::size_t zero_norm_cosine_count() { return g_zero_norm.load(); }

bool ranks_before(double score_a, std::string_view id_a, double score_b,
                  std::string_view id_b) {
  if (score_a != score_b) return score_a > score_b;
  return id_a < id_b;
}

void EmbeddingIndex::Table::finalize(std::size_t dimension) {
  norms.assign(ids.size(), 0.0);
  lookup.clear();
  lookup.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::span<const double> r(rows.data() + i * dimension, dimension);
    norms[i] = std::sqrt(dot(r, r));
    lookup.emplace(ids[i], i);
  }
}

EmbeddingIndex EmbeddingIndex::build(const KnowledgeGraph& graph,
                                     const Embedder& embedder) {
  if (graph.empty()) {
    throw std::invalid_argument("cannot index an empty knowledge graph");
  }
  EmbeddingIndex idx;
  idx.dimension_ = embedder.dimension();
  idx.fingerprint_ = embedder.fingerprint();
  idx.graph_digest_ = graph.digest();
  auto fill = [&](Table& table, const std::vector<std::string>& vocab) {
    table.ids = vocab;
    table.rows.reserve(vocab.size() * idx.dimension_);
    for (const auto& id : vocab) {
      Vector v;
      try {
        v = embedder.embed(id);
      } catch (const std::exception& e) {
        throw EmbedError(id, e.what());
      }
      if (v.size() != idx.dimension_) {
        throw EmbedError(id, DimensionMismatch(idx.dimension_, v.size()).what());
      }
      for (double x : v) {
        if (!std::isfinite(x)) throw EmbedError(id, "non-finite component");
      }
      table.rows.insert(table.rows.end(), v.begin(), v.end());
    }
    table.finalize(idx.dimension_);
  };
  fill(idx.entities_, graph.entities());
  fill(idx.relations_, graph.relations());
  return idx;
}

std::vector<RankedId> EmbeddingIndex::top_m(const Table& table,
                                            std::span<const double> query,
                                            std::size_t m) const {
  if (m == 0) throw std::invalid_argument("top-m requires m >= 1");
  if (query.size() != dimension_) {
    throw DimensionMismatch(dimension_, query.size());
  }
  const double qn = std::sqrt(dot(query, query));
  const std::size_t n = table.ids.size();
  std::vector<double> scores(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double denom = qn * table.norms[i];
    if (denom == 0.0) {
      note_zero_norm();
      continue;
    }
    std::span<const double> r(table.rows.data() + i * dimension_, dimension_);
    scores[i] = std::clamp(dot(query, r) / denom, -1.0, 1.0);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t keep = std::min(m, n);
  // ids are sorted, so index order is the lexicographic tie-break
  auto cmp = [&](std::size_t a, std::size_t b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(keep),
                    order.end(), cmp);
  std::vector<RankedId> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    out.push_back({table.ids[order[i]], scores[order[i]]});
  }
  return out;
}

std::vector<RankedId> EmbeddingIndex::top_m_entities(
    std::span<const double> query, std::size_t m) const {
  return top_m(entities_, query, m);
}

std::vector<RankedId> EmbeddingIndex::top_m_relations(
    std::span<const double> query, std::size_t m) const {
  return top_m(relations_, query, m);
}

std::optional<std::span<const double>> EmbeddingIndex::row(
    const Table& table, std::string_view id) const {
  auto it = table.lookup.find(std::string(id));
  if (it == table.lookup.end()) return std::nullopt;
  return std::span<const double>(table.rows.data() + it->second * dimension_,
                                 dimension_);
}

std::optional<std::span<const double>> EmbeddingIndex::entity_vector(
    std::string_view id) const {
  return row(entities_, id);
}

std::optional<std::span<const double>> EmbeddingIndex::relation_vector(
    std::string_view id) const {
  return row(relations_, id);
}

bool EmbeddingIndex::consistent_with(const KnowledgeGraph& graph) const {
  return graph_digest_ == graph.digest() && entities_.ids == graph.entities() &&
         relations_.ids == graph.relations();
}

void EmbeddingIndex::save(std::ostream& out) const {
  out.write(kMagic, 4);
  write_u64(out, kFormatVersion);
  write_string(out, fingerprint_);
  write_string(out, graph_digest_);
  write_u64(out, dimension_);
  for (const Table* t : {&entities_, &relations_}) {
    write_u64(out, t->ids.size());
    for (std::size_t i = 0; i < t->ids.size(); ++i) {
      write_string(out, t->ids[i]);
      for (std::size_t j = 0; j < dimension_; ++j) {
        write_u64(out, std::bit_cast<std::uint64_t>(t->rows[i * dimension_ + j]));
      }
    }
  }
}

EmbeddingIndex EmbeddingIndex::load(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not an embedding index file");
  }
  const auto version = read_u64(in);
  if (version != kFormatVersion) {
    throw std::runtime_error("unsupported index format version " +
                             std::to_string(version));
  }
  EmbeddingIndex idx;
  idx.fingerprint_ = read_string(in);
  idx.graph_digest_ = read_string(in);
  idx.dimension_ = read_u64(in);
  for (Table* t : {&idx.entities_, &idx.relations_}) {
    const auto n = read_u64(in);
    t->ids.reserve(n);
    t->rows.reserve(n * idx.dimension_);
    for (std::uint64_t i = 0; i < n; ++i) {
      t->ids.push_back(read_string(in));
      for (std::size_t j = 0; j < idx.dimension_; ++j) {
        t->rows.push_back(std::bit_cast<double>(read_u64(in)));
      }
    }
    if (!std::is_sorted(t->ids.begin(), t->ids.end())) {
      throw std::runtime_error("index file corrupt: ids not sorted");
    }
    t->finalize(idx.dimension_);
  }
  return idx;
}

void EmbeddingIndex::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write index file: " + path);
  save(out);
  if (!out) throw std::runtime_error("failed writing index file: " + path);
}

EmbeddingIndex EmbeddingIndex::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open index file: " + path);
  return load(in);
}

bool EmbeddingIndex::operator==(const EmbeddingIndex& other) const {
  auto same_bits = [](const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
  };
  return dimension_ == other.dimension_ && fingerprint_ == other.fingerprint_ &&
         graph_digest_ == other.graph_digest_ &&
         entities_.ids == other.entities_.ids &&
         relations_.ids == other.relations_.ids &&
         same_bits(entities_.rows, other.entities_.rows) &&
         same_bits(relations_.rows, other.relations_.rows);
}

}  // namespace kgqa
