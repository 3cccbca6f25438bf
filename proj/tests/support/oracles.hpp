#pragma once

// Reference implementations used as test oracles. They are written for
// obviousness, not speed, and share no code with the library beyond its
// plain data types.

#include <cstddef>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "kgqa/embed_index.hpp"
#include "kgqa/kg_store.hpp"

namespace oracle {

using kgqa::ReasoningPath;
using kgqa::ReasoningStep;
using kgqa::Triple;

std::filesystem::path data_dir();
std::filesystem::path data_file(const std::string& name);

/// dot / (|a| |b|), 0 when either norm is 0.
double cosine(const std::vector<double>& a, const std::vector<double>& b);

struct Scored {
  std::string id;
  double score;
};

/// Full sort by (score desc, id asc), then the first m.
std::vector<Scored> top_m(const std::map<std::string, std::vector<double>>& table,
                          const std::vector<double>& query, std::size_t m);

/// Outgoing (relation, tail) pairs of `head`, read straight off the triples.
std::vector<ReasoningStep> out_steps(const std::vector<Triple>& triples,
                                     const std::string& head);

/// Every walk of 1..max_depth hops from `start` (cycles allowed).
std::vector<ReasoningPath> enumerate_paths(const std::vector<Triple>& triples,
                                           const std::string& start,
                                           std::size_t max_depth);

bool path_is_valid(const std::vector<Triple>& triples, const ReasoningPath& p);

/// Exhaustive breadth-first search that stops expanding a walk once it
/// reaches an answer. Reports the beam width needed to keep every walk.
struct ExhaustiveSearch {
  bool found = false;          // some walk of <= D hops ends at an answer
  std::size_t needed_width = 0;  // max over depths of (halted so far + live pool)
  std::size_t min_answer_depth = 0;
};
ExhaustiveSearch exhaustive_search(const std::vector<Triple>& triples,
                                   const std::string& start,
                                   const std::set<std::string>& answers,
                                   std::size_t max_depth);

/// Deterministic embedder backed by a fixed text -> vector table; unknown
/// text embeds to zeros.
class TableEmbedder final : public kgqa::Embedder {
 public:
  TableEmbedder(std::map<std::string, std::vector<double>> table, std::size_t dim);
  kgqa::Vector embed(std::string_view text) const override;
  std::string fingerprint() const override { return "table-test"; }
  std::size_t dimension() const override { return dim_; }

 private:
  std::map<std::string, std::vector<double>, std::less<>> table_;
  std::size_t dim_;
};

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t dim);

struct SyntheticKg {
  std::vector<Triple> triples;
  std::vector<std::string> entities;
};

/// Random directed multigraph: `n` entities E0..E{n-1}, `relations` relation
/// names, each entity drawing 0..max_out outgoing edges.
SyntheticKg random_kg(std::mt19937_64& rng, std::size_t n, std::size_t relations,
                      std::size_t max_out);

}  // namespace oracle
