#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kgqa/kg_store.hpp"

namespace kgqa {

/// The single answer-matching normalization (see normalize_answer).
std::string normalize(std::string_view text);

/// 1 iff the first prediction matches a gold answer. Throws on empty gold.
int hits_at_1(const std::vector<std::string>& predicted,
              const std::vector<std::string>& gold);

/// Set F1 over normalized answers; 0 for an empty prediction.
double f1_score(const std::vector<std::string>& predicted,
                const std::vector<std::string>& gold);

/// 1 iff the normalized sets intersect.
int accuracy(const std::vector<std::string>& predicted,
             const std::vector<std::string>& gold);

struct StepTally {
  std::size_t valid = 0;
  std::size_t total = 0;

  void add(const ValidityReport& r) {
    valid += r.valid_step_count;
    total += r.total_step_count;
  }
  /// nullopt ("n/a") when no step was emitted.
  std::optional<double> ratio() const {
    if (total == 0) return std::nullopt;
    return static_cast<double>(valid) / static_cast<double>(total);
  }
};

std::optional<double> validity_ratio(const KnowledgeGraph& graph,
                                     const std::vector<ReasoningPath>& paths);

/// Mean path length per question, then the mean over questions that have
/// paths. nullopt when none do.
std::optional<double> avg_depth(
    const std::vector<std::vector<std::size_t>>& depths_per_question);

struct QARecord {
  std::string id;
  std::string question;
  std::vector<std::string> answers;
  std::vector<std::string> topic_entities;
  std::vector<ReasoningPath> ground_truth_paths;
};

class DatasetError : public std::runtime_error {
 public:
  DatasetError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

std::vector<QARecord> load_dataset(std::istream& in);
std::vector<QARecord> load_dataset_file(const std::string& path);

}  // namespace kgqa
