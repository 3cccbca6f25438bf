#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "kgqa/backends.hpp"
#include "kgqa/dvbs_engine.hpp"
#include "kgqa/path_rag.hpp"
#include "kgqa/wire_backend.hpp"

namespace kgqa {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kConfigSchemaVersion = 1;

/// Flat `key = value` run configuration; `#` starts a comment.
struct RunConfig {
  int schema_version = kConfigSchemaVersion;
  std::string kg;
  std::string index;

  RetrievalConfig retrieval;
  SearchConfig search;

  std::string backend_kind = "mock";  // mock | wire
  EndpointConfig endpoint;

  std::string embedder_kind = "hash";  // hash | remote
  std::size_t embedder_dimension = 64;
  EndpointConfig embedder_endpoint;

  std::string mock_script;
  AdequacyPolicy mock_adequacy = AdequacyPolicy::entailment;

  std::string demonstrations;
  std::size_t num_demonstrations = PromptCatalog::kDefaultDemonstrations;

  DecodeParams decode;
  std::size_t json_retries = 2;
  std::size_t parallelism = 1;

  std::string trace_path;
  std::string report_path;

  /// Throws ConfigError for unknown keys and malformed values.
  void set(std::string_view key, std::string_view value);
  /// Cross-field checks (search and retrieval ranges).
  void validate() const;
};

/// Relative paths are resolved against `base_dir` when it is non-empty.
RunConfig parse_run_config(std::istream& in,
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

std::optional<AdequacyPolicy> parse_adequacy_policy(std::string_view text);

}  // namespace kgqa
