#include "kgqa/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>

#include "kgqa/text.hpp"

namespace kgqa {

namespace {

std::string quoted(std::string_view s) { return "\"" + std::string(s) + "\""; }

std::size_t parse_size(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got " +
                      quoted(v));
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  try {
    std::size_t used = 0;
    const double d = std::stod(s, &used);
    if (used == s.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError(std::string(key) + ": expected a number, got " + quoted(v));
}

bool parse_bool(std::string_view key, std::string_view v) {
  const auto s = to_lower_ascii(v);
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  throw ConfigError(std::string(key) + ": expected a boolean, got " + quoted(v));
}

std::string unquote(std::string_view v) {
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') ||
                        (v.front() == '\'' && v.back() == '\''))) {
    return std::string(v.substr(1, v.size() - 2));
  }
  return std::string(v);
}

/// Strips a trailing `#` comment outside quotes.
std::string_view strip_comment(std::string_view line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"schema_version",
       [](RunConfig& c, auto k, auto v) {
         c.schema_version = static_cast<int>(parse_size(k, v));
         if (c.schema_version != kConfigSchemaVersion) {
           throw ConfigError("unsupported schema_version " + std::string(v) +
                             " (expected " + std::to_string(kConfigSchemaVersion) + ")");
         }
       }},
      {"kg", [](RunConfig& c, auto, auto v) { c.kg = v; }},
      {"index", [](RunConfig& c, auto, auto v) { c.index = v; }},
      {"retriever.mode",
       [](RunConfig& c, auto k, auto v) {
         auto m = parse_retriever_mode(v);
         if (!m) throw ConfigError(std::string(k) + ": unknown mode " + quoted(v));
         c.retrieval.mode = *m;
       }},
      {"retriever.top_m",
       [](RunConfig& c, auto k, auto v) { c.retrieval.m = parse_size(k, v); }},
      {"retriever.alpha",
       [](RunConfig& c, auto k, auto v) { c.retrieval.alpha = parse_double(k, v); }},
      {"retriever.neighbor_cap",
       [](RunConfig& c, auto k, auto v) { c.retrieval.neighbor_cap = parse_size(k, v); }},
      {"search.width",
       [](RunConfig& c, auto k, auto v) { c.search.beam_width = parse_size(k, v); }},
      {"search.depth",
       [](RunConfig& c, auto k, auto v) { c.search.max_depth = parse_size(k, v); }},
      {"search.use_planning",
       [](RunConfig& c, auto k, auto v) { c.search.use_planning = parse_bool(k, v); }},
      {"search.use_deductive_verifier",
       [](RunConfig& c, auto k, auto v) {
         c.search.use_deductive_verifier = parse_bool(k, v);
       }},
      {"search.use_beam_search",
       [](RunConfig& c, auto k, auto v) { c.search.use_beam_search = parse_bool(k, v); }},
      {"search.use_last_step_reasoning",
       [](RunConfig& c, auto k, auto v) {
         c.search.use_last_step_reasoning = parse_bool(k, v);
       }},
      {"search.mode",
       [](RunConfig& c, auto k, auto v) {
         if (v == "deductive") {
           c.search.adequacy_mode = false;
         } else if (v == "adequacy") {
           c.search.adequacy_mode = true;
         } else {
           throw ConfigError(std::string(k) + ": expected deductive|adequacy, got " +
                             quoted(v));
         }
       }},
      {"backend.kind",
       [](RunConfig& c, auto k, auto v) {
         if (v != "mock" && v != "wire") {
           throw ConfigError(std::string(k) + ": expected mock|wire, got " + quoted(v));
         }
         c.backend_kind = v;
       }},
      {"backend.endpoint", [](RunConfig& c, auto, auto v) { c.endpoint.base_url = v; }},
      {"backend.path", [](RunConfig& c, auto, auto v) { c.endpoint.path = v; }},
      {"backend.model", [](RunConfig& c, auto, auto v) { c.endpoint.model = v; }},
      {"backend.api_key_env",
       [](RunConfig& c, auto, auto v) { c.endpoint.api_key_env = v; }},
      {"backend.timeout",
       [](RunConfig& c, auto k, auto v) { c.endpoint.timeout_seconds = parse_double(k, v); }},
      {"backend.max_concurrency",
       [](RunConfig& c, auto k, auto v) { c.endpoint.max_concurrency = parse_size(k, v); }},
      {"backend.max_attempts",
       [](RunConfig& c, auto k, auto v) { c.endpoint.retry.max_attempts = parse_size(k, v); }},
      {"embedder.kind",
       [](RunConfig& c, auto k, auto v) {
         if (v != "hash" && v != "remote") {
           throw ConfigError(std::string(k) + ": expected hash|remote, got " + quoted(v));
         }
         c.embedder_kind = v;
       }},
      {"embedder.dimension",
       [](RunConfig& c, auto k, auto v) { c.embedder_dimension = parse_size(k, v); }},
      {"embedder.model", [](RunConfig& c, auto, auto v) { c.embedder_endpoint.model = v; }},
      {"embedder.endpoint",
       [](RunConfig& c, auto, auto v) { c.embedder_endpoint.base_url = v; }},
      {"embedder.api_key_env",
       [](RunConfig& c, auto, auto v) { c.embedder_endpoint.api_key_env = v; }},
      {"mock.script", [](RunConfig& c, auto, auto v) { c.mock_script = v; }},
      {"mock.adequacy",
       [](RunConfig& c, auto k, auto v) {
         auto p = parse_adequacy_policy(v);
         if (!p) throw ConfigError(std::string(k) + ": unknown policy " + quoted(v));
         c.mock_adequacy = *p;
       }},
      {"prompts.demonstrations", [](RunConfig& c, auto, auto v) { c.demonstrations = v; }},
      {"prompts.num_demonstrations",
       [](RunConfig& c, auto k, auto v) { c.num_demonstrations = parse_size(k, v); }},
      {"decode.temperature",
       [](RunConfig& c, auto k, auto v) { c.decode.temperature = parse_double(k, v); }},
      {"decode.top_p",
       [](RunConfig& c, auto k, auto v) { c.decode.top_p = parse_double(k, v); }},
      {"json.retries",
       [](RunConfig& c, auto k, auto v) { c.json_retries = parse_size(k, v); }},
      {"eval.parallelism",
       [](RunConfig& c, auto k, auto v) { c.parallelism = parse_size(k, v); }},
      {"output.trace", [](RunConfig& c, auto, auto v) { c.trace_path = v; }},
      {"output.report", [](RunConfig& c, auto, auto v) { c.report_path = v; }},
  };
  return table;
}

bool is_path_key(std::string_view key) {
  return key == "kg" || key == "index" || key == "mock.script" ||
         key == "prompts.demonstrations" || key == "output.trace" ||
         key == "output.report";
}

}  // namespace

std::optional<AdequacyPolicy> parse_adequacy_policy(std::string_view text) {
  if (text == "entailment") return AdequacyPolicy::entailment;
  if (text == "always" || text == "always_sufficient") {
    return AdequacyPolicy::always_sufficient;
  }
  if (text == "never" || text == "never_sufficient") {
    return AdequacyPolicy::never_sufficient;
  }
  return std::nullopt;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key " + quoted(key));
  it->second(*this, key, value);
}

void RunConfig::validate() const {
  try {
    search.validate();
    retrieval.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (embedder_dimension == 0) throw ConfigError("embedder.dimension must be positive");
  if (parallelism == 0) throw ConfigError("eval.parallelism must be positive");
  if (decode.temperature < 0.0) throw ConfigError("decode.temperature must be >= 0");
  if (decode.top_p <= 0.0 || decode.top_p > 1.0) {
    throw ConfigError("decode.top_p must be in (0, 1]");
  }
}

RunConfig parse_run_config(std::istream& in, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    std::string value = unquote(trim(line.substr(eq + 1)));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    }
    if (!base_dir.empty() && is_path_key(key) && !value.empty() &&
        std::filesystem::path(value).is_relative()) {
      value = (base_dir / value).lexically_normal().string();
    }
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  return parse_run_config(in, path.parent_path());
}

}  // namespace kgqa
