#pragma once

#include <json.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kgqa {

using Json = nlohmann::json;

enum class JsonHint { object, array, yes_no };

/// Removes a surrounding ``` / ```json fence if present.
std::string strip_code_fences(std::string_view text);

/// First balanced `open`...matching-close span, string-literal aware.
std::optional<std::string_view> bracket_match(std::string_view text, char open);

/// Repair ladder: fences, whole-text parse, bracket match, scalar coercion.
/// A yes/no hint coerces a leading yes/no token to {"answer": "yes"|"no"}.
std::optional<Json> extract_json(std::string_view text, JsonHint hint);

class JsonFailure : public std::runtime_error {
 public:
  JsonFailure(std::string last_raw, std::size_t attempts);
  const std::string& last_raw() const { return last_raw_; }
  std::size_t attempts() const { return attempts_; }

 private:
  std::string last_raw_;
  std::size_t attempts_;
};

}  // namespace kgqa
