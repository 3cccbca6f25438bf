#include "kgqa/json_repair.hpp"

#include "kgqa/text.hpp"

namespace kgqa {

std::string strip_code_fences(std::string_view text) {
  auto body = trim(text);
  if (body.substr(0, 3) != "```") return std::string(body);
  const auto first_nl = body.find('\n');
  if (first_nl == std::string_view::npos) return std::string(body);
  body.remove_prefix(first_nl + 1);
  const auto close = body.rfind("```");
  if (close != std::string_view::npos) body = body.substr(0, close);
  return std::string(trim(body));
}

std::optional<std::string_view> bracket_match(std::string_view text,
                                              char open) {
  const char close = open == '{' ? '}' : ']';
  for (std::size_t start = text.find(open); start != std::string_view::npos;
       start = text.find(open, start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{' || c == '[') {
        ++depth;
      } else if (c == '}' || c == ']') {
        if (--depth == 0) {
          if (c != close) break;
          return text.substr(start, i - start + 1);
        }
      }
    }
  }
  return std::nullopt;
}

namespace {

std::optional<Json> try_parse(std::string_view text) {
  Json j = Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

bool fits(const Json& j, JsonHint hint) {
  switch (hint) {
    case JsonHint::object:
      return j.is_object();
    case JsonHint::array:
      return j.is_array();
    case JsonHint::yes_no:
      return j.is_object() && j.contains("answer") && j["answer"].is_string();
  }
  return false;
}

std::optional<std::string> yes_no_token(std::string_view text) {
  const auto tokens = word_tokens(text);
  if (tokens.empty()) return std::nullopt;
  if (tokens.front() == "yes" || tokens.front() == "no") return tokens.front();
  return std::nullopt;
}

}  // namespace

std::optional<Json> extract_json(std::string_view text, JsonHint hint) {
  const std::string body = strip_code_fences(text);
  if (auto j = try_parse(body)) {
    if (fits(*j, hint)) return j;
    if (hint == JsonHint::yes_no && j->is_string()) {
      if (auto tok = yes_no_token(j->get<std::string>())) {
        return Json{{"answer", *tok}};
      }
    }
  }
  if (hint != JsonHint::yes_no) {
    const char open = hint == JsonHint::object ? '{' : '[';
    if (auto span = bracket_match(body, open)) {
      if (auto j = try_parse(*span); j && fits(*j, hint)) return j;
    }
    return std::nullopt;
  }
  if (auto span = bracket_match(body, '{')) {
    if (auto j = try_parse(*span); j && fits(*j, hint)) return j;
  }
  if (auto tok = yes_no_token(body)) return Json{{"answer", *tok}};
  return std::nullopt;
}

JsonFailure::JsonFailure(std::string last_raw, std::size_t attempts)
    : std::runtime_error("no usable JSON after " + std::to_string(attempts) +
                         " attempt(s)"),
      last_raw_(std::move(last_raw)),
      attempts_(attempts) {}

}  // namespace kgqa
