#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace kgqa {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
std::string to_lower_ascii(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Lowercased alphanumeric runs; every other byte (including '.', '_')
/// separates tokens. Non-ASCII bytes are kept inside tokens.
std::vector<std::string> word_tokens(std::string_view text);

/// Question words with common English stopwords removed, in order.
std::vector<std::string> content_words(std::string_view text);

/// Answer-matching form: lowercase, underscores as spaces, trimmed, inner
/// whitespace runs collapsed to one space. Idempotent.
std::string normalize_answer(std::string_view text);

}  // namespace kgqa
