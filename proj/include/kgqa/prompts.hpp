#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kgqa {

enum class PromptKey {
  plan_and_solve,
  deductive_verify,
  adequacy_verify,
  beam_select,
  final_reason,
};

inline constexpr std::array<PromptKey, 5> kAllPromptKeys = {
    PromptKey::plan_and_solve, PromptKey::deductive_verify,
    PromptKey::adequacy_verify, PromptKey::beam_select,
    PromptKey::final_reason};

std::string_view to_string(PromptKey key);
std::optional<PromptKey> parse_prompt_key(std::string_view text);

using Bindings = std::map<std::string, std::string, std::less<>>;

struct PromptTemplate {
  PromptKey key;
  std::string system_text;
  std::string user_text;  // `{name}` placeholders
  bool expects_json = false;
};

/// A worked example, rendered through the same template as the live query.
struct Demonstration {
  Bindings bindings;
  std::string output;
};

struct RenderedPrompt {
  PromptKey key = PromptKey::plan_and_solve;
  std::string system;
  std::string user;
  /// Structured facts about the request for test backends; not sent on the
  /// wire and not part of the digest.
  Bindings context;

  /// Stable hash of key + system + user.
  std::string digest() const;
};

class UnboundPlaceholder : public std::invalid_argument {
 public:
  explicit UnboundPlaceholder(std::string name);
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

/// Placeholder names in order of first appearance.
std::vector<std::string> placeholders(std::string_view text);

/// Single-pass substitution; bound values are never re-expanded.
std::string substitute(std::string_view text, const Bindings& bindings);

class PromptCatalog {
 public:
  static constexpr std::size_t kDefaultDemonstrations = 5;

  /// Built-in templates and demonstrations.
  explicit PromptCatalog(std::size_t num_demonstrations = kDefaultDemonstrations);

  /// Replaces demonstrations with those in a JSON object keyed by prompt key:
  /// {"beam_select": [{"bindings": {...}, "output": "..."}], ...}.
  void load_demonstrations(const std::filesystem::path& path);
  void set_demonstrations(PromptKey key, std::vector<Demonstration> demos);
  void set_num_demonstrations(std::size_t n) { num_demonstrations_ = n; }
  std::size_t num_demonstrations() const { return num_demonstrations_; }

  const PromptTemplate& get(PromptKey key) const;
  const std::vector<Demonstration>& demonstrations(PromptKey key) const;

  /// Throws UnboundPlaceholder. `context` is merged over the bindings into
  /// RenderedPrompt::context.
  RenderedPrompt render(PromptKey key, const Bindings& bindings,
                        const Bindings& context = {}) const;

 private:
  std::array<PromptTemplate, 5> templates_;
  std::array<std::vector<Demonstration>, 5> demos_;
  std::size_t num_demonstrations_;
};

}  // namespace kgqa
