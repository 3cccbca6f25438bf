#include "kgqa/prompts.hpp"

#include <json.hpp>

#include <fstream>

#include "kgqa/hash.hpp"

namespace kgqa {

namespace {

constexpr std::string_view kPlanSystem =
    "You are a helpful assistant designed to output JSON that aids in "
    "navigating a knowledge graph to answer a provided question. The response "
    "should include the following keys: \n\n"
    "(1) 'keywords': an exhaustive list of keywords or relation names that you "
    "would use to find the reasoning path from the knowledge graph to answer "
    "the question. Aim for maximum coverage to ensure no potential reasoning "
    "paths will be overlooked; \n\n"
    "(2) 'planning_steps': a list of detailed steps required to trace the "
    "reasoning path with. Each step should be a string instead of a dict. \n\n"
    "(3) 'declarative_statement': a string of declarative statement that can "
    "be transformed from the given query, For example, convert the question "
    "'What do Jamaican people speak?' into the statement 'Jamaican people "
    "speak *placeholder*.' leave the *placeholder* unchanged; Ensure the JSON "
    "object clearly separates these components.";
constexpr std::string_view kPlanUser = "Q: {Query}\n\nA:";

constexpr std::string_view kDeductiveSystem =
    "You are asked to verify whether the reasoning step follows deductively "
    "from the question and the current reasoning path in a deductive manner. "
    "If yes return yes, if no, return no\".\n\n"
    "Give both verdicts on one line as 'step: yes|no; conclusion: yes|no', "
    "where step judges the premise taken from the next step candidates and "
    "conclusion judges whether the conclusion can be deduced.";
constexpr std::string_view kDeductiveUser =
    "Question: {Query}\n\n"
    "Whether the conclusion '{declarative_statement}' can be deduced from "
    "'{parsed_reasoning_path}', if yes, return yes, if no, return no.\n\nA:";

constexpr std::string_view kAdequacySystem =
    "You are asked to verify whether it's sufficient for you to answer the "
    "question with the following reasoning path. For each reasoning path, "
    "respond with 'Yes' if it is sufficient, and 'No' if it is not. Your "
    "response should be either 'Yes' or 'No'.";
constexpr std::string_view kAdequacyUser =
    "Whether the reasoning path '{reasoning_path}' be sufficient to answer the "
    "query '{Query}', if yes, return yes, if no, return no.\n\nA:";

constexpr std::string_view kBeamSystem =
    "Given a question and the starting entity from a knowledge graph, you are "
    "asked to retrieve reasoning paths from the given reasoning paths that are "
    "useful for answering the question.";
constexpr std::string_view kBeamUser =
    "Considering the planning context {plan_context} and the given question "
    "{Query}, you are asked to choose the best {beam_width} reasoning paths "
    "from the following candidates with the highest probability to lead to a "
    "useful reasoning path for answering the question. {reasoning_paths}. Only "
    "return the index of the {beam_width} selected reasoning paths in a "
    "list.\n\nA:";

constexpr std::string_view kFinalSystem =
    "Given a question and the associated retrieved reasoning path from a "
    "knowledge graph, you are asked to answer the following question based on "
    "the reasoning path and your knowledge. Only return the answer to the "
    "question.";
constexpr std::string_view kFinalUser =
    "Question: {Query}\n\nReasoning path: {reasoning_path}\n\n"
    "Only return the answer to the question.\n\nA:";

std::size_t slot(PromptKey key) { return static_cast<std::size_t>(key); }

std::vector<Demonstration> default_demos(PromptKey key) {
  switch (key) {
    case PromptKey::plan_and_solve:
      return {
          {{{"Query", "What is the capital of the country where the Nile "
                      "river ends?"}},
           R"({"keywords": ["Nile river", "mouth", "country", "capital"], )"
           R"("planning_steps": ["Find the country where the Nile river )"
           R"(ends.", "Find the capital of that country."], )"
           R"("declarative_statement": "The capital of the country where )"
           R"(the Nile river ends is *placeholder*."})"},
          {{{"Query", "Who wrote the novel that the film Blade Runner is "
                      "based on?"}},
           R"({"keywords": ["Blade Runner", "based on", "novel", "author"], )"
           R"("planning_steps": ["Find the work the film Blade Runner is )"
           R"(based on.", "Find the author of that work."], )"
           R"("declarative_statement": "The novel that the film Blade )"
           R"(Runner is based on was written by *placeholder*."})"},
          {{{"Query", "What currency is used in Japan?"}},
           R"({"keywords": ["Japan", "currency", "currency used"], )"
           R"("planning_steps": ["Find the currency used in Japan."], )"
           R"("declarative_statement": "Japan uses *placeholder* as its )"
           R"(currency."})"},
          {{{"Query", "Which team does the brother of Eli Manning play for?"}},
           R"({"keywords": ["Eli Manning", "sibling", "brother", "team", )"
           R"("roster"], "planning_steps": ["Find the brother of Eli )"
           R"(Manning.", "Find the team he plays for."], )"
           R"("declarative_statement": "The brother of Eli Manning plays )"
           R"(for *placeholder*."})"},
          {{{"Query", "What language is spoken in the country bordering "
                      "Portugal?"}},
           R"({"keywords": ["Portugal", "borders", "country", "language", )"
           R"("official language"], "planning_steps": ["Find the country )"
           R"(bordering Portugal.", "Find the language spoken there."], )"
           R"("declarative_statement": "The language spoken in the country )"
           R"(bordering Portugal is *placeholder*."})"},
      };
    case PromptKey::deductive_verify:
      return {
          {{{"Query", "Which country is Paris the capital of?"},
            {"declarative_statement", "Paris is the capital of France."},
            {"parsed_reasoning_path",
             "Paris -> location.capital_of -> France (from the next step "
             "candidates)"}},
           "step: yes; conclusion: yes"},
          {{{"Query", "Who is the mother of the author of Frankenstein?"},
            {"declarative_statement",
             "The mother of the author of Frankenstein is Mary_Shelley."},
            {"parsed_reasoning_path",
             "Frankenstein -> book.written_work.author -> Mary_Shelley (from "
             "the next step candidates)"}},
           "step: yes; conclusion: no"},
          {{{"Query", "What language is spoken in Brazil?"},
            {"declarative_statement", "People in Brazil speak South_America."},
            {"parsed_reasoning_path",
             "Brazil -> location.location.containedby -> South_America (from "
             "the next step candidates)"}},
           "step: no; conclusion: no"},
          {{{"Query", "Who is the mother of the author of Frankenstein?"},
            {"declarative_statement",
             "The mother of the author of Frankenstein is "
             "Mary_Wollstonecraft."},
            {"parsed_reasoning_path",
             "Frankenstein -> book.written_work.author -> Mary_Shelley (from "
             "the current reasoning path); Mary_Shelley -> "
             "people.person.parents -> Mary_Wollstonecraft (from the next step "
             "candidates)"}},
           "step: yes; conclusion: yes"},
          {{{"Query", "Where was the composer of The Magic Flute born?"},
            {"declarative_statement",
             "The composer of The Magic Flute was born in "
             "Wolfgang_Amadeus_Mozart."},
            {"parsed_reasoning_path",
             "The_Magic_Flute -> music.composition.composer -> "
             "Wolfgang_Amadeus_Mozart (from the next step candidates)"}},
           "step: yes; conclusion: no"},
      };
    case PromptKey::adequacy_verify:
      return {
          {{{"Query", "Which country is Paris the capital of?"},
            {"reasoning_path", "Paris -> location.capital_of -> France"}},
           "Yes"},
          {{{"Query", "Who is the mother of the author of Frankenstein?"},
            {"reasoning_path",
             "Frankenstein -> book.written_work.author -> Mary_Shelley"}},
           "No"},
          {{{"Query", "What currency is used in Japan?"},
            {"reasoning_path",
             "Japan -> location.country.currency_used -> Japanese_yen"}},
           "Yes"},
          {{{"Query", "Where was the composer of The Magic Flute born?"},
            {"reasoning_path",
             "The_Magic_Flute -> music.composition.composer -> "
             "Wolfgang_Amadeus_Mozart"}},
           "No"},
          {{{"Query", "Where was the composer of The Magic Flute born?"},
            {"reasoning_path",
             "The_Magic_Flute -> music.composition.composer -> "
             "Wolfgang_Amadeus_Mozart -> people.person.place_of_birth -> "
             "Salzburg"}},
           "Yes"},
      };
    case PromptKey::beam_select:
      return {
          {{{"plan_context", "Find the capital of France."},
            {"Query", "What is the capital of France?"},
            {"beam_width", "1"},
            {"reasoning_paths",
             "[0] France -> location.country.capital -> Paris; [1] France -> "
             "location.location.containedby -> Europe"}},
           "[0]"},
          {{{"plan_context", "Find the author of Frankenstein. Find the "
                             "author's parents."},
            {"Query", "Who is the mother of the author of Frankenstein?"},
            {"beam_width", "2"},
            {"reasoning_paths",
             "[0] Frankenstein -> book.book.genre -> Gothic_fiction; [1] "
             "Frankenstein -> book.written_work.author -> Mary_Shelley; [2] "
             "Frankenstein -> book.book.characters -> Victor_Frankenstein"}},
           "[1, 2]"},
          {{{"plan_context", "Find the currency used in Japan."},
            {"Query", "What currency is used in Japan?"},
            {"beam_width", "1"},
            {"reasoning_paths",
             "[0] Japan -> location.location.time_zones -> JST; [1] Japan -> "
             "location.country.currency_used -> Japanese_yen"}},
           "[1]"},
          {{{"plan_context", "Find the composer. Find the composer's "
                             "birthplace."},
            {"Query", "Where was the composer of The Magic Flute born?"},
            {"beam_width", "2"},
            {"reasoning_paths",
             "[0] The_Magic_Flute -> music.composition.composer -> "
             "Wolfgang_Amadeus_Mozart; [1] The_Magic_Flute -> "
             "opera.opera.language -> German"}},
           "[0, 1]"},
          {{{"plan_context", "Find the country bordering Portugal. Find its "
                             "language."},
            {"Query", "What language is spoken in the country bordering "
                      "Portugal?"},
            {"beam_width", "1"},
            {"reasoning_paths",
             "[0] Portugal -> location.location.adjoin_s -> Spain; [1] "
             "Portugal -> location.country.capital -> Lisbon"}},
           "[0]"},
      };
    case PromptKey::final_reason:
      return {
          {{{"Query", "Which country is Paris the capital of?"},
            {"reasoning_path", "Paris -> location.capital_of -> France"}},
           "France"},
          {{{"Query", "What currency is used in Japan?"},
            {"reasoning_path",
             "Japan -> location.country.currency_used -> Japanese_yen"}},
           "Japanese_yen"},
          {{{"Query", "Who is the mother of the author of Frankenstein?"},
            {"reasoning_path",
             "Frankenstein -> book.written_work.author -> Mary_Shelley -> "
             "people.person.parents -> Mary_Wollstonecraft"}},
           "Mary_Wollstonecraft"},
          {{{"Query", "Where was the composer of The Magic Flute born?"},
            {"reasoning_path",
             "The_Magic_Flute -> music.composition.composer -> "
             "Wolfgang_Amadeus_Mozart -> people.person.place_of_birth -> "
             "Salzburg"}},
           "Salzburg"},
          {{{"Query", "Which languages are official in Belgium?"},
            {"reasoning_path",
             "Belgium -> location.country.official_language -> Dutch\n"
             "Belgium -> location.country.official_language -> French\n"
             "Belgium -> location.country.official_language -> German"}},
           "Dutch\nFrench\nGerman"},
      };
  }
  return {};
}

}  // namespace

std::string_view to_string(PromptKey key) {
  switch (key) {
    case PromptKey::plan_and_solve:
      return "plan_and_solve";
    case PromptKey::deductive_verify:
      return "deductive_verify";
    case PromptKey::adequacy_verify:
      return "adequacy_verify";
    case PromptKey::beam_select:
      return "beam_select";
    case PromptKey::final_reason:
      return "final_reason";
  }
  return "unknown";
}

std::optional<PromptKey> parse_prompt_key(std::string_view text) {
  for (auto k : kAllPromptKeys) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

std::string RenderedPrompt::digest() const {
  std::string material(to_string(key));
  material += '\x1f';
  material += system;
  material += '\x1f';
  material += user;
  return hex_digest(material);
}

UnboundPlaceholder::UnboundPlaceholder(std::string name)
    : std::invalid_argument("unbound prompt placeholder {" + name + "}"),
      name_(std::move(name)) {}

namespace {

bool is_name_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

// Calls on_text / on_name over the template's pieces.
template <typename Text, typename Name>
void scan_template(std::string_view text, Text on_text, Name on_name) {
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      std::size_t j = i + 1;
      while (j < text.size() && is_name_char(text[j])) ++j;
      if (j < text.size() && text[j] == '}' && j > i + 1) {
        on_name(text.substr(i + 1, j - i - 1));
        i = j + 1;
        continue;
      }
    }
    on_text(text[i]);
    ++i;
  }
}

}  // namespace

std::vector<std::string> placeholders(std::string_view text) {
  std::vector<std::string> out;
  scan_template(
      text, [](char) {},
      [&](std::string_view name) {
        for (const auto& n : out) {
          if (n == name) return;
        }
        out.emplace_back(name);
      });
  return out;
}

std::string substitute(std::string_view text, const Bindings& bindings) {
  std::string out;
  out.reserve(text.size());
  scan_template(
      text, [&](char c) { out.push_back(c); },
      [&](std::string_view name) {
        auto it = bindings.find(name);
        if (it == bindings.end()) throw UnboundPlaceholder(std::string(name));
        out += it->second;
      });
  return out;
}

PromptCatalog::PromptCatalog(std::size_t num_demonstrations)
    : num_demonstrations_(num_demonstrations) {
  templates_[slot(PromptKey::plan_and_solve)] = {
      PromptKey::plan_and_solve, std::string(kPlanSystem),
      std::string(kPlanUser), true};
  templates_[slot(PromptKey::deductive_verify)] = {
      PromptKey::deductive_verify, std::string(kDeductiveSystem),
      std::string(kDeductiveUser), false};
  templates_[slot(PromptKey::adequacy_verify)] = {
      PromptKey::adequacy_verify, std::string(kAdequacySystem),
      std::string(kAdequacyUser), false};
  templates_[slot(PromptKey::beam_select)] = {
      PromptKey::beam_select, std::string(kBeamSystem), std::string(kBeamUser),
      true};
  templates_[slot(PromptKey::final_reason)] = {
      PromptKey::final_reason, std::string(kFinalSystem),
      std::string(kFinalUser), false};
  for (auto k : kAllPromptKeys) demos_[slot(k)] = default_demos(k);
}

void PromptCatalog::load_demonstrations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open demonstrations file: " +
                             path.string());
  }
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("demonstrations file is not JSON: " +
                             std::string(e.what()));
  }
  if (!doc.is_object()) {
    throw std::runtime_error("demonstrations file must hold a JSON object");
  }
  for (const auto& [name, list] : doc.items()) {
    const auto key = parse_prompt_key(name);
    if (!key) throw std::runtime_error("unknown prompt key: " + name);
    std::vector<Demonstration> demos;
    for (const auto& item : list) {
      Demonstration d;
      for (const auto& [b, v] : item.at("bindings").items()) {
        d.bindings[b] = v.get<std::string>();
      }
      d.output = item.at("output").get<std::string>();
      substitute(get(*key).user_text, d.bindings);  // reject unbound early
      demos.push_back(std::move(d));
    }
    set_demonstrations(*key, std::move(demos));
  }
}

void PromptCatalog::set_demonstrations(PromptKey key,
                                       std::vector<Demonstration> demos) {
  demos_[slot(key)] = std::move(demos);
}

const PromptTemplate& PromptCatalog::get(PromptKey key) const {
  return templates_[slot(key)];
}

const std::vector<Demonstration>& PromptCatalog::demonstrations(
    PromptKey key) const {
  return demos_[slot(key)];
}

RenderedPrompt PromptCatalog::render(PromptKey key, const Bindings& bindings,
                                     const Bindings& context) const {
  const auto& tpl = get(key);
  RenderedPrompt out;
  out.key = key;
  out.system = tpl.system_text;
  const auto& demos = demos_[slot(key)];
  const std::size_t n = std::min(num_demonstrations_, demos.size());
  for (std::size_t i = 0; i < n; ++i) {
    out.user += substitute(tpl.user_text, demos[i].bindings);
    out.user += ' ';
    out.user += demos[i].output;
    out.user += "\n\n";
  }
  out.user += substitute(tpl.user_text, bindings);
  out.context = bindings;
  for (const auto& [k, v] : context) out.context[k] = v;
  return out;
}

}  // namespace kgqa
