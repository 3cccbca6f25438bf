#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "kgqa/kg_store.hpp"
#include "oracles.hpp"

using namespace kgqa;

namespace {

KnowledgeGraph from_text(const std::string& text) {
  std::istringstream in(text);
  return KnowledgeGraph::load(in);
}

}  // namespace

TEST(KgStore, LoadsBieberFixture) {
  const auto g = KnowledgeGraph::load_file(oracle::data_file("bieber.tsv"));
  EXPECT_EQ(g.triple_count(), 6u);
  EXPECT_EQ(g.entities().size(), 7u);
  EXPECT_TRUE(g.contains("Jeremy_Bieber", "people.married_to.person", "Erin_Wagner"));
  EXPECT_FALSE(g.contains("Erin_Wagner", "people.married_to.person", "Jeremy_Bieber"));
  EXPECT_EQ(g.out_degree("Justin_Bieber"), 3u);
  EXPECT_EQ(g.out_degree("Erin_Wagner"), 0u);
}

TEST(KgStore, TrimsAndDeduplicates) {
  const auto g = from_text(" A \tr\t B\nA\tr\tB\r\n# comment\n\nB\ts\tC\n");
  EXPECT_EQ(g.triple_count(), 2u);
  EXPECT_TRUE(g.contains("A", "r", "B"));
  EXPECT_TRUE(g.has_entity("C"));
}

TEST(KgStore, CaseIsSignificant) {
  const auto g = from_text("Iran\tr\tAsia\n");
  EXPECT_TRUE(g.has_entity("Iran"));
  EXPECT_FALSE(g.has_entity("iran"));
}

TEST(KgStore, RejectsWrongFieldCountWithLineNumber) {
  try {
    from_text("A\tr\tB\nA\tr\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(from_text("A\t\tB\n"), ParseError);
}

TEST(KgStore, NeighborsComeSortedByRelationThenTail) {
  const auto g = from_text("X\tb\tZ\nX\ta\tY\nX\tb\tA\n");
  const auto n = g.neighbors("X");
  ASSERT_EQ(n.size(), 3u);
  EXPECT_EQ(n[0], (ReasoningStep{"a", "Y"}));
  EXPECT_EQ(n[1], (ReasoningStep{"b", "A"}));
  EXPECT_EQ(n[2], (ReasoningStep{"b", "Z"}));
  EXPECT_TRUE(g.neighbors("missing").empty());
}

TEST(KgStore, SerializeRoundTripsAndDigestIsOrderIndependent) {
  const auto g = from_text("B\ts\tC\nA\tr\tB\n");
  std::ostringstream out;
  g.serialize(out);
  const auto h = from_text(out.str());
  EXPECT_EQ(h.triples(), g.triples());
  EXPECT_EQ(h.digest(), g.digest());
  EXPECT_EQ(from_text("A\tr\tB\nB\ts\tC\n").digest(), g.digest());
  EXPECT_NE(from_text("A\tr\tB\n").digest(), g.digest());
}

TEST(KgStore, ArrowFormatRoundTrip) {
  const ReasoningPath p{"Iranian_rial",
                        {{"finance.currency.countries_used", "Iran"},
                         {"location.country.form_of_government", "Theocracy"}}};
  const auto s = to_arrow_string(p);
  EXPECT_EQ(s,
            "Iranian_rial -> finance.currency.countries_used -> Iran -> "
            "location.country.form_of_government -> Theocracy");
  EXPECT_EQ(parse_arrow_path(s), p);
  EXPECT_EQ(parse_arrow_path("Iranian_rial \xE2\x86\x92 finance.currency.countries_used "
                             "\xE2\x86\x92 Iran"),
            (ReasoningPath{"Iranian_rial", {{"finance.currency.countries_used", "Iran"}}}));
  EXPECT_EQ(parse_arrow_path("Solo"), (ReasoningPath{"Solo", {}}));
}

TEST(KgStore, ArrowFormatRejectsMalformed) {
  EXPECT_FALSE(parse_arrow_path("A -> -> B"));
  EXPECT_FALSE(parse_arrow_path("A -> r"));
  EXPECT_FALSE(parse_arrow_path(""));
  EXPECT_FALSE(parse_arrow_path("A -> r -> "));
}

TEST(KgStore, ValidateCountsFabricatedHop) {
  const auto g = KnowledgeGraph::load_file(oracle::data_file("bieber.tsv"));
  const auto p = *parse_arrow_path(
      "Justin_Bieber -> people.person.father -> Jeremy_Bieber -> "
      "people.married_to.person -> Erin_Wagner -> people.person.father -> Nobody");
  const auto r = g.validate(p);
  EXPECT_EQ(r.total_step_count, 3u);
  EXPECT_EQ(r.valid_step_count, 2u);
  EXPECT_EQ(r.first_invalid_index, 2u);
  EXPECT_EQ(r.count(StepError::missing_triple), 1u);
  EXPECT_EQ(r.count(StepError::format_error), 0u);
}

TEST(KgStore, ValidateFlagsEmptyFieldsAsFormatErrors) {
  const auto g = KnowledgeGraph::load_file(oracle::data_file("bieber.tsv"));
  const ReasoningPath p{"Justin_Bieber", {{"", "Jeremy_Bieber"}}};
  EXPECT_EQ(g.validate(p).count(StepError::format_error), 1u);
}

TEST(KgStore, ValidateAgreesWithTripleScanOnRandomWalks) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const auto kg = oracle::random_kg(rng, 12, 3, 3);
    const KnowledgeGraph g(kg.triples, kg.entities);
    std::uniform_int_distribution<std::size_t> pe(0, kg.entities.size() - 1);
    for (int k = 0; k < 20; ++k) {
      ReasoningPath p{kg.entities[pe(rng)], {}};
      for (int s = 0; s < 3; ++s) {
        p.steps.push_back({"rel.r" + std::to_string(rng() % 3), kg.entities[pe(rng)]});
      }
      const auto r = g.validate(p);
      EXPECT_EQ(r.valid_step_count == r.total_step_count,
                oracle::path_is_valid(kg.triples, p));
    }
  }
}

TEST(KgStore, SubgraphKeepsTriplesWithinHops) {
  const auto g = from_text("A\tr\tB\nB\tr\tC\nC\tr\tD\nX\tr\tA\n");
  const auto s1 = g.subgraph({"A"}, 1);
  EXPECT_EQ(s1.triple_count(), 1u);
  const auto s2 = g.subgraph({"A"}, 2);
  EXPECT_EQ(s2.triple_count(), 2u);
  EXPECT_TRUE(s2.contains("B", "r", "C"));
  EXPECT_FALSE(s2.contains("X", "r", "A"));
  EXPECT_THROW(g.subgraph({"A"}, 0), std::invalid_argument);
}
