#include <gtest/gtest.h>

#include <sstream>

#include "test_util.hpp"

namespace spanparse {
namespace {

TEST(Lexicon, AutoEntitiesCoverEveryEntity) {
  auto s = geo::schema(geo::mini_kb());
  Lexicon lex = Lexicon::auto_entities(s);
  for (ConstantId c = 0; c < s.constant_count(); ++c) {
    const auto& dc = s.constant(c);
    if (!dc.is_entity() || dc.phrases.empty()) continue;
    for (const auto& p : dc.phrases) EXPECT_TRUE(lex.lookup(p).count(c)) << dc.name;
  }
  EXPECT_TRUE(lex.lookup("new york").count(s.id("stateid('new york')")));
}

TEST(Lexicon, MatchIsExactOnTokenSpans) {
  auto s = geo::schema(geo::mini_kb());
  Lexicon lex = Lexicon::auto_entities(s);
  Utterance u("What is the capital of states that New York borders ?");
  const ConstantId ny = s.id("stateid('new york')");
  EXPECT_TRUE(lex.matches(u, {8, 9}, ny));  // case-insensitive
  EXPECT_FALSE(lex.matches(u, {8, 8}, ny));
  EXPECT_FALSE(lex.matches(u, {8, 10}, ny));
  EXPECT_FALSE(lex.matches(u, {7, 9}, ny));

  auto hits = lexicon_matches(u, lex);
  bool found = false;
  for (const auto& [span, c] : hits) {
    EXPECT_TRUE(lex.matches(u, span, c));
    if (span == Span{8, 9} && c == ny) found = true;
  }
  EXPECT_TRUE(found);
}

TEST(Lexicon, ManualEntriesParsedAndLimited) {
  auto s = scan::schema();
  Lexicon lex = Lexicon::auto_entities(s);
  std::istringstream ok("# comment\n\njump\tjump\nleap\tjump\n");
  lex.read_manual(ok, s);
  EXPECT_TRUE(lex.lookup("leap").count(s.id("jump")));

  std::istringstream third("hop\tjump\n");
  EXPECT_THROW(lex.read_manual(third, s), LexiconError);
  std::istringstream no_tab("jump jump\n");
  EXPECT_THROW(lex.read_manual(no_tab, s), LexiconError);
  std::istringstream unknown("x\tnosuch\n");
  EXPECT_THROW(lex.read_manual(unknown, s), LexiconError);
}

TEST(Lexicon, WithoutManualKeepsEntityEntries) {
  auto s = scan::schema();
  Lexicon full = scan::lexicon(s, true);
  Lexicon reduced = full.without_manual();
  EXPECT_TRUE(full.lookup("walk").count(s.id("walk")));
  EXPECT_TRUE(reduced.lookup("walk").empty());
  EXPECT_TRUE(reduced.lookup("left").count(s.id("l")));
  EXPECT_TRUE(reduced.lookup("around").count(s.id("ar")));
}

TEST(Lexicon, JsonAndTsvRoundTrip) {
  auto s = scan::schema();
  Lexicon full = scan::lexicon(s, true);
  Lexicon back = Lexicon::from_json(full.to_json(s), s);
  EXPECT_EQ(back.to_json(s), full.to_json(s));

  std::ostringstream tsv;
  full.write_tsv(tsv, s, true);
  Lexicon again = Lexicon::auto_entities(s);
  std::istringstream in(tsv.str());
  again.read_manual(in, s);
  EXPECT_EQ(again.to_json(s), full.to_json(s));
}

TEST(Lexicon, GeoManualLexiconRespectsTwoPhraseLimit) {
  auto s = geo::schema(geo::mini_kb());
  EXPECT_NO_THROW(geo::lexicon(s, true));
}

}  // namespace
}  // namespace spanparse
