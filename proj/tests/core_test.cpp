#include <gtest/gtest.h>

#include "test_util.hpp"

namespace spanparse {
namespace {

using testing::tree_of;

TEST(Tokenize, SplitsTrailingPunctuation) {
  auto t = tokenize("What is the capital of states that New York borders?");
  ASSERT_EQ(t.size(), 11u);
  EXPECT_EQ(t[0], "What");
  EXPECT_EQ(t[9], "borders");
  EXPECT_EQ(t[10], "?");
}

TEST(Tokenize, KeepsCaseAndHandlesBlanks) {
  EXPECT_TRUE(tokenize("   ").empty());
  auto t = tokenize("  jump\tLeft  ");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[1], "Left");
}

TEST(Utterance, PhraseUsesOneBasedInclusiveSpans) {
  Utterance u("state that has the most people ?");
  EXPECT_EQ(u.size(), 7);
  EXPECT_EQ(u.phrase({1, 1}), "state");
  EXPECT_EQ(u.phrase({4, 6}), "the most people");
}

TEST(Category, IndexRoundTrip) {
  EXPECT_EQ(Category::nosem().index(), 0);
  EXPECT_EQ(Category::join().index(), 1);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(Category::from_index(i).index(), i);
}

TEST(Span, CrossingIsSymmetricAndExcludesNesting) {
  Span a{1, 3}, b{2, 5}, c{2, 3}, d{4, 5};
  EXPECT_TRUE(a.crosses(b));
  EXPECT_TRUE(b.crosses(a));
  EXPECT_FALSE(a.crosses(c));
  EXPECT_FALSE(a.crosses(d));
  EXPECT_TRUE(a.contains(c));
}

SpanTree capital_question_tree(const DomainSchema& s) {
  return tree_of(11,
                 {{1, 11, "Join"},
                  {4, 11, "Join"},
                  {4, 4, "capital"},
                  {5, 11, "Join"},
                  {5, 5, "loc_2"},
                  {6, 11, "Join"},
                  {6, 7, "Join"},
                  {6, 6, "state"},
                  {8, 11, "Join"},
                  {8, 9, "stateid('new york')"},
                  {10, 11, "Join"},
                  {10, 10, "next_to_1"}},
                 s, false);
}

TEST(SpanMap, CapitalQuestionTreeHasNoSemGaps) {
  auto s = geo::schema(geo::mini_kb());
  SpanTree t = capital_question_tree(s);
  EXPECT_FALSE(grammar_violation(t, false).has_value());
  EXPECT_TRUE(t.is_root);
  ASSERT_EQ(t.children.size(), 2u);
  EXPECT_EQ(t.children[0].span, (Span{1, 3}));
  EXPECT_TRUE(t.children[0].category.is_nosem());
  SpanMap m = span_map(t);
  EXPECT_TRUE(m(7, 7).is_nosem());
  EXPECT_TRUE(m(11, 11).is_nosem());
  EXPECT_TRUE(m(2, 5).is_nosem());  // not a constituent
  EXPECT_EQ(labeled_spans(t).size(), 12u);
}

TEST(SpanMap, CrossingSpansRaiseOverlapError) {
  auto s = testing::toy_schema();
  EXPECT_THROW(tree_of(4, {{1, 4, "Join"}, {1, 2, "a"}, {2, 3, "b"}}, s), OverlapError);
}

TEST(SpanMap, LeafWithLabeledChildIsRejected) {
  auto s = testing::toy_schema();
  EXPECT_THROW(tree_of(3, {{1, 3, "Join"}, {1, 2, "a"}, {1, 1, "b"}, {3, 3, "p"}}, s), ArityError);
}

TEST(SpanMap, FourChildrenIsRejected) {
  auto s = testing::toy_schema();
  EXPECT_THROW(tree_of(4, {{1, 4, "Join"}, {1, 1, "a"}, {2, 2, "a"}, {3, 3, "a"}, {4, 4, "a"}}, s), ArityError);
}

TEST(SpanMap, TernaryOnlyWhenAllowed) {
  auto s = testing::toy_schema();
  std::vector<std::tuple<int, int, std::string>> spans = {{1, 3, "Join"}, {1, 1, "a"}, {2, 2, "p"}, {3, 3, "b"}};
  EXPECT_NO_THROW(tree_of(3, spans, s, true));
  EXPECT_THROW(tree_of(3, spans, s, false), ArityError);
}

// Every legal tree survives a round trip through its span map.
TEST(SpanMapProperty, RoundTripOverAllSmallTrees) {
  for (int n = 1; n <= 5; ++n) {
    for (bool ternary : {false, true}) {
      int count = 0;
      testing::enumerate_trees(n, ternary, {0, 2}, [&](const SpanTree& t) {
        ASSERT_FALSE(grammar_violation(t, ternary).has_value());
        EXPECT_EQ(tree_from_span_map(span_map(t), ternary), t);
        ++count;
      });
      EXPECT_GT(count, 0);
    }
  }
}

TEST(Validator, RejectsMisplacedRootAndBadRules) {
  SpanTree leaf = SpanTree::leaf({1, 1}, Category::of(0));
  EXPECT_TRUE(grammar_violation(leaf, false).has_value());  // missing root flag
  EXPECT_FALSE(grammar_violation(as_root(leaf), false).has_value());

  // NoSem Join is legal only at the root.
  SpanTree inner = SpanTree::join({SpanTree::leaf({1, 1}, Category::nosem()), SpanTree::leaf({2, 2}, Category::of(0))});
  EXPECT_FALSE(grammar_violation(as_root(inner), false).has_value());
  SpanTree nested = as_root(SpanTree::join({inner, SpanTree::leaf({3, 3}, Category::of(1))}));
  EXPECT_TRUE(grammar_violation(nested, false).has_value());

  SpanTree join_leaf = as_root(SpanTree::leaf({1, 2}, Category::join()));
  EXPECT_TRUE(grammar_violation(join_leaf, false).has_value());
}

TEST(SpanTable, CountsAndIndexes) {
  EXPECT_EQ(SpanTable<int>::span_count(11), 66);
  SpanTable<int> t(4, 0);
  int k = 0;
  for_each_span(4, [&](Span s) { t[s] = ++k; });
  EXPECT_EQ(k, 10);
  EXPECT_EQ(t(1, 1), 1);
  EXPECT_EQ(t(4, 4), 10);
}

TEST(Rng, DeterministicAndInRange) {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) {
    double x = a.uniform();
    EXPECT_EQ(x, b.uniform());
    EXPECT_GE(x, 0.0);
    EXPECT_LT(x, 1.0);
    EXPECT_LT(a.below(5), 5u);
    b.below(5);
  }
}

}  // namespace
}  // namespace spanparse
