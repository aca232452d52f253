#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

namespace spanparse {
namespace {

Parameters small_params(const Vocab& vocab, int categories, bool residual, std::uint64_t seed, double lambda = 5.0) {
  EncoderConfig cfg;
  cfg.dim = 8;
  cfg.layers = 2;
  cfg.window = 2;
  cfg.residual = residual;
  return init_parameters(vocab, categories, cfg, 12, lambda, seed);
}

Vocab vocab_of(const std::vector<std::string>& texts) {
  Vocab v;
  for (const auto& t : texts)
    for (const auto& w : tokenize(t)) v.add(w);
  return v;
}

TEST(Encode, ShapesAndFiniteness) {
  auto s = scan::schema();
  Vocab v = vocab_of({"jump around left twice and walk"});
  Parameters p = small_params(v, s.category_count(), true, 3);
  EXPECT_EQ(encode(Utterance(""), p.enc).cols(), 0);
  Matrix h = encode(Utterance("jump around left twice and walk"), p.enc);
  EXPECT_EQ(h.cols(), 6);
  EXPECT_EQ(h.rows(), 8);
  EXPECT_TRUE(h.allFinite());
  // Unknown words share the UNK column.
  Matrix a = encode(Utterance("zzz"), p.enc), b = encode(Utterance("qqq"), p.enc);
  EXPECT_EQ(a, b);
}

TEST(Encode, ContextSensitive) {
  Vocab v = vocab_of({"walk left after run right twice and look"});
  for (bool residual : {false, true}) {
    Parameters p = small_params(v, 4, residual, 5);
    Matrix h1 = encode(Utterance("walk left after run right twice and"), p.enc);
    Matrix h2 = encode(Utterance("and left after run right twice walk"), p.enc);
    EXPECT_GT((h1.col(0) - h2.col(0)).norm(), 1e-6);
    EXPECT_GT((h1.col(6) - h2.col(6)).norm(), 1e-6);
    EXPECT_GT((h1.col(3) - h2.col(3)).norm(), 1e-6);  // unchanged token, changed context
  }
}

TEST(ScoreSpans, NetworkOutputWithoutLexicon) {
  auto s = scan::schema();
  Vocab v = vocab_of({"jump left twice"});
  Parameters p = small_params(v, s.category_count(), true, 7, 0.0);
  Utterance u("jump left twice");
  ScoreTable t = score_spans(u, p.enc, p.cls, Lexicon());
  Matrix h = encode(u, p.enc);
  for_each_span(3, [&](Span sp) {
    Vector x(16);
    x << h.col(sp.start - 1), h.col(sp.end - 1);
    Vector raw = p.cls.w2 * (p.cls.w1 * x + p.cls.b1).cwiseMax(0.0) + p.cls.b2;
    for (int c = 0; c < s.category_count(); ++c)
      EXPECT_NEAR(t.raw(sp, Category::from_index(c)), raw(c), 1e-12);
  });
}

TEST(ScoreSpans, LexiconAddsLambdaExactlyWhereMatched) {
  auto kb = geo::mini_kb();
  auto s = geo::schema(kb);
  Lexicon lex = Lexicon::auto_entities(s);
  Utterance u("What is the capital of states that New York borders ?");
  Vocab v;
  for (const auto& w : u.tokens) v.add(w);
  Parameters p = small_params(v, s.category_count(), true, 9, 5.0);
  ScoreTable with = score_spans(u, p.enc, p.cls, lex);
  ScoreTable without = score_spans(u, p.enc, p.cls, Lexicon());
  const ConstantId ny = s.id("stateid('new york')");
  EXPECT_NEAR(with.raw({8, 9}, Category::of(ny)) - without.raw({8, 9}, Category::of(ny)), 5.0, 1e-12);

  std::set<std::pair<Span, ConstantId>> hits;
  for (const auto& h : lexicon_matches(u, lex)) hits.insert(h);
  for_each_span(u.size(), [&](Span sp) {
    for (int c = 0; c < s.category_count(); ++c) {
      Category cat = Category::from_index(c);
      double d = with.raw(sp, cat) - without.raw(sp, cat);
      bool hit = cat.is_constant() && hits.count({sp, cat.constant});
      EXPECT_NEAR(d, hit ? 5.0 : 0.0, 1e-12);
    }
  });
}

TEST(ScoreSpans, ShiftedNoSemIsZero) {
  auto s = scan::schema();
  Vocab v = vocab_of({"run opposite right thrice after look"});
  Parameters p = small_params(v, s.category_count(), true, 1);
  Utterance u("run opposite right thrice after look");
  ScoreTable t = score_spans(u, p.enc, p.cls, scan::lexicon(s));
  for_each_span(u.size(), [&](Span sp) {
    EXPECT_EQ(t.shifted(sp, Category::nosem()), 0.0);
    for (int c = 0; c < s.category_count(); ++c) {
      Category cat = Category::from_index(c);
      EXPECT_NEAR(t.shifted(sp, cat), t.raw(sp, cat) - t.raw(sp, Category::nosem()), 1e-12);
    }
  });
}

TEST(ScoreSpans, DimensionMismatch) {
  Vocab v = vocab_of({"walk"});
  Parameters p = small_params(v, 5, true, 1);
  p.cls.w1 = Matrix::Zero(12, 10);
  EXPECT_THROW(score_spans(Utterance("walk"), p.enc, p.cls, Lexicon()), DimensionMismatch);
}

TEST(SpanProbability, UniformSaturatedAndShiftInvariant) {
  ScoreTable flat(3, 6);
  for_each_span(3, [&](Span sp) {
    for (int c = 0; c < 6; ++c) EXPECT_NEAR(span_probability(flat, sp, Category::from_index(c)), 1.0 / 6, 1e-15);
  });

  Rng rng(4);
  ScoreTable t = testing::random_table(4, 6, rng);
  t.set_raw({2, 3}, Category::of(1), t.raw({2, 3}, Category::of(1)) + 50);
  EXPECT_GT(span_probability(t, {2, 3}, Category::of(1)), 0.999);

  for_each_span(4, [&](Span sp) {
    Vector p = span_distribution(t, sp);
    EXPECT_NEAR(p.sum(), 1.0, 1e-9);
    // Same distribution from the shifted scores.
    Vector sh(6);
    for (int c = 0; c < 6; ++c) sh(c) = std::exp(t.shifted(sp, c));
    sh /= sh.sum();
    EXPECT_LT((sh - p).cwiseAbs().maxCoeff(), 1e-12);
  });
}

TEST(TreeLoss, CertainAndUniformTables) {
  Rng rng(2);
  const int n = 5, cats = 7;
  SpanTree gold = testing::random_tree(n, cats - 2, false, rng);
  SpanMap labels = span_map(gold);

  ScoreTable uniform(n, cats);
  EXPECT_NEAR(tree_loss(uniform, gold), SpanTable<int>::span_count(n) * std::log(cats), 1e-9);

  Matrix raw = Matrix::Zero(cats, SpanTable<int>::span_count(n));
  ScoreTable shape(n, cats);
  for_each_span(n, [&](Span sp) { raw(labels[sp].index(), shape.column(sp)) = 1000.0; });
  EXPECT_EQ(tree_loss(ScoreTable::from_raw(n, raw), gold), 0.0);
}

TEST(TreeLoss, GradientMatchesFiniteDifferences) {
  auto s = scan::schema();
  Lexicon lex = scan::lexicon(s);
  const std::vector<std::string> texts = {"jump around left twice", "walk after run opposite right thrice",
                                          "look and turn left"};
  Vocab v = vocab_of(texts);
  Rng rng(21);
  for (bool residual : {false, true}) {
    for (const auto& text : texts) {
      Utterance u(text);
      Parameters p = small_params(v, s.category_count(), residual, 100 + rng.below(100));
      SpanTree gold = testing::random_tree(u.size(), s.constant_count(), true, rng);
      for (const auto& probe : testing::probe_gradient(p, u, gold, lex, 10, rng))
        EXPECT_LT(probe.error(), 1e-4) << probe.analytic << " vs " << probe.numeric;
    }
  }
}

TEST(Optimizer, ZeroGradientOrZeroRateLeavesParameters) {
  Vocab v = vocab_of({"walk left"});
  Parameters p = small_params(v, 5, true, 3);
  Parameters q = p;
  Parameters zero = p.zeros_like();
  sgd_step(q, zero, 0.1);
  EXPECT_EQ(q.cls.w1, p.cls.w1);
  EXPECT_EQ(q.enc.embed, p.enc.embed);
  Parameters g = p;  // any nonzero gradient
  sgd_step(q, g, 0.0);
  EXPECT_EQ(q.cls.w2, p.cls.w2);
  EXPECT_EQ(q.enc.mix[1][0], p.enc.mix[1][0]);
}

TEST(Optimizer, LossDecreasesOnFixedBatch) {
  auto s = scan::schema();
  Lexicon lex = scan::lexicon(s, false);
  auto items = scan::generate_scan_sp(s);
  std::vector<std::pair<Utterance, SpanTree>> batch;
  for (std::size_t k = 0; k < items.size(); k += items.size() / 5) batch.emplace_back(Utterance(items[k].utterance), items[k].tree);
  Vocab v;
  for (const auto& [u, t] : batch)
    for (const auto& w : u.tokens) v.add(w);

  for (bool use_adam : {false, true}) {
    Parameters p = small_params(v, s.category_count(), true, 8, 0.0);
    Adam adam(p);
    auto total = [&](const Parameters& q) {
      double l = 0;
      for (const auto& [u, t] : batch) l += tree_loss(score_spans(u, q.enc, q.cls, lex), t);
      return l;
    };
    std::vector<double> losses{total(p)};
    for (int step = 0; step < 10; ++step) {
      Parameters g = p.zeros_like();
      for (const auto& [u, t] : batch) {
        ScoreTrace tr = score_ids(u, p.enc.vocab.ids(u), p.enc, p.cls, lex);
        backward(tr, tree_loss_gradient(tr.table, t), p, g);
      }
      if (use_adam) adam.step(p, g, 1e-2); else sgd_step(p, g, 1e-3);
      losses.push_back(total(p));
    }
    int rises = 0;
    for (std::size_t k = 1; k < losses.size(); ++k) rises += losses[k] > losses[k - 1] + 1e-9;
    EXPECT_LE(rises, 1);
    EXPECT_LT(losses.back(), 0.9 * losses.front());
  }
}

// Adding a constant to every category score of one span leaves span
// probabilities and the ranking of complete trees unchanged.
TEST(ShiftInvariance, TreeRankingUnchanged) {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(5));
    ScoreTable t = testing::random_table(n, 7, rng);
    Matrix raw = t.raw_matrix();
    const int col = static_cast<int>(rng.below(raw.cols()));
    raw.col(col).array() += rng.uniform(-20, 20);
    ScoreTable u = ScoreTable::from_raw(n, raw);
    for_each_span(n, [&](Span sp) {
      EXPECT_LT((span_distribution(t, sp) - span_distribution(u, sp)).cwiseAbs().maxCoeff(), 1e-12);
    });
    for (bool ternary : {false, true}) {
      auto a = parse_kbest(t, Grammar{ternary}, 8);
      auto b = parse_kbest(u, Grammar{ternary}, 8);
      ASSERT_EQ(a.size(), b.size());
      for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].tree, b[k].tree);
        EXPECT_NEAR(a[k].score, b[k].score, 1e-9);
      }
    }
  }
}

}  // namespace
}  // namespace spanparse
