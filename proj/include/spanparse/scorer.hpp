#pragma once

// Span scoring: a small trainable contextual encoder, the one-hidden-layer
// span classifier over [h_i; h_j], the exact-match lexicon feature, shifted
// score tables, the span-level cross-entropy and its gradient.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "spanparse/core.hpp"
#include "spanparse/lexicon.hpp"

namespace spanparse {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Scores at or below this value are treated as -infinity. A finite
// sentinel keeps sums free of inf - inf.
inline constexpr double kMasked = -1e30;
inline bool is_masked(double v) { return v <= kMasked / 2; }

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Score tables

class ScoreTable {
 public:
  ScoreTable() = default;
  ScoreTable(int n, int categories) : n_(n), raw_(categories, SpanTable<int>::span_count(n)) {
    raw_.setZero();
    index_ = SpanTable<int>(n, -1);
    int k = 0;
    for_each_span(n, [&](Span s) { index_[s] = k++; });
    shifted_ = raw_;
  }

  // Takes a |C| x #spans matrix of raw scores in span order (see column()).
  static ScoreTable from_raw(int n, Matrix raw) {
    ScoreTable t(n, static_cast<int>(raw.rows()));
    t.raw_ = std::move(raw);
    t.reshift();
    return t;
  }

  int length() const { return n_; }
  int categories() const { return static_cast<int>(raw_.rows()); }
  int span_count() const { return static_cast<int>(raw_.cols()); }
  int column(Span s) const { return index_[s]; }

  double raw(Span s, Category c) const { return raw_(c.index(), column(s)); }
  double shifted(Span s, Category c) const { return shifted_(c.index(), column(s)); }
  double shifted(Span s, int category_index) const { return shifted_(category_index, column(s)); }

  void set_raw(Span s, Category c, double v) {
    raw_(c.index(), column(s)) = v;
    shift_column(column(s));
  }

  const Matrix& raw_matrix() const { return raw_; }
  const Matrix& shifted_matrix() const { return shifted_; }

 private:
  void reshift() {
    shifted_.resize(raw_.rows(), raw_.cols());
    for (int k = 0; k < raw_.cols(); ++k) shift_column(k);
  }
  void shift_column(int k) {
    const double base = raw_(0, k);
    for (int c = 0; c < raw_.rows(); ++c)
      shifted_(c, k) = is_masked(raw_(c, k)) ? kMasked : raw_(c, k) - base;
    shifted_(0, k) = 0.0;
  }

  int n_ = 0;
  Matrix raw_;
  Matrix shifted_;
  SpanTable<int> index_;
};

// Softmax over categories of the raw scores at one span.
inline Vector span_distribution(const ScoreTable& t, Span s) {
  Vector col = t.raw_matrix().col(t.column(s));
  double m = col.maxCoeff();
  Vector e = (col.array() - m).exp();
  return e / e.sum();
}

inline double span_probability(const ScoreTable& t, Span s, Category c) {
  return span_distribution(t, s)(c.index());
}

// -sum over every span (single tokens included) of log p(T[i,j]); spans
// that are not constituents contribute their NoSem term.
inline double tree_loss(const ScoreTable& t, const SpanTree& gold) {
  SpanMap labels = span_map(gold);
  double loss = 0;
  for_each_span(t.length(), [&](Span s) {
    Vector col = t.raw_matrix().col(t.column(s));
    double m = col.maxCoeff();
    double lse = m + std::log((col.array() - m).exp().sum());
    loss += lse - col(labels[s].index());
  });
  return loss;
}

// d loss / d raw, scaled by `weight`.
inline Matrix tree_loss_gradient(const ScoreTable& t, const SpanTree& gold, double weight = 1.0) {
  SpanMap labels = span_map(gold);
  Matrix g(t.categories(), t.span_count());
  for_each_span(t.length(), [&](Span s) {
    int k = t.column(s);
    Vector col = t.raw_matrix().col(k);
    double m = col.maxCoeff();
    Vector e = (col.array() - m).exp();
    g.col(k) = weight * e / e.sum();
    g(labels[s].index(), k) -= weight;
  });
  return g;
}

// ---------------------------------------------------------------------------
// Parameters

struct EncoderConfig {
  int dim = 64;      // h_dim
  int layers = 2;
  int window = 3;    // offsets -window..+window
  bool residual = true;  // out = in + tanh(...) instead of tanh(...)
};

class Vocab {
 public:
  Vocab() { add("<unk>"); }

  int add(const std::string& word) {
    std::string w = lower(word);
    auto it = index_.find(w);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(words_.size());
    index_.emplace(w, id);
    words_.push_back(w);
    return id;
  }
  int lookup(const std::string& word) const {
    auto it = index_.find(lower(word));
    return it == index_.end() ? kUnk : it->second;
  }
  std::vector<int> ids(const Utterance& u) const {
    std::vector<int> out;
    out.reserve(u.tokens.size());
    for (const auto& t : u.tokens) out.push_back(lookup(t));
    return out;
  }
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

  static constexpr int kUnk = 0;

 private:
  static std::string lower(const std::string& w) {
    std::string o = w;
    for (auto& ch : o) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return o;
  }
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> words_;
};

// Token embeddings followed by `layers` rounds of windowed context mixing:
// out_t = tanh(b + sum_o A_o in_{t+o}), zero-padded at the edges, plus in_t
// when residual.
struct EncoderParams {
  EncoderConfig config;
  Vocab vocab;
  Matrix embed;                          // dim x |vocab|
  std::vector<std::vector<Matrix>> mix;  // [layer][offset + window], dim x dim
  std::vector<Vector> mix_bias;          // [layer]

  int dim() const { return config.dim; }
};

struct ClassifierParams {
  Matrix w1;  // hidden x 2*dim
  Vector b1;
  Matrix w2;  // |C| x hidden
  Vector b2;
  double lambda = 20.0;

  int hidden() const { return static_cast<int>(w1.rows()); }
  int categories() const { return static_cast<int>(w2.rows()); }
};

struct Parameters {
  EncoderParams enc;
  ClassifierParams cls;

  template <typename F>
  void for_each_tensor(F&& f) {
    f(enc.embed);
    for (auto& layer : enc.mix)
      for (auto& a : layer) f(a);
    for (auto& b : enc.mix_bias) f(b);
    f(cls.w1);
    f(cls.b1);
    f(cls.w2);
    f(cls.b2);
  }

  Parameters zeros_like() const {
    Parameters z = *this;
    z.for_each_tensor([](auto& t) { t.setZero(); });
    return z;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for_each_tensor([&](auto& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
  }
};

inline void fill_uniform(Matrix& m, double a, Rng& rng) {
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(-a, a);
}

inline Parameters init_parameters(const Vocab& vocab, int categories, const EncoderConfig& cfg,
                                  int hidden, double lambda, std::uint64_t seed) {
  Rng rng(seed);
  Parameters p;
  p.enc.config = cfg;
  p.enc.vocab = vocab;
  const int d = cfg.dim;
  p.enc.embed.resize(d, vocab.size());
  fill_uniform(p.enc.embed, 1.0, rng);
  const int offsets = 2 * cfg.window + 1;
  const double a_mix = std::sqrt(6.0 / (offsets * d + d));
  for (int l = 0; l < cfg.layers; ++l) {
    std::vector<Matrix> layer;
    for (int o = 0; o < offsets; ++o) {
      Matrix m(d, d);
      fill_uniform(m, a_mix, rng);
      layer.push_back(std::move(m));
    }
    p.enc.mix.push_back(std::move(layer));
    p.enc.mix_bias.push_back(Vector::Zero(d));
  }
  p.cls.w1.resize(hidden, 2 * d);
  fill_uniform(p.cls.w1, std::sqrt(6.0 / (2 * d + hidden)), rng);
  p.cls.b1 = Vector::Zero(hidden);
  p.cls.w2.resize(categories, hidden);
  fill_uniform(p.cls.w2, std::sqrt(6.0 / (hidden + categories)), rng);
  p.cls.b2 = Vector::Zero(categories);
  p.cls.lambda = lambda;
  return p;
}

// ---------------------------------------------------------------------------
// Forward / backward

struct EncoderTrace {
  std::vector<int> ids;
  std::vector<Matrix> states;  // states[0] = embeddings, states[l+1] = layer l output
  const Matrix& output() const { return states.back(); }
};

inline EncoderTrace encode_ids(const std::vector<int>& ids, const EncoderParams& p) {
  EncoderTrace tr;
  tr.ids = ids;
  const int n = static_cast<int>(ids.size());
  const int d = p.dim();
  const int w = p.config.window;
  Matrix x(d, n);
  for (int t = 0; t < n; ++t) x.col(t) = p.embed.col(ids[t]);
  tr.states.push_back(std::move(x));
  for (std::size_t l = 0; l < p.mix.size(); ++l) {
    const Matrix& in = tr.states.back();
    Matrix z = p.mix_bias[l].replicate(1, n);
    for (int o = -w; o <= w; ++o) {
      int t0 = std::max(0, -o);
      int t1 = std::min(n, n - o);
      if (t1 <= t0) continue;
      z.middleCols(t0, t1 - t0).noalias() += p.mix[l][o + w] * in.middleCols(t0 + o, t1 - t0);
    }
    Matrix out = z.array().tanh().matrix();
    if (p.config.residual) out += in;
    tr.states.push_back(std::move(out));
  }
  return tr;
}

// Contextual vectors h_1..h_n as matrix columns.
inline Matrix encode(const Utterance& u, const EncoderParams& p) {
  if (u.size() == 0) return Matrix(p.dim(), 0);
  return encode_ids(p.vocab.ids(u), p).output();
}

struct ScoreTrace {
  EncoderTrace enc;
  Matrix u, v;       // hidden x n: W1 halves applied to every token
  Matrix hidden;     // hidden x #spans, post-relu
  std::vector<Span> spans;
  ScoreTable table;
};

inline ScoreTrace score_ids(const Utterance& u, const std::vector<int>& ids, const EncoderParams& enc,
                            const ClassifierParams& cls, const Lexicon& lex) {
  const int d = enc.dim();
  if (cls.w1.cols() != 2 * d) {
    throw DimensionMismatch("classifier expects span vectors of size " + std::to_string(cls.w1.cols()) +
                            " but the encoder produces " + std::to_string(2 * d));
  }
  ScoreTrace tr;
  const int n = static_cast<int>(ids.size());
  tr.enc = encode_ids(ids, enc);
  const Matrix& h = tr.enc.output();
  tr.u.noalias() = cls.w1.leftCols(d) * h;
  tr.v.noalias() = cls.w1.rightCols(d) * h;
  const int spans = SpanTable<int>::span_count(n);
  tr.hidden.resize(cls.hidden(), spans);
  tr.spans.reserve(spans);
  int k = 0;
  for_each_span(n, [&](Span s) {
    tr.hidden.col(k) = (tr.u.col(s.start - 1) + tr.v.col(s.end - 1) + cls.b1).cwiseMax(0.0);
    tr.spans.push_back(s);
    ++k;
  });
  Matrix raw = cls.w2 * tr.hidden;
  raw.colwise() += cls.b2;
  tr.table = ScoreTable(n, cls.categories());
  if (cls.lambda != 0.0) {
    for (const auto& [s, c] : lexicon_matches(u, lex)) raw(Category::of(c).index(), tr.table.column(s)) += cls.lambda;
  }
  tr.table = ScoreTable::from_raw(n, std::move(raw));
  return tr;
}

// raw(span, c) = [W2 relu(W1 [h_i; h_j])]_c + lambda * delta(span, c)
inline ScoreTable score_spans(const Utterance& u, const EncoderParams& enc, const ClassifierParams& cls,
                              const Lexicon& lex) {
  if (u.size() == 0) return ScoreTable(0, cls.categories());
  return score_ids(u, enc.vocab.ids(u), enc, cls, lex).table;
}

// Accumulates parameter gradients given d loss / d raw scores.
inline void backward(const ScoreTrace& tr, const Matrix& d_raw, const Parameters& p, Parameters& g) {
  const auto& enc = p.enc;
  const auto& cls = p.cls;
  const int d = enc.dim();
  const int n = static_cast<int>(tr.enc.ids.size());
  const Matrix& h = tr.enc.output();

  g.cls.w2.noalias() += d_raw * tr.hidden.transpose();
  g.cls.b2 += d_raw.rowwise().sum();
  Matrix d_pre = cls.w2.transpose() * d_raw;
  d_pre = d_pre.cwiseProduct((tr.hidden.array() > 0.0).cast<double>().matrix());
  g.cls.b1 += d_pre.rowwise().sum();

  Matrix du = Matrix::Zero(cls.hidden(), n);
  Matrix dv = Matrix::Zero(cls.hidden(), n);
  for (std::size_t k = 0; k < tr.spans.size(); ++k) {
    du.col(tr.spans[k].start - 1) += d_pre.col(static_cast<Eigen::Index>(k));
    dv.col(tr.spans[k].end - 1) += d_pre.col(static_cast<Eigen::Index>(k));
  }
  g.cls.w1.leftCols(d).noalias() += du * h.transpose();
  g.cls.w1.rightCols(d).noalias() += dv * h.transpose();
  Matrix dh = cls.w1.leftCols(d).transpose() * du;
  dh.noalias() += cls.w1.rightCols(d).transpose() * dv;

  const int w = enc.config.window;
  for (int l = static_cast<int>(enc.mix.size()) - 1; l >= 0; --l) {
    const Matrix& out = tr.enc.states[l + 1];
    const Matrix& in = tr.enc.states[l];
    Matrix act = enc.config.residual ? Matrix(out - in) : out;
    Matrix dz = dh.cwiseProduct((1.0 - act.array().square()).matrix());
    g.enc.mix_bias[l] += dz.rowwise().sum();
    Matrix din = enc.config.residual ? dh : Matrix::Zero(d, n);
    for (int o = -w; o <= w; ++o) {
      int t0 = std::max(0, -o);
      int t1 = std::min(n, n - o);
      if (t1 <= t0) continue;
      g.enc.mix[l][o + w].noalias() += dz.middleCols(t0, t1 - t0) * in.middleCols(t0 + o, t1 - t0).transpose();
      din.middleCols(t0 + o, t1 - t0).noalias() += enc.mix[l][o + w].transpose() * dz.middleCols(t0, t1 - t0);
    }
    dh = std::move(din);
  }
  for (int t = 0; t < n; ++t) g.enc.embed.col(tr.enc.ids[t]) += dh.col(t);
}

// ---------------------------------------------------------------------------
// Optimizers

inline void sgd_step(Parameters& p, Parameters& grads, double lr) {
  std::vector<Matrix*> pm;
  std::vector<Vector*> pv;
  p.for_each_tensor([&](auto& t) {
    using T = std::decay_t<decltype(t)>;
    if constexpr (std::is_same_v<T, Matrix>) pm.push_back(&t); else pv.push_back(&t);
  });
  std::size_t im = 0, iv = 0;
  grads.for_each_tensor([&](auto& t) {
    using T = std::decay_t<decltype(t)>;
    if constexpr (std::is_same_v<T, Matrix>) *pm[im++] -= lr * t; else *pv[iv++] -= lr * t;
  });
}

class Adam {
 public:
  explicit Adam(const Parameters& like, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(like.zeros_like()), v_(like.zeros_like()), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(Parameters& p, Parameters& grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    std::vector<double*> gs, ms, vs;
    std::vector<Eigen::Index> sizes;
    grads.for_each_tensor([&](auto& t) { gs.push_back(t.data()); sizes.push_back(t.size()); });
    m_.for_each_tensor([&](auto& t) { ms.push_back(t.data()); });
    v_.for_each_tensor([&](auto& t) { vs.push_back(t.data()); });
    std::size_t k = 0;
    p.for_each_tensor([&](auto& t) {
      double* w = t.data();
      for (Eigen::Index i = 0; i < sizes[k]; ++i) {
        double gi = gs[k][i];
        ms[k][i] = beta1_ * ms[k][i] + (1 - beta1_) * gi;
        vs[k][i] = beta2_ * vs[k][i] + (1 - beta2_) * gi * gi;
        w[i] -= lr * (ms[k][i] / c1) / (std::sqrt(vs[k][i] / c2) + eps_);
      }
      ++k;
    });
  }

 private:
  Parameters m_, v_;
  double beta1_, beta2_, eps_;
  int t_ = 0;
};

}  // namespace spanparse
