#pragma once

// Span trees, categories and utterances shared by every other module.
//
// Spans are 1-based and inclusive on both ends: a sentence of n tokens has
// spans (i, j) with 1 <= i <= j <= n.

#include <algorithm>
#include <cctype>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace spanparse {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OverlapError : public Error {
 public:
  using Error::Error;
};

class ArityError : public Error {
 public:
  using Error::Error;
};

using ConstantId = int;
inline constexpr ConstantId kHole = -1;

// Applicative program over domain constants. `args` always has one entry per
// argument slot of `head`; unfilled slots hold a hole (head == kHole).
struct Program {
  ConstantId head = kHole;
  std::vector<Program> args;

  Program() = default;
  explicit Program(ConstantId h, std::size_t arity = 0) : head(h), args(arity) {}

  bool is_hole() const { return head == kHole; }
  bool has_holes() const {
    return std::any_of(args.begin(), args.end(), [](const Program& a) { return a.is_hole(); });
  }
  std::size_t size() const {
    std::size_t s = is_hole() ? 0 : 1;
    for (const auto& a : args) s += a.size();
    return s;
  }

  friend bool operator==(const Program&, const Program&) = default;
};

struct Category {
  enum class Kind : unsigned char { NoSem = 0, Join = 1, Constant = 2 };

  Kind kind = Kind::NoSem;
  ConstantId constant = kHole;

  static Category nosem() { return {}; }
  static Category join() { return {Kind::Join, kHole}; }
  static Category of(ConstantId c) { return {Kind::Constant, c}; }

  bool is_nosem() const { return kind == Kind::NoSem; }
  bool is_join() const { return kind == Kind::Join; }
  bool is_constant() const { return kind == Kind::Constant; }

  // ind(c): row of the category in the classifier output. NoSem and Join
  // come first, constants follow in schema order.
  int index() const { return is_constant() ? 2 + constant : static_cast<int>(kind); }
  static Category from_index(int i) {
    if (i == 0) return nosem();
    if (i == 1) return join();
    return of(i - 2);
  }

  friend bool operator==(const Category&, const Category&) = default;
  friend auto operator<=>(const Category& a, const Category& b) { return a.index() <=> b.index(); }
};

inline int category_count(int constant_count) { return constant_count + 2; }

struct Span {
  int start = 1;
  int end = 1;

  int length() const { return end - start + 1; }
  bool contains(const Span& o) const { return start <= o.start && o.end <= end; }
  bool crosses(const Span& o) const {
    return (start < o.start && o.start <= end && end < o.end) ||
           (o.start < start && start <= o.end && o.end < end);
  }

  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

struct SpanTree {
  Span span;
  Category category;
  bool is_root = false;  // the start symbol S is a Join node flagged as root
  std::vector<SpanTree> children;
  std::optional<Program> sub_program;

  bool is_leaf() const { return children.empty(); }

  static SpanTree leaf(Span s, Category c) { return SpanTree{s, c, false, {}, std::nullopt}; }
  static SpanTree join(std::vector<SpanTree> kids) {
    SpanTree t{{kids.front().span.start, kids.back().span.end}, Category::join(), false,
               std::move(kids), std::nullopt};
    return t;
  }

  friend bool operator==(const SpanTree&, const SpanTree&) = default;
};

inline SpanTree as_root(SpanTree t) {
  t.is_root = true;
  return t;
}

// ---------------------------------------------------------------------------
// Utterances

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t b = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (b == i) break;
    std::string word(text.substr(b, i - b));
    std::vector<std::string> trailing;
    while (word.size() > 1 && (word.back() == '?' || word.back() == '.' || word.back() == ',')) {
      trailing.emplace_back(1, word.back());
      word.pop_back();
    }
    out.push_back(std::move(word));
    out.insert(out.end(), trailing.rbegin(), trailing.rend());
  }
  return out;
}

// Deterministic uniform draws from raw mt19937_64 output so initialization
// does not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t below(std::uint64_t n) { return gen_() % n; }
  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

// Fisher-Yates over Rng::below, identical on every standard library.
template <typename T>
void shuffle(std::vector<T>& xs, Rng& rng) {
  for (std::size_t k = xs.size(); k > 1; --k) std::swap(xs[k - 1], xs[rng.below(k)]);
}

struct Utterance {
  std::string raw_text;
  std::vector<std::string> tokens;

  Utterance() = default;
  explicit Utterance(std::string text) : raw_text(std::move(text)), tokens(tokenize(raw_text)) {}

  int size() const { return static_cast<int>(tokens.size()); }

  std::string phrase(Span s) const {
    std::string out;
    for (int k = s.start; k <= s.end; ++k) {
      if (k > s.start) out += ' ';
      out += tokens[k - 1];
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Span maps

// Dense upper-triangular table indexed by 1-based spans.
template <typename T>
class SpanTable {
 public:
  SpanTable() = default;
  SpanTable(int n, T init) : n_(n), cells_(static_cast<std::size_t>(n) * n, init) {}

  int size() const { return n_; }
  T& operator()(int i, int j) { return cells_[offset(i, j)]; }
  const T& operator()(int i, int j) const { return cells_[offset(i, j)]; }
  T& operator[](Span s) { return (*this)(s.start, s.end); }
  const T& operator[](Span s) const { return (*this)(s.start, s.end); }

  static int span_count(int n) { return n * (n + 1) / 2; }

 private:
  std::size_t offset(int i, int j) const {
    return static_cast<std::size_t>(i - 1) * n_ + static_cast<std::size_t>(j - 1);
  }
  int n_ = 0;
  std::vector<T> cells_;
};

using SpanMap = SpanTable<Category>;

template <typename F>
void for_each_span(int n, F&& f) {
  for (int i = 1; i <= n; ++i)
    for (int j = i; j <= n; ++j) f(Span{i, j});
}

inline void fill_span_map(const SpanTree& t, SpanMap& m) {
  m[t.span] = t.category;
  for (const auto& c : t.children) fill_span_map(c, m);
}

// Flattens a tree to the total span -> category map it denotes.
inline SpanMap span_map(const SpanTree& t) {
  SpanMap m(t.span.end, Category::nosem());
  fill_span_map(t, m);
  return m;
}

namespace detail {

inline SpanTree build_from_map(const SpanMap& m, const std::vector<Span>& labeled, Span s,
                               bool root, bool allow_ternary) {
  Category cat = m[s];
  std::vector<Span> inner;
  for (const Span& o : labeled)
    if (o != s && s.contains(o)) inner.push_back(o);

  if (cat.is_constant() || cat.is_nosem()) {
    if (!inner.empty()) {
      throw ArityError("span (" + std::to_string(s.start) + "," + std::to_string(s.end) +
                       ") is a leaf category but contains labeled sub-spans");
    }
    SpanTree t = SpanTree::leaf(s, cat);
    t.is_root = root;
    return t;
  }

  // Maximal labeled sub-spans become semantic children; gaps become NoSem leaves.
  std::vector<Span> top;
  for (const Span& a : inner) {
    bool maximal = std::none_of(inner.begin(), inner.end(),
                                [&](const Span& b) { return b != a && b.contains(a); });
    if (maximal) top.push_back(a);
  }
  std::sort(top.begin(), top.end());

  std::vector<SpanTree> kids;
  int pos = s.start;
  for (const Span& a : top) {
    if (a.start > pos) kids.push_back(SpanTree::leaf({pos, a.start - 1}, Category::nosem()));
    kids.push_back(build_from_map(m, labeled, a, false, allow_ternary));
    pos = a.end + 1;
  }
  if (pos <= s.end) kids.push_back(SpanTree::leaf({pos, s.end}, Category::nosem()));

  auto sem = [&](std::size_t k) { return !kids[k].category.is_nosem(); };
  bool ok = false;
  if (kids.size() == 2) {
    ok = (sem(0) && sem(1)) || (sem(0) && !sem(1)) || (root && !sem(0) && sem(1));
  } else if (kids.size() == 3) {
    ok = allow_ternary && sem(0) && sem(1) && sem(2);
  }
  if (!ok) {
    throw ArityError("Join span (" + std::to_string(s.start) + "," + std::to_string(s.end) +
                     ") cannot be built from " + std::to_string(kids.size()) +
                     " children under the grammar");
  }
  SpanTree t{s, cat, root, std::move(kids), std::nullopt};
  return t;
}

}  // namespace detail

// Inverse of span_map: rebuilds the unique tree whose constituents are the
// labeled spans plus the NoSem gaps between them.
inline SpanTree tree_from_span_map(const SpanMap& m, bool allow_ternary = true) {
  const int n = m.size();
  if (n == 0) throw ArityError("empty span map");
  std::vector<Span> labeled;
  for_each_span(n, [&](Span s) {
    if (!m[s].is_nosem()) labeled.push_back(s);
  });
  for (std::size_t a = 0; a < labeled.size(); ++a) {
    for (std::size_t b = a + 1; b < labeled.size(); ++b) {
      if (labeled[a].crosses(labeled[b])) {
        const Span& x = labeled[a];
        const Span& y = labeled[b];
        throw OverlapError("spans (" + std::to_string(x.start) + "," + std::to_string(x.end) +
                           ") and (" + std::to_string(y.start) + "," + std::to_string(y.end) +
                           ") cross");
      }
    }
  }
  Span whole{1, n};
  if (m[whole].is_nosem() && !labeled.empty())
    throw ArityError("root span must be labeled when the tree has constituents");
  return detail::build_from_map(m, labeled, whole, true, allow_ternary);
}

inline void collect_labeled(const SpanTree& t, std::set<std::pair<Span, Category>>& out) {
  if (!t.category.is_nosem()) out.emplace(t.span, t.category);
  for (const auto& c : t.children) collect_labeled(c, out);
}

// (span, category) pairs of every node that is not NoSem.
inline std::set<std::pair<Span, Category>> labeled_spans(const SpanTree& t) {
  std::set<std::pair<Span, Category>> out;
  collect_labeled(t, out);
  return out;
}

namespace detail {

inline std::optional<std::string> violation(const SpanTree& t, bool root, bool allow_ternary) {
  auto where = [&] {
    return "(" + std::to_string(t.span.start) + "," + std::to_string(t.span.end) + ")";
  };
  if (t.span.start < 1 || t.span.end < t.span.start) return "malformed span " + where();
  if (t.is_root != root) return "root flag misplaced at " + where();
  if (t.children.empty()) {
    if (t.category.is_join()) return "Join leaf at " + where();
    return std::nullopt;
  }
  if (!t.category.is_join()) return "non-Join internal node at " + where();
  int pos = t.span.start;
  for (const auto& c : t.children) {
    if (c.span.start != pos) return "children do not partition " + where();
    pos = c.span.end + 1;
  }
  if (pos != t.span.end + 1) return "children do not partition " + where();

  std::vector<bool> sem;
  for (const auto& c : t.children) sem.push_back(!c.category.is_nosem());
  bool ok = false;
  if (sem.size() == 2) {
    ok = (sem[0] && sem[1]) || (sem[0] && !sem[1]) || (root && !sem[0] && sem[1]);
  } else if (sem.size() == 3) {
    ok = allow_ternary && sem[0] && sem[1] && sem[2];
  }
  if (!ok) return "no grammar rule matches the children of " + where();
  for (const auto& c : t.children)
    if (auto v = violation(c, false, allow_ternary)) return v;
  return std::nullopt;
}

}  // namespace detail

// Returns a description of the first grammar violation, or nullopt for a
// legal tree. A lone NoSem leaf is accepted as the degenerate empty tree.
inline std::optional<std::string> grammar_violation(const SpanTree& t, bool allow_ternary) {
  if (t.span.start != 1) return std::string("root span must start at 1");
  return detail::violation(t, true, allow_ternary);
}

}  // namespace spanparse
