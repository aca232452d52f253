#pragma once

// K-best CKY over the span-tree grammar
//
//   S    -> Join Join | NoSem Join
//   Join -> Join Join | Join NoSem | Join Join Join (optional ternary rule)
//
// where a Join item is either a domain-constant leaf or a composition. Tree
// scores are sums of shifted scores, so NoSem spans contribute nothing.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "spanparse/core.hpp"
#include "spanparse/scorer.hpp"
#include "spanparse/typesys.hpp"

namespace spanparse {

class EmptyInput : public Error {
 public:
  using Error::Error;
};

struct Grammar {
  bool ternary = false;
};

struct Derivation {
  enum class Kind : std::uint8_t {
    Leaf,        // domain constant over the whole span
    JoinJoin,    // Join -> Join Join
    JoinNoSem,   // Join -> Join NoSem
    Ternary,     // Join -> Join Join Join
    NoSemJoin,   // S -> NoSem Join (root only)
    FromJoin,    // root entry that reuses a Join derivation of the full span
  };

  double score = 0;
  Kind kind = Kind::Leaf;
  ConstantId constant = kHole;
  int split1 = 0;  // last token of the first child
  int split2 = 0;  // last token of the middle child (ternary)
  std::array<int, 3> rank{0, 0, 0};
};

struct Chart {
  int n = 0;
  int k = 0;
  Grammar grammar;
  SpanTable<std::vector<Derivation>> join;  // pi(i, j, Join)
  std::vector<Derivation> root;             // pi(1, n, S)
  std::uint64_t combinations = 0;           // (rule, split) combinations considered
};

namespace detail {

struct Candidate {
  double score;
  int gen;
  std::array<int, 3> rank;
};

struct CandidateOrder {
  bool operator()(const Candidate& a, const Candidate& b) const {
    if (a.score != b.score) return a.score < b.score;
    if (a.gen != b.gen) return a.gen > b.gen;
    return a.rank > b.rank;
  }
};

// A generator enumerates the scores of one (rule, split) combination over
// the ranked child lists; the lattice is explored lazily from (0,0,0).
struct Generator {
  Derivation::Kind kind;
  int split1 = 0, split2 = 0;
  double base = 0;
  std::array<const std::vector<Derivation>*, 3> lists{nullptr, nullptr, nullptr};
  std::vector<std::pair<double, ConstantId>> leaves;  // for Kind::Leaf
  int dims = 1;

  int extent(int d) const {
    if (kind == Derivation::Kind::Leaf) return static_cast<int>(leaves.size());
    return static_cast<int>(lists[d]->size());
  }
  double score(const std::array<int, 3>& r) const {
    if (kind == Derivation::Kind::Leaf) return leaves[r[0]].first;
    double s = base;
    for (int d = 0; d < dims; ++d) s += (*lists[d])[r[d]].score;
    return s;
  }
};

inline std::vector<Derivation> kbest_merge(const std::vector<Generator>& gens, int k) {
  std::priority_queue<Candidate, std::vector<Candidate>, CandidateOrder> heap;
  std::set<std::pair<int, std::array<int, 3>>> seen;
  for (int g = 0; g < static_cast<int>(gens.size()); ++g) {
    bool empty = false;
    for (int d = 0; d < gens[g].dims; ++d) empty |= gens[g].extent(d) == 0;
    if (empty) continue;
    std::array<int, 3> r{0, 0, 0};
    heap.push({gens[g].score(r), g, r});
    seen.insert({g, r});
  }
  std::vector<Derivation> out;
  while (!heap.empty() && static_cast<int>(out.size()) < k) {
    Candidate c = heap.top();
    heap.pop();
    const Generator& g = gens[c.gen];
    Derivation d;
    d.score = c.score;
    d.kind = g.kind;
    d.split1 = g.split1;
    d.split2 = g.split2;
    if (g.kind == Derivation::Kind::Leaf) {
      d.constant = g.leaves[c.rank[0]].second;
    } else {
      d.rank = c.rank;
    }
    out.push_back(d);
    for (int dim = 0; dim < g.dims; ++dim) {
      std::array<int, 3> r = c.rank;
      if (++r[dim] >= g.extent(dim)) continue;
      if (seen.insert({c.gen, r}).second) heap.push({g.score(r), c.gen, r});
    }
  }
  return out;
}

}  // namespace detail

// Fills pi(i, j, Join) for every span and pi(1, n, S), keeping the top k
// derivations per entry.
inline Chart cky_chart(const ScoreTable& table, const Grammar& grammar, int k) {
  const int n = table.length();
  if (n == 0) throw EmptyInput("cannot parse an empty utterance");
  if (k < 1) throw Error("beam size must be positive");
  Chart chart;
  chart.n = n;
  chart.k = k;
  chart.grammar = grammar;
  chart.join = SpanTable<std::vector<Derivation>>(n, {});
  const int categories = table.categories();
  const int join_index = Category::join().index();
  using Kind = Derivation::Kind;

  for (int len = 1; len <= n; ++len) {
    for (int i = 1; i + len - 1 <= n; ++i) {
      const int j = i + len - 1;
      std::vector<detail::Generator> gens;

      detail::Generator leaf;
      leaf.kind = Kind::Leaf;
      for (int c = 2; c < categories; ++c) {
        double s = table.shifted({i, j}, c);
        if (!is_masked(s)) leaf.leaves.emplace_back(s, c - 2);
      }
      std::stable_sort(leaf.leaves.begin(), leaf.leaves.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      if (static_cast<int>(leaf.leaves.size()) > k) leaf.leaves.resize(k);
      gens.push_back(std::move(leaf));

      const double base = table.shifted({i, j}, join_index);
      if (!is_masked(base)) {
        for (int s = i; s < j; ++s) {
          const auto& left = chart.join(i, s);
          const auto& right = chart.join(s + 1, j);
          if (left.empty()) continue;
          if (!right.empty()) {
            detail::Generator g;
            g.kind = Kind::JoinJoin;
            g.split1 = s;
            g.base = base;
            g.lists = {&left, &right, nullptr};
            g.dims = 2;
            gens.push_back(g);
            ++chart.combinations;
          }
          detail::Generator g;
          g.kind = Kind::JoinNoSem;
          g.split1 = s;
          g.base = base;
          g.lists = {&left, nullptr, nullptr};
          g.dims = 1;
          gens.push_back(g);
          ++chart.combinations;
        }
        if (grammar.ternary) {
          for (int s1 = i; s1 + 1 < j; ++s1) {
            for (int s2 = s1 + 1; s2 < j; ++s2) {
              const auto& a = chart.join(i, s1);
              const auto& b = chart.join(s1 + 1, s2);
              const auto& c = chart.join(s2 + 1, j);
              if (a.empty() || b.empty() || c.empty()) continue;
              detail::Generator g;
              g.kind = Kind::Ternary;
              g.split1 = s1;
              g.split2 = s2;
              g.base = base;
              g.lists = {&a, &b, &c};
              g.dims = 3;
              gens.push_back(g);
              ++chart.combinations;
            }
          }
        }
      }
      chart.join(i, j) = detail::kbest_merge(gens, k);
    }
  }

  // Root: every Join derivation of the full span, plus S -> NoSem Join.
  std::vector<detail::Generator> gens;
  detail::Generator whole;
  whole.kind = Kind::FromJoin;
  whole.lists = {&chart.join(1, n), nullptr, nullptr};
  gens.push_back(whole);
  const double base = table.shifted({1, n}, join_index);
  if (!is_masked(base)) {
    for (int s = 1; s < n; ++s) {
      if (chart.join(s + 1, n).empty()) continue;
      detail::Generator g;
      g.kind = Kind::NoSemJoin;
      g.split1 = s;
      g.base = base;
      g.lists = {&chart.join(s + 1, n), nullptr, nullptr};
      gens.push_back(g);
      ++chart.combinations;
    }
  }
  chart.root = detail::kbest_merge(gens, k);
  return chart;
}

namespace detail {

inline SpanTree build_join(const Chart& ch, int i, int j, int rank);

inline SpanTree build(const Chart& ch, int i, int j, const Derivation& d) {
  using Kind = Derivation::Kind;
  switch (d.kind) {
    case Kind::Leaf:
      return SpanTree::leaf({i, j}, Category::of(d.constant));
    case Kind::JoinJoin:
      return SpanTree::join({build_join(ch, i, d.split1, d.rank[0]), build_join(ch, d.split1 + 1, j, d.rank[1])});
    case Kind::JoinNoSem:
      return SpanTree::join({build_join(ch, i, d.split1, d.rank[0]),
                             SpanTree::leaf({d.split1 + 1, j}, Category::nosem())});
    case Kind::Ternary:
      return SpanTree::join({build_join(ch, i, d.split1, d.rank[0]),
                             build_join(ch, d.split1 + 1, d.split2, d.rank[1]),
                             build_join(ch, d.split2 + 1, j, d.rank[2])});
    case Kind::NoSemJoin:
      return SpanTree::join({SpanTree::leaf({i, d.split1}, Category::nosem()),
                             build_join(ch, d.split1 + 1, j, d.rank[0])});
    case Kind::FromJoin:
      return build_join(ch, i, j, d.rank[0]);
  }
  throw Error("corrupt derivation");
}

inline SpanTree build_join(const Chart& ch, int i, int j, int rank) { return build(ch, i, j, ch.join(i, j)[rank]); }

}  // namespace detail

struct ScoredTree {
  SpanTree tree;
  double score = 0;
};

inline std::vector<ScoredTree> kbest_trees(const Chart& chart) {
  std::vector<ScoredTree> out;
  for (const auto& d : chart.root) {
    SpanTree t = detail::build(chart, 1, chart.n, d);
    t.is_root = true;
    out.push_back({std::move(t), d.score});
  }
  return out;
}

// Top-k trees rooted in S over the whole utterance, best first.
inline std::vector<ScoredTree> parse_kbest(const ScoreTable& table, const Grammar& grammar, int k) {
  return kbest_trees(cky_chart(table, grammar, k));
}

// S(T): sum of shifted scores over every labeled span of the tree.
inline double tree_score(const ScoreTable& table, const SpanTree& t) {
  double s = 0;
  for (const auto& [span, cat] : labeled_spans(t)) s += table.shifted(span, cat);
  return s;
}

// First candidate (in the given order) whose program type-checks, annotated
// with its sub-programs; nullopt means no valid tree.
inline std::optional<ScoredTree> best_valid_tree(const std::vector<ScoredTree>& candidates,
                                                 const DomainSchema& schema) {
  for (const auto& c : candidates) {
    if (auto t = annotate_programs(c.tree, schema)) return ScoredTree{std::move(*t), c.score};
  }
  return std::nullopt;
}

inline json chart_to_json(const Chart& chart, const DomainSchema& schema) {
  static const char* kinds[] = {"leaf", "join_join", "join_nosem", "ternary", "nosem_join", "from_join"};
  auto derivs = [&](const std::vector<Derivation>& ds) {
    json a = json::array();
    for (const auto& d : ds) {
      json o = {{"score", d.score}, {"rule", kinds[static_cast<int>(d.kind)]}};
      if (d.kind == Derivation::Kind::Leaf) {
        o["constant"] = schema.constant(d.constant).name;
      } else {
        o["split"] = d.kind == Derivation::Kind::Ternary ? json{d.split1, d.split2} : json{d.split1};
        o["ranks"] = d.rank;
      }
      a.push_back(o);
    }
    return a;
  };
  json cells = json::array();
  for_each_span(chart.n, [&](Span s) { cells.push_back({{"span", {s.start, s.end}}, {"join", derivs(chart.join[s])}}); });
  return {{"length", chart.n},
          {"k", chart.k},
          {"ternary", chart.grammar.ternary},
          {"combinations", chart.combinations},
          {"cells", cells},
          {"root", derivs(chart.root)}};
}

// ---------------------------------------------------------------------------
// Constrained parsing for training

// Every subterm of z together with each partial application obtained by
// emptying any subset of a node's filled argument slots, e.g. for
// turn(l,op): turn, turn(l), turn(.,op) and turn(l,op).
inline std::vector<Program> partial_subterms(const Program& z) {
  std::vector<Program> out;
  std::vector<const Program*> stack{&z};
  while (!stack.empty()) {
    const Program* p = stack.back();
    stack.pop_back();
    if (p->is_hole()) continue;
    std::vector<std::size_t> filled;
    for (std::size_t k = 0; k < p->args.size(); ++k)
      if (!p->args[k].is_hole()) filled.push_back(k);
    for (std::uint32_t mask = 0; mask < (1u << filled.size()); ++mask) {
      Program q(p->head, p->args.size());
      for (std::size_t b = 0; b < filled.size(); ++b)
        if (mask & (1u << b)) q.args[filled[b]] = p->args[filled[b]];
      if (std::find(out.begin(), out.end(), q) == out.end()) out.push_back(std::move(q));
    }
    for (const auto& a : p->args) stack.push_back(&a);
  }
  return out;
}

namespace detail {

struct TrackedItem {
  double score;
  int program;
  Derivation::Kind kind;
  ConstantId constant = kHole;
  int split1 = 0, split2 = 0;
  std::array<int, 3> child{-1, -1, -1};  // indices into the child cells' item lists
};

inline SpanTree build_tracked(const SpanTable<std::vector<TrackedItem>>& cells, int i, int j, const TrackedItem& it) {
  using Kind = Derivation::Kind;
  auto sub = [&](int a, int b, int idx) { return build_tracked(cells, a, b, cells(a, b)[idx]); };
  switch (it.kind) {
    case Kind::Leaf:
      return SpanTree::leaf({i, j}, Category::of(it.constant));
    case Kind::JoinJoin:
      return SpanTree::join({sub(i, it.split1, it.child[0]), sub(it.split1 + 1, j, it.child[1])});
    case Kind::JoinNoSem:
      return SpanTree::join({sub(i, it.split1, it.child[0]), SpanTree::leaf({it.split1 + 1, j}, Category::nosem())});
    case Kind::Ternary:
      return SpanTree::join({sub(i, it.split1, it.child[0]), sub(it.split1 + 1, it.split2, it.child[1]),
                             sub(it.split2 + 1, j, it.child[2])});
    case Kind::NoSemJoin:
      return SpanTree::join({SpanTree::leaf({i, it.split1}, Category::nosem()), sub(it.split1 + 1, j, it.child[0])});
    case Kind::FromJoin:
      return sub(i, j, it.child[0]);
  }
  throw Error("corrupt derivation");
}

// Keeps at most k items per program, best first.
inline void prune_per_program(std::vector<TrackedItem>& items, int k) {
  std::stable_sort(items.begin(), items.end(), [](const TrackedItem& a, const TrackedItem& b) { return a.score > b.score; });
  std::unordered_map<int, int> kept;
  std::vector<TrackedItem> out;
  for (auto& it : items)
    if (kept[it.program]++ < k) out.push_back(it);
  items = std::move(out);
}

}  // namespace detail

// Highest-scoring tree whose program is exactly `gold`, or nullopt.
//
// Constants outside gold are masked; a composition is admitted only when its
// result is a partial subterm of gold. Derivations are tracked per
// sub-program, keeping the k best per (span, program); because the
// admissible programs form a finite set this search is exact for the top tree.
// Leaf constants never exceed their multiplicity in gold: every leaf ends up
// inside the composed program, which is itself a subterm of gold.
inline std::optional<ScoredTree> constrained_parse(const ScoreTable& table, const Grammar& grammar,
                                                   const Program& gold, const DomainSchema& schema, int k) {
  const int n = table.length();
  if (n == 0) throw EmptyInput("cannot parse an empty utterance");
  if (k < 1) throw Error("beam size must be positive");
  using Kind = Derivation::Kind;

  std::vector<Program> progs = partial_subterms(gold);
  std::map<std::string, int> key;
  for (int p = 0; p < static_cast<int>(progs.size()); ++p) key[to_string(progs[p], schema)] = p;
  const int P = static_cast<int>(progs.size());
  std::vector<int> comp(static_cast<std::size_t>(P) * P, -1);
  for (int a = 0; a < P; ++a) {
    for (int b = 0; b < P; ++b) {
      if (auto r = compose(progs[a], progs[b], schema)) {
        auto it = key.find(to_string(*r, schema));
        if (it != key.end()) comp[static_cast<std::size_t>(a) * P + b] = it->second;
      }
    }
  }
  auto compose_id = [&](int a, int b) { return comp[static_cast<std::size_t>(a) * P + b]; };

  std::vector<bool> complete(P, false);
  for (int p = 0; p < P; ++p) {
    auto closed = close_program(progs[p], schema);
    complete[p] = closed && *closed == gold;
  }
  std::vector<std::pair<ConstantId, int>> leaves;  // constant, program id
  for (int p = 0; p < P; ++p) {
    const Program& q = progs[p];
    bool bare = std::all_of(q.args.begin(), q.args.end(), [](const Program& a) { return a.is_hole(); });
    if (bare) leaves.emplace_back(q.head, p);
  }

  SpanTable<std::vector<detail::TrackedItem>> cells(n, {});
  const int join_index = Category::join().index();
  for (int len = 1; len <= n; ++len) {
    for (int i = 1; i + len - 1 <= n; ++i) {
      const int j = i + len - 1;
      std::vector<detail::TrackedItem> items;
      for (const auto& [c, p] : leaves) {
        double s = table.shifted({i, j}, Category::of(c));
        if (!is_masked(s)) items.push_back({s, p, Kind::Leaf, c});
      }
      const double base = table.shifted({i, j}, join_index);
      if (!is_masked(base)) {
        for (int s = i; s < j; ++s) {
          const auto& left = cells(i, s);
          const auto& right = cells(s + 1, j);
          for (int a = 0; a < static_cast<int>(left.size()); ++a) {
            detail::TrackedItem copy{base + left[a].score, left[a].program, Kind::JoinNoSem};
            copy.split1 = s;
            copy.child[0] = a;
            items.push_back(copy);
            for (int b = 0; b < static_cast<int>(right.size()); ++b) {
              int p = compose_id(left[a].program, right[b].program);
              if (p < 0) continue;
              detail::TrackedItem it{base + left[a].score + right[b].score, p, Kind::JoinJoin};
              it.split1 = s;
              it.child = {a, b, -1};
              items.push_back(it);
            }
          }
        }
        if (grammar.ternary) {
          for (int s1 = i; s1 + 1 < j; ++s1) {
            for (int s2 = s1 + 1; s2 < j; ++s2) {
              const auto& A = cells(i, s1);
              const auto& B = cells(s1 + 1, s2);
              const auto& C = cells(s2 + 1, j);
              for (int a = 0; a < static_cast<int>(A.size()); ++a) {
                for (int c = 0; c < static_cast<int>(C.size()); ++c) {
                  int outer = compose_id(A[a].program, C[c].program);
                  if (outer < 0) continue;
                  for (int b = 0; b < static_cast<int>(B.size()); ++b) {
                    int p = compose_id(outer, B[b].program);
                    if (p < 0) continue;
                    detail::TrackedItem it{base + A[a].score + B[b].score + C[c].score, p, Kind::Ternary};
                    it.split1 = s1;
                    it.split2 = s2;
                    it.child = {a, b, c};
                    items.push_back(it);
                  }
                }
              }
            }
          }
        }
      }
      detail::prune_per_program(items, k);
      cells(i, j) = std::move(items);
    }
  }

  std::vector<detail::TrackedItem> roots;
  const auto& whole = cells(1, n);
  for (int r = 0; r < static_cast<int>(whole.size()); ++r) {
    if (!complete[whole[r].program]) continue;
    detail::TrackedItem it{whole[r].score, whole[r].program, Kind::FromJoin};
    it.child[0] = r;
    roots.push_back(it);
  }
  const double base = table.shifted({1, n}, join_index);
  if (!is_masked(base)) {
    for (int s = 1; s < n; ++s) {
      const auto& right = cells(s + 1, n);
      for (int r = 0; r < static_cast<int>(right.size()); ++r) {
        if (!complete[right[r].program]) continue;
        detail::TrackedItem it{base + right[r].score, right[r].program, Kind::NoSemJoin};
        it.split1 = s;
        it.child[0] = r;
        roots.push_back(it);
      }
    }
  }
  if (roots.empty()) return std::nullopt;
  auto best = std::max_element(roots.begin(), roots.end(), [](const auto& a, const auto& b) { return a.score < b.score; });
  SpanTree t = detail::build_tracked(cells, 1, n, *best);
  t.is_root = true;
  return ScoredTree{std::move(t), best->score};
}

}  // namespace spanparse
