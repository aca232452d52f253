#pragma once

// Train/dev/test partitions. Every function returns a partition of its
// input: each example lands in exactly one of the three lists.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "spanparse/data/dataset.hpp"

namespace spanparse {

enum class SplitKind { Iid, Template, Length, Right, AroundRight };

inline SplitKind parse_split_kind(const std::string& s) {
  if (s == "iid") return SplitKind::Iid;
  if (s == "template") return SplitKind::Template;
  if (s == "length") return SplitKind::Length;
  if (s == "right") return SplitKind::Right;
  if (s == "aroundright" || s == "aroundRight" || s == "around-right") return SplitKind::AroundRight;
  throw DatasetError("unknown split kind " + s);
}

inline std::string split_name(SplitKind k) {
  switch (k) {
    case SplitKind::Iid: return "iid";
    case SplitKind::Template: return "template";
    case SplitKind::Length: return "length";
    case SplitKind::Right: return "right";
    case SplitKind::AroundRight: return "aroundright";
  }
  return "?";
}

struct Partition {
  std::vector<Example> train, dev, test;
};

namespace detail {

inline Partition gather(const std::vector<Example>& xs, const std::vector<int>& part) {
  Partition p;
  for (std::size_t k = 0; k < xs.size(); ++k) (part[k] == 0 ? p.train : part[k] == 1 ? p.dev : p.test).push_back(xs[k]);
  return p;
}

// Moves floor(frac * |pool|) randomly chosen pool members to partition 1.
inline void carve_dev(std::vector<int>& part, std::vector<int> pool, double frac, Rng& rng) {
  shuffle(pool, rng);
  const auto n = static_cast<std::size_t>(std::floor(frac * static_cast<double>(pool.size())));
  for (std::size_t k = 0; k < n; ++k) part[pool[k]] = 1;
}

}  // namespace detail

// Random: round(test_frac * N) to test, then floor(dev_frac) of the rest to dev.
inline Partition split_iid(const std::vector<Example>& xs, std::uint64_t seed, double test_frac = 0.2,
                           double dev_frac = 0.2) {
  Rng rng(seed);
  std::vector<int> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  const auto n_test = static_cast<std::size_t>(std::lround(test_frac * static_cast<double>(xs.size())));
  std::vector<int> part(xs.size(), 0);
  for (std::size_t k = 0; k < n_test; ++k) part[order[k]] = 2;
  detail::carve_dev(part, std::vector<int>(order.begin() + static_cast<long>(n_test), order.end()), dev_frac, rng);
  return detail::gather(xs, part);
}

// Program with every anonymizable entity replaced by its type.
inline std::string program_template(const Program& z, const DomainSchema& s) { return to_string(z, s, true); }

// Whole template groups go to one partition. Groups are visited largest
// first (random order among equal sizes) and each goes where the gap to the
// iid target size is largest.
inline Partition split_template(const std::vector<Example>& xs, const DomainSchema& s, std::uint64_t seed,
                                double test_frac = 0.2, double dev_frac = 0.2) {
  std::map<std::string, std::vector<int>> groups;
  for (std::size_t k = 0; k < xs.size(); ++k) groups[program_template(xs[k].program, s)].push_back(static_cast<int>(k));
  std::vector<std::vector<int>> gs;
  for (auto& [t, members] : groups) gs.push_back(std::move(members));
  Rng rng(seed);
  shuffle(gs, rng);
  std::stable_sort(gs.begin(), gs.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });

  const double n = static_cast<double>(xs.size());
  const double n_test = std::round(test_frac * n);
  const double n_dev = std::floor(dev_frac * (n - n_test));
  const double target[3] = {n - n_test - n_dev, n_dev, n_test};
  double have[3] = {0, 0, 0};
  std::vector<int> part(xs.size(), 0);
  for (const auto& g : gs) {
    int best = 0;
    for (int p = 1; p < 3; ++p)
      if (target[p] - have[p] > target[best] - have[best]) best = p;
    for (int k : g) part[k] = best;
    have[best] += static_cast<double>(g.size());
  }
  return detail::gather(xs, part);
}

// Tokens of the printed program: names (an entity with its payload counts
// once), parentheses and commas.
inline int program_length(const Program& z, const DomainSchema& s) {
  if (z.is_hole()) return 1;
  const auto& c = s.constant(z.head);
  if (c.is_entity()) return 1;
  std::size_t last = z.args.size();
  while (last > 0 && z.args[last - 1].is_hole()) --last;
  if (last == 0) return 1;
  int n = 3 + static_cast<int>(last) - 1;
  for (std::size_t k = 0; k < last; ++k) n += program_length(z.args[k], s);
  return n;
}

// The longest round(test_frac * N) programs go to test; dev_frac of the
// remainder goes to dev at random.
inline Partition split_length(const std::vector<Example>& xs, const DomainSchema& s, std::uint64_t seed,
                              double test_frac = 280.0 / 880.0, double dev_frac = 0.1) {
  std::vector<int> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> len(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) len[k] = program_length(xs[k].program, s);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return len[a] > len[b]; });
  const auto n_test = static_cast<std::size_t>(std::lround(test_frac * static_cast<double>(xs.size())));
  std::vector<int> part(xs.size(), 0);
  for (std::size_t k = 0; k < n_test; ++k) part[order[k]] = 2;
  std::vector<int> pool(order.begin() + static_cast<long>(n_test), order.end());
  std::sort(pool.begin(), pool.end());
  Rng rng(seed);
  detail::carve_dev(part, pool, dev_frac, rng);
  return detail::gather(xs, part);
}

// RIGHT: test holds every command using "right" except the bare primitive
// "turn right", which is kept in train (never sampled for dev).
// AROUNDRIGHT: test holds every command containing "around right".
// dev_frac of the remaining pool goes to dev.
inline Partition split_scan_primitive(const std::vector<Example>& xs, SplitKind kind, std::uint64_t seed,
                                      double dev_frac = 0.2) {
  if (kind != SplitKind::Right && kind != SplitKind::AroundRight)
    throw DatasetError("primitive split must be right or aroundright");
  std::vector<int> part(xs.size(), 0);
  std::vector<int> pool;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto& t = xs[k].utterance.tokens;
    bool held_out = false;
    bool pinned = false;
    if (kind == SplitKind::Right) {
      pinned = t.size() == 2 && t[0] == "turn" && t[1] == "right";
      held_out = !pinned && std::find(t.begin(), t.end(), "right") != t.end();
    } else {
      for (std::size_t w = 0; w + 1 < t.size(); ++w)
        if (t[w] == "around" && t[w + 1] == "right") held_out = true;
    }
    if (held_out) part[k] = 2;
    else if (!pinned) pool.push_back(static_cast<int>(k));
  }
  Rng rng(seed);
  detail::carve_dev(part, pool, dev_frac, rng);
  return detail::gather(xs, part);
}

inline Partition make_split(const std::vector<Example>& xs, const DomainSchema& s, SplitKind kind, std::uint64_t seed) {
  switch (kind) {
    case SplitKind::Iid: return split_iid(xs, seed);
    case SplitKind::Template: return split_template(xs, s, seed);
    case SplitKind::Length: return split_length(xs, s, seed);
    case SplitKind::Right:
    case SplitKind::AroundRight: return split_scan_primitive(xs, kind, seed);
  }
  return {};
}

}  // namespace spanparse
