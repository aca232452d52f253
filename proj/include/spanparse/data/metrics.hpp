#pragma once

#include <optional>
#include <vector>

#include "spanparse/data/executor.hpp"

namespace spanparse {

// Execution failures of a prediction count as wrong; a gold program that
// fails to execute is an error in the data.
inline bool same_denotation(const std::optional<Program>& pred, const Program& gold, const Executor& exec) {
  if (!pred) return false;
  Denotation g = exec.execute(gold);
  try {
    return exec.execute(*pred) == g;
  } catch (const ExecError&) {
    return false;
  }
}

inline double denotation_accuracy(const std::vector<std::optional<Program>>& predictions,
                                  const std::vector<Program>& golds, const Executor& exec) {
  if (predictions.size() != golds.size()) throw Error("prediction and gold counts differ");
  if (golds.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t k = 0; k < golds.size(); ++k) hit += same_denotation(predictions[k], golds[k], exec);
  return static_cast<double>(hit) / static_cast<double>(golds.size());
}

struct SpanCounts {
  std::size_t matched = 0, predicted = 0, gold = 0;

  SpanCounts& operator+=(const SpanCounts& o) {
    matched += o.matched;
    predicted += o.predicted;
    gold += o.gold;
    return *this;
  }
  // Two empty sets agree perfectly.
  double f1() const {
    if (predicted == 0 && gold == 0) return 1.0;
    if (matched == 0) return 0.0;
    double p = static_cast<double>(matched) / static_cast<double>(predicted);
    double r = static_cast<double>(matched) / static_cast<double>(gold);
    return 2 * p * r / (p + r);
  }
};

// Labeled spans exclude NoSem; a missing prediction contributes only gold spans.
inline SpanCounts span_counts(const std::optional<SpanTree>& pred, const SpanTree& gold) {
  auto g = labeled_spans(gold);
  SpanCounts c;
  c.gold = g.size();
  if (!pred) return c;
  auto p = labeled_spans(*pred);
  c.predicted = p.size();
  for (const auto& x : p) c.matched += g.count(x);
  return c;
}

inline double labeled_span_f1(const SpanTree& pred, const SpanTree& gold) { return span_counts(pred, gold).f1(); }

}  // namespace spanparse
