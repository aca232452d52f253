#pragma once

// Hard-EM training: the E-step finds the best tree whose program is the gold
// program under the current scores; the M-step is one gradient step on the
// span-tree loss of those trees.

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "spanparse/cky.hpp"
#include "spanparse/data/dataset.hpp"
#include "spanparse/data/metrics.hpp"
#include "spanparse/model.hpp"
#include "spanparse/scorer.hpp"

namespace spanparse {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 5;
  int max_epochs = 30;
  int patience = 4;        // epochs without dev improvement before stopping
  int beam = 5;            // K
  double lambda = 20.0;    // lexicon feature weight
  int hidden = 250;
  EncoderConfig encoder;
  std::uint64_t seed = 1;
  bool ternary = false;
  bool gold_trees = false;  // supervised: use the example's tree, skip the E-step
  bool no_lexicon = false;  // drop manual lexicon entries; entity entries stay
  int dev_limit = 0;        // evaluate on the first dev_limit dev examples (0 = all)
  double word_dropout = 0.0;  // training-time probability of replacing a token id by UNK

  void validate() const {
    if (!(learning_rate > 0)) throw ConfigError("learning rate must be positive");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (max_epochs < 0) throw ConfigError("epochs must be non-negative");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (beam < 1) throw ConfigError("beam must be at least 1");
    if (lambda < 0) throw ConfigError("lambda must be non-negative");
    if (hidden < 1 || encoder.dim < 1 || encoder.layers < 0 || encoder.window < 0)
      throw ConfigError("model sizes must be positive");
    if (dev_limit < 0) throw ConfigError("dev limit must be non-negative");
    if (word_dropout < 0 || word_dropout >= 1) throw ConfigError("word dropout must be in [0, 1)");
  }

  json to_json() const {
    return {{"learning_rate", learning_rate}, {"batch_size", batch_size}, {"max_epochs", max_epochs},
            {"patience", patience},           {"beam", beam},             {"lambda", lambda},
            {"hidden", hidden},               {"dim", encoder.dim},       {"layers", encoder.layers},
            {"window", encoder.window},       {"residual", encoder.residual}, {"seed", seed},             {"ternary", ternary},
            {"gold_trees", gold_trees},       {"no_lexicon", no_lexicon}, {"dev_limit", dev_limit},
            {"word_dropout", word_dropout}};
  }
};

struct StepStats {
  double loss = 0;  // summed per-example loss, each normalized by its span count
  int used = 0;
  int skipped = 0;  // no tree realizes the gold program
};

// Target tree for one example, or nothing when the example must be skipped.
inline std::optional<SpanTree> target_tree(const Example& ex, const ScoreTable& table, const Model& m,
                                           bool gold_trees) {
  if (gold_trees) return ex.tree;
  auto t = constrained_parse(table, m.grammar, ex.program, m.schema, m.beam);
  if (!t) return std::nullopt;
  return t->tree;
}

// Accumulates into `grads` the gradient of the mean (over used examples) of
// span-normalized tree losses.
// With `dropout`, token ids are replaced by UNK before scoring; the lexicon
// feature still sees the words.
inline StepStats hard_em_step(const std::vector<const Example*>& batch, const Model& m, bool gold_trees,
                              Parameters& grads, double word_dropout = 0.0, Rng* rng = nullptr) {
  StepStats st;
  std::vector<std::pair<ScoreTrace, SpanTree>> work;
  for (const Example* ex : batch) {
    if (ex->utterance.size() == 0) {
      ++st.skipped;
      continue;
    }
    std::vector<int> ids = m.params.enc.vocab.ids(ex->utterance);
    if (rng && word_dropout > 0)
      for (auto& id : ids)
        if (rng->uniform() < word_dropout) id = Vocab::kUnk;
    ScoreTrace tr = score_ids(ex->utterance, ids, m.params.enc, m.params.cls, m.lexicon);
    auto tree = target_tree(*ex, tr.table, m, gold_trees);
    if (!tree) {
      ++st.skipped;
      continue;
    }
    work.emplace_back(std::move(tr), std::move(*tree));
  }
  st.used = static_cast<int>(work.size());
  for (const auto& [tr, tree] : work) {
    const double spans = tr.table.span_count();
    st.loss += tree_loss(tr.table, tree) / spans;
    backward(tr, tree_loss_gradient(tr.table, tree, 1.0 / (spans * st.used)), m.params, grads);
  }
  return st;
}

struct Prediction {
  std::optional<Program> program;
  std::optional<SpanTree> tree;
};

inline Prediction predict(const Model& m, const Utterance& u) {
  if (u.size() == 0) return {};
  ParseResult r = parse(m, u);
  if (!r.best) return {};
  return {r.program, r.best->tree};
}

inline double dev_accuracy(const Model& m, const std::vector<Example>& dev, const Executor& exec, int limit = 0) {
  const std::size_t n = limit > 0 ? std::min<std::size_t>(dev.size(), static_cast<std::size_t>(limit)) : dev.size();
  if (n == 0) return 0.0;
  std::size_t hit = 0;
  for (std::size_t k = 0; k < n; ++k) hit += same_denotation(predict(m, dev[k].utterance).program, dev[k].program, exec);
  return static_cast<double>(hit) / static_cast<double>(n);
}

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0;  // mean over used examples
  int skipped = 0;
  double dev_accuracy = 0;

  json to_json() const {
    return {{"epoch", epoch}, {"train_loss", train_loss}, {"skipped", skipped}, {"dev_denotation_acc", dev_accuracy}};
  }
};

struct TrainResult {
  Model model;  // parameters from the epoch with the best dev accuracy
  std::vector<EpochMetrics> log;
  int best_epoch = 0;
};

// Untrained model for a domain: vocabulary from the training utterances,
// lexicon reduced to entity entries under no_lexicon.
inline Model initial_model(const std::vector<Example>& train, const DomainSchema& schema, const Lexicon& lexicon,
                           const std::optional<geo::GeoKb>& kb, const TrainConfig& cfg) {
  cfg.validate();
  Model m;
  m.schema = schema;
  m.lexicon = cfg.no_lexicon ? lexicon.without_manual() : lexicon;
  m.grammar.ternary = cfg.ternary;
  m.beam = cfg.beam;
  m.kb = kb;
  m.config = cfg.to_json();
  Vocab vocab;
  for (const auto& ex : train)
    for (const auto& t : ex.utterance.tokens) vocab.add(t);
  m.params = init_parameters(vocab, schema.category_count(), cfg.encoder, cfg.hidden, cfg.lambda, cfg.seed);
  return m;
}

// Epoch 0 in the log is the untrained model. Training stops after `patience`
// epochs without a strict dev improvement, or once dev accuracy is perfect.
inline TrainResult train(const std::vector<Example>& train_set, const std::vector<Example>& dev_set, Model model,
                         const TrainConfig& cfg, const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
  cfg.validate();
  if (cfg.gold_trees) {
    for (const auto& ex : train_set)
      if (!ex.tree) throw ConfigError("gold-tree training needs a tree for every training example");
  }
  auto exec = make_executor(model.schema, model.kb);
  TrainResult res;
  auto evaluate = [&](int epoch, double loss, int skipped) {
    EpochMetrics em{epoch, loss, skipped, dev_accuracy(model, dev_set, *exec, cfg.dev_limit)};
    res.log.push_back(em);
    if (on_epoch) on_epoch(em);
    return em.dev_accuracy;
  };

  double best = evaluate(0, 0.0, 0);
  res.model = model;
  Adam adam(model.params);
  Rng rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<int> order(train_set.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
  int stale = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs && best < 1.0 && stale < cfg.patience; ++epoch) {
    shuffle(order, rng);
    double loss = 0;
    int used = 0, skipped = 0;
    Parameters grads = model.params.zeros_like();
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      std::vector<const Example*> batch;
      for (std::size_t k = b; k < std::min(order.size(), b + cfg.batch_size); ++k) batch.push_back(&train_set[order[k]]);
      grads.for_each_tensor([](auto& t) { t.setZero(); });
      StepStats st = hard_em_step(batch, model, cfg.gold_trees, grads, cfg.word_dropout, &rng);
      loss += st.loss;
      used += st.used;
      skipped += st.skipped;
      if (st.used > 0) adam.step(model.params, grads, cfg.learning_rate);
    }
    double acc = evaluate(epoch, used ? loss / used : 0.0, skipped);
    if (acc > best) {
      best = acc;
      res.model = model;
      res.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
    }
  }
  return res;
}

}  // namespace spanparse
