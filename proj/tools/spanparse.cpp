// spanparse: generate data, train, parse and evaluate from the command line.
//
// Exit codes: 0 success, 1 runtime error, 2 no valid tree, 3 configuration error.
// Every long option can also be set through SPANPARSE_<NAME> (upper case,
// dashes as underscores) or a TOML file given with --config; command-line
// values win over the file, which wins over the environment.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "spanparse/spanparse.hpp"

namespace fs = std::filesystem;
using namespace spanparse;

namespace {

constexpr int kExitError = 1;
constexpr int kExitNoTree = 2;
constexpr int kExitConfig = 3;

struct GenOptions {
  std::string domain = "scan";
  std::string split = "iid";
  std::string out;
  std::string kb;
  std::string input;
  std::uint64_t seed = 1;
};

struct TrainOptions {
  std::string data;
  std::string split = "iid";
  std::string out;
  TrainConfig cfg;
  bool no_residual = false;
};

struct ParseOptions {
  std::string model;
  std::vector<std::string> words;
  bool ternary = false;
  bool dump_chart = false;
  int beam = 0;
};

struct EvalOptions {
  std::string model;
  std::string input;
  std::string report;
  int jobs = 1;
  bool ternary = false;
};

void add_env_names(CLI::App& app) {
  for (CLI::Option* opt : app.get_options()) {
    std::string name = opt->get_single_name();
    if (opt->get_lnames().empty() || name == "help" || name == "config") continue;
    std::string env = "SPANPARSE_";
    for (char ch : name) env += ch == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    opt->envname(env);
  }
  for (CLI::App* sub : app.get_subcommands({})) add_env_names(*sub);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void write_resolved_config(const CLI::App& app, const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  write_text(dir / name, app.config_to_str(true, false));
}

std::optional<geo::GeoKb> load_kb_if_present(const fs::path& dataset) {
  if (fs::exists(dataset / "kb.json")) return geo::GeoKb::load((dataset / "kb.json").string());
  return std::nullopt;
}

int cmd_gen_data(const GenOptions& o, const CLI::App& app) {
  SplitKind kind = parse_split_kind(o.split);
  DomainSchema schema;
  Lexicon lex;
  std::optional<geo::GeoKb> kb;
  std::vector<Example> xs;
  if (o.domain == "scan") {
    if (kind == SplitKind::Template || kind == SplitKind::Length)
      throw ConfigError("scan supports the iid, right and aroundright splits");
    schema = scan::schema();
    lex = scan::lexicon(schema);
    xs = scan_examples(schema);
  } else if (o.domain == "geo") {
    if (kind == SplitKind::Right || kind == SplitKind::AroundRight)
      throw ConfigError("geo supports the iid, template and length splits");
    kb = o.kb.empty() ? geo::mini_kb() : geo::GeoKb::load(o.kb);
    schema = geo::schema(*kb);
    lex = geo::lexicon(schema);
    xs = geo_examples(schema, *kb);
  } else {
    throw ConfigError("unknown domain " + o.domain);
  }
  if (!o.input.empty()) xs = read_jsonl(o.input, schema);

  Partition p = make_split(xs, schema, kind, o.seed);
  const fs::path root(o.out);
  const fs::path dir = root / split_name(kind);
  fs::create_directories(dir);
  write_jsonl((dir / "train.jsonl").string(), p.train, schema);
  write_jsonl((dir / "dev.jsonl").string(), p.dev, schema);
  write_jsonl((dir / "test.jsonl").string(), p.test, schema);
  write_text(root / "schema.json", schema.to_json().dump(2) + "\n");
  std::ostringstream tsv;
  lex.write_tsv(tsv, schema, true);
  write_text(root / "lexicon.tsv", tsv.str());
  if (kb) write_text(root / "kb.json", kb->to_json().dump(2) + "\n");
  write_resolved_config(app, dir, "gen-data.toml");
  std::cout << json{{"domain", o.domain}, {"split", split_name(kind)}, {"train", p.train.size()},
                    {"dev", p.dev.size()}, {"test", p.test.size()}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_train(TrainOptions o, const CLI::App& app) {
  o.cfg.encoder.residual = !o.no_residual;
  o.cfg.validate();
  const fs::path root(o.data);
  const fs::path dir = root / split_name(parse_split_kind(o.split));
  DomainSchema schema = DomainSchema::load((root / "schema.json").string());
  Lexicon lex = Lexicon::auto_entities(schema);
  if (fs::exists(root / "lexicon.tsv")) lex.load_manual((root / "lexicon.tsv").string(), schema);
  auto kb = load_kb_if_present(root);
  auto train_set = read_jsonl((dir / "train.jsonl").string(), schema);
  auto dev_set = read_jsonl((dir / "dev.jsonl").string(), schema);
  if (train_set.empty()) throw DatasetError("training file is empty");
  if (o.cfg.gold_trees && std::any_of(train_set.begin(), train_set.end(), [](const Example& e) { return !e.tree; }))
    throw ConfigError("--gold-trees needs a gold tree on every training example");

  const fs::path out(o.out);
  fs::create_directories(out);
  write_resolved_config(app, out, "train.toml");
  std::ofstream metrics(out / "metrics.jsonl");
  Model init = initial_model(train_set, schema, lex, kb, o.cfg);
  TrainResult res = train(train_set, dev_set, std::move(init), o.cfg, [&](const EpochMetrics& m) {
    metrics << m.to_json().dump() << "\n" << std::flush;
    std::cout << m.to_json().dump() << "\n" << std::flush;
  });
  save_model(res.model, (out / "model.json").string());
  std::cout << json{{"best_epoch", res.best_epoch}, {"model", (out / "model.json").string()}}.dump() << "\n";
  return 0;
}

int cmd_parse(const ParseOptions& o) {
  Model m = load_model(o.model);
  if (o.ternary) m.grammar.ternary = true;
  if (o.beam > 0) m.beam = o.beam;
  std::string text;
  for (const auto& w : o.words) text += (text.empty() ? "" : " ") + w;
  Utterance u(text);
  if (u.size() == 0) throw ConfigError("empty utterance");
  ParseResult r = parse(m, u);
  if (o.dump_chart) std::cout << chart_to_json(cky_chart(m.scores(u), m.grammar, m.beam), m.schema).dump() << "\n";
  if (!r.best) {
    std::cerr << "no valid tree among the top " << m.beam << " parses";
    if (!r.kbest.empty()) std::cerr << "; best invalid: " << bracketed(r.kbest.front().tree, u, m.schema);
    std::cerr << "\n";
    return kExitNoTree;
  }
  std::cout << "tree: " << bracketed(r.best->tree, u, m.schema) << "\n";
  std::cout << "program: " << to_string(*r.program, m.schema) << "\n";
  try {
    std::cout << "denotation: " << make_executor(m.schema, m.kb)->execute(*r.program).str() << "\n";
  } catch (const ExecError& e) {
    std::cout << "denotation: <" << e.what() << ">\n";
  }
  return 0;
}

int cmd_eval(const EvalOptions& o, const CLI::App& app) {
  if (o.jobs < 1) throw ConfigError("--jobs must be at least 1");
  Model m = load_model(o.model);
  if (o.ternary) m.grammar.ternary = true;
  auto xs = read_jsonl(o.input, m.schema);
  if (xs.empty()) throw DatasetError("test file " + o.input + " is empty");
  auto exec = make_executor(m.schema, m.kb);

  std::vector<Prediction> preds(xs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < xs.size(); k = next++) preds[k] = predict(m, xs[k].utterance);
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < o.jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::size_t correct = 0, failures = 0, with_trees = 0;
  SpanCounts spans;
  json per = json::array();
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const auto& p = preds[k];
    bool ok = same_denotation(p.program, xs[k].program, *exec);
    correct += ok;
    failures += !p.program;
    json row = {{"utterance", xs[k].utterance.raw_text},
                {"gold", to_string(xs[k].program, m.schema)},
                {"predicted", p.program ? json(to_string(*p.program, m.schema)) : json(nullptr)},
                {"correct", ok}};
    if (xs[k].tree) {
      ++with_trees;
      SpanCounts c = span_counts(p.tree, *xs[k].tree);
      spans += c;
      row["f1"] = c.f1();
    }
    per.push_back(std::move(row));
  }
  const double n = static_cast<double>(xs.size());
  json report = {{"count", xs.size()},
                 {"accuracy", static_cast<double>(correct) / n},
                 {"failures", failures},
                 {"failure_rate", static_cast<double>(failures) / n},
                 {"f1", with_trees ? json(spans.f1()) : json(nullptr)},
                 {"per_example", per}};
  std::cout << "accuracy: " << report["accuracy"].get<double>() << "\n"
            << "failure rate: " << report["failure_rate"].get<double>() << "\n";
  if (with_trees) std::cout << "labeled-span F1: " << spans.f1() << "\n";
  if (!o.report.empty()) {
    fs::path rp(o.report);
    if (rp.has_parent_path()) fs::create_directories(rp.parent_path());
    write_text(rp, report.dump(2) + "\n");
    write_resolved_config(app, rp.has_parent_path() ? rp.parent_path() : fs::path("."), "eval.toml");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Span-based semantic parser with hard-EM training over latent span trees"};
  app.set_config("--config", "", "TOML file with option values (overridden by the environment and flags)");
  app.require_subcommand(1);

  GenOptions gen;
  auto* g = app.add_subcommand("gen-data", "Generate a dataset split with schema, lexicon and knowledge base");
  g->add_option("--domain", gen.domain, "scan or geo")->check(CLI::IsMember({"scan", "geo"}))->capture_default_str();
  const auto split_names = CLI::IsMember({"iid", "template", "length", "right", "aroundright"});
  g->add_option("--split", gen.split, "iid, template, length, right or aroundright")->check(split_names)->capture_default_str();
  g->add_option("--out", gen.out, "Dataset directory")->required();
  g->add_option("--kb", gen.kb, "Geo knowledge base JSON (default: the bundled ten-state base)");
  g->add_option("--input", gen.input, "Split these JSONL examples instead of the generated corpus");
  g->add_option("--seed", gen.seed, "Random seed")->capture_default_str();

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train a parser on <data>/<split>/{train,dev}.jsonl");
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--split", tr.split, "Split subdirectory")->check(split_names)->capture_default_str();
  t->add_option("--out", tr.out, "Output directory for model.json, metrics.jsonl and train.toml")->required();
  t->add_option("--lr", tr.cfg.learning_rate, "Adam learning rate")->capture_default_str();
  t->add_option("--batch-size", tr.cfg.batch_size, "Examples per update")->capture_default_str();
  t->add_option("--epochs", tr.cfg.max_epochs, "Maximum epochs")->capture_default_str();
  t->add_option("--patience", tr.cfg.patience, "Epochs without dev improvement before stopping")->capture_default_str();
  t->add_option("--beam", tr.cfg.beam, "K, trees kept per chart cell")->capture_default_str();
  t->add_option("--lambda", tr.cfg.lambda, "Lexicon feature weight")->capture_default_str();
  t->add_option("--hidden", tr.cfg.hidden, "Span classifier hidden size")->capture_default_str();
  t->add_option("--dim", tr.cfg.encoder.dim, "Encoder width")->capture_default_str();
  t->add_option("--layers", tr.cfg.encoder.layers, "Encoder mixing layers")->capture_default_str();
  t->add_option("--window", tr.cfg.encoder.window, "Encoder mixing half-window")->capture_default_str();
  t->add_flag("--no-residual", tr.no_residual, "Plain tanh mixing layers without the identity path");
  t->add_option("--word-dropout", tr.cfg.word_dropout, "Training-time UNK replacement rate")->capture_default_str();
  t->add_option("--dev-limit", tr.cfg.dev_limit, "Evaluate on the first N dev examples (0 = all)")->capture_default_str();
  t->add_option("--seed", tr.cfg.seed, "Random seed")->capture_default_str();
  t->add_flag("--ternary", tr.cfg.ternary, "Enable the ternary (non-projective) rule");
  t->add_flag("--no-lexicon", tr.cfg.no_lexicon, "Drop the manual lexicon; entity names still match");
  t->add_flag("--gold-trees", tr.cfg.gold_trees, "Supervise with the examples' gold trees instead of hard-EM");

  ParseOptions pa;
  auto* p = app.add_subcommand("parse", "Parse one utterance and execute its program");
  p->add_option("--model", pa.model, "Checkpoint (model.json)")->required();
  p->add_option("utterance", pa.words, "Utterance tokens")->required();
  p->add_flag("--ternary", pa.ternary, "Enable the ternary rule regardless of the checkpoint");
  p->add_flag("--dump-chart", pa.dump_chart, "Print the chart as JSON before the result");
  p->add_option("--beam", pa.beam, "Override K");

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a JSONL file");
  e->add_option("--model", ev.model, "Checkpoint (model.json)")->required();
  e->add_option("--input", ev.input, "JSONL examples")->required();
  e->add_option("--report", ev.report, "Write the JSON report here");
  e->add_option("--jobs", ev.jobs, "Parallel parser threads")->capture_default_str();
  e->add_flag("--ternary", ev.ternary, "Enable the ternary rule regardless of the checkpoint");

  add_env_names(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitConfig;
  }

  try {
    if (*g) return cmd_gen_data(gen, app);
    if (*t) return cmd_train(tr, app);
    if (*p) return cmd_parse(pa);
    if (*e) return cmd_eval(ev, app);
  } catch (const ConfigError& err) {
    std::cerr << "configuration error: " << err.what() << "\n\n" << app.help();
    return kExitConfig;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
