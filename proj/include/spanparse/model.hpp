#pragma once

// A trained parser: parameters plus everything needed to score, decode and
// execute (schema, lexicon, grammar, optional knowledge base).

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "spanparse/cky.hpp"
#include "spanparse/data/dataset.hpp"
#include "spanparse/lexicon.hpp"
#include "spanparse/scorer.hpp"
#include "spanparse/typesys.hpp"

namespace spanparse {

class CheckpointError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kCheckpointVersion = 1;

struct Model {
  DomainSchema schema;
  Lexicon lexicon;
  Parameters params;
  Grammar grammar;
  int beam = 5;
  std::optional<geo::GeoKb> kb;
  json config = json::object();

  ScoreTable scores(const Utterance& u) const { return score_spans(u, params.enc, params.cls, lexicon); }
};

struct ParseResult {
  std::vector<ScoredTree> kbest;
  std::optional<ScoredTree> best;  // highest-scoring tree whose program composes
  std::optional<Program> program;
};

inline ParseResult parse(const Model& m, const Utterance& u) {
  if (u.size() == 0) throw EmptyInput("cannot parse an empty utterance");
  ParseResult r;
  r.kbest = parse_kbest(m.scores(u), m.grammar, m.beam);
  r.best = best_valid_tree(r.kbest, m.schema);
  if (r.best) r.program = program_of_tree(r.best->tree, m.schema);
  return r;
}

namespace detail {

inline json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}
inline json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Matrix matrix_from_json(const json& j) {
  auto data = j.at("data").get<std::vector<double>>();
  const Eigen::Index r = j.at("rows").get<Eigen::Index>(), c = j.at("cols").get<Eigen::Index>();
  if (static_cast<Eigen::Index>(data.size()) != r * c) throw CheckpointError("tensor size mismatch");
  return Eigen::Map<Matrix>(data.data(), r, c);
}
inline Vector vector_from_json(const json& j) {
  auto data = j.get<std::vector<double>>();
  return Eigen::Map<Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
}

}  // namespace detail

inline json model_to_json(const Model& m) {
  const auto& p = m.params;
  json mix = json::array();
  for (const auto& layer : p.enc.mix) {
    json l = json::array();
    for (const auto& w : layer) l.push_back(detail::matrix_to_json(w));
    mix.push_back(l);
  }
  json mix_bias = json::array();
  for (const auto& b : p.enc.mix_bias) mix_bias.push_back(detail::vector_to_json(b));
  json j = {
      {"version", kCheckpointVersion},
      {"config", m.config},
      {"grammar", {{"ternary", m.grammar.ternary}}},
      {"beam", m.beam},
      {"schema", m.schema.to_json()},
      {"lexicon", m.lexicon.to_json(m.schema)},
      {"encoder",
       {{"dim", p.enc.config.dim},
        {"layers", p.enc.config.layers},
        {"window", p.enc.config.window},
        {"residual", p.enc.config.residual},
        {"vocab", p.enc.vocab.words()},
        {"embed", detail::matrix_to_json(p.enc.embed)},
        {"mix", mix},
        {"mix_bias", mix_bias}}},
      {"classifier",
       {{"w1", detail::matrix_to_json(p.cls.w1)},
        {"b1", detail::vector_to_json(p.cls.b1)},
        {"w2", detail::matrix_to_json(p.cls.w2)},
        {"b2", detail::vector_to_json(p.cls.b2)},
        {"lambda", p.cls.lambda}}},
  };
  if (m.kb) j["kb"] = m.kb->to_json();
  return j;
}

inline Model model_from_json(const json& j) {
  if (j.value("version", 0) != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version");
  Model m;
  m.schema = DomainSchema::from_json(j.at("schema"));
  m.lexicon = Lexicon::from_json(j.at("lexicon"), m.schema);
  m.grammar.ternary = j.at("grammar").at("ternary").get<bool>();
  m.beam = j.at("beam").get<int>();
  m.config = j.value("config", json::object());
  if (j.contains("kb")) m.kb = geo::GeoKb::from_json(j.at("kb"));

  const json& e = j.at("encoder");
  auto& enc = m.params.enc;
  enc.config.dim = e.at("dim");
  enc.config.layers = e.at("layers");
  enc.config.window = e.at("window");
  enc.config.residual = e.at("residual");
  auto words = e.at("vocab").get<std::vector<std::string>>();
  for (std::size_t k = 1; k < words.size(); ++k) enc.vocab.add(words[k]);
  enc.embed = detail::matrix_from_json(e.at("embed"));
  for (const auto& layer : e.at("mix")) {
    enc.mix.emplace_back();
    for (const auto& w : layer) enc.mix.back().push_back(detail::matrix_from_json(w));
  }
  for (const auto& b : e.at("mix_bias")) enc.mix_bias.push_back(detail::vector_from_json(b));

  const json& c = j.at("classifier");
  auto& cls = m.params.cls;
  cls.w1 = detail::matrix_from_json(c.at("w1"));
  cls.b1 = detail::vector_from_json(c.at("b1"));
  cls.w2 = detail::matrix_from_json(c.at("w2"));
  cls.b2 = detail::vector_from_json(c.at("b2"));
  cls.lambda = c.at("lambda");
  if (cls.categories() != m.schema.category_count()) throw CheckpointError("classifier does not match schema");
  if (enc.embed.cols() != enc.vocab.size()) throw CheckpointError("embedding does not match vocabulary");
  return m;
}

inline void save_model(const Model& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write " + path);
  out << model_to_json(m).dump();
}

inline Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open " + path);
  return model_from_json(json::parse(in));
}

}  // namespace spanparse
