#pragma once

// JSONL examples: {"utterance": str, "program": str, "tree": optional, "denotation": optional}.

#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spanparse/data/executor.hpp"
#include "spanparse/data/geo.hpp"
#include "spanparse/data/scan.hpp"
#include "spanparse/typesys.hpp"

namespace spanparse {

class DatasetError : public Error {
 public:
  using Error::Error;
};

struct Example {
  Utterance utterance;
  Program program;
  std::optional<SpanTree> tree;
  std::optional<Denotation> denotation;
};

inline Example make_example(std::string_view text, Program program, std::optional<SpanTree> tree = std::nullopt,
                            std::optional<Denotation> denotation = std::nullopt) {
  return {Utterance(std::string(text)), std::move(program), std::move(tree), std::move(denotation)};
}

inline json example_to_json(const Example& e, const DomainSchema& s) {
  json j = {{"utterance", e.utterance.raw_text}, {"program", to_string(e.program, s)}};
  if (e.tree) j["tree"] = tree_to_json(*e.tree, s);
  if (e.denotation) j["denotation"] = e.denotation->values;
  return j;
}

inline Example example_from_json(const json& j, const DomainSchema& s) {
  Example e;
  e.utterance = Utterance(j.at("utterance").get<std::string>());
  e.program = parse_program(j.at("program").get<std::string>(), s);
  if (j.contains("tree") && !j["tree"].is_null()) e.tree = tree_from_json(j["tree"], s);
  if (j.contains("denotation") && !j["denotation"].is_null())
    e.denotation = Denotation{j["denotation"].get<std::vector<std::string>>()};
  return e;
}

inline std::vector<Example> read_jsonl(const std::string& path, const DomainSchema& s) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path);
  std::vector<Example> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(example_from_json(json::parse(line), s));
    } catch (const std::exception& err) {
      throw DatasetError(path + ":" + std::to_string(lineno) + ": " + err.what());
    }
  }
  return out;
}

inline void write_jsonl(const std::string& path, const std::vector<Example>& xs, const DomainSchema& s) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write " + path);
  for (const auto& x : xs) out << example_to_json(x, s).dump() << '\n';
}

inline std::vector<Example> scan_examples(const DomainSchema& s) {
  std::vector<Example> out;
  for (auto& it : scan::generate_scan_sp(s))
    out.push_back(make_example(it.utterance, std::move(it.program), std::move(it.tree), Denotation{std::move(it.actions)}));
  return out;
}

inline std::vector<Example> geo_examples(const DomainSchema& s, const geo::GeoKb& kb) {
  geo::GeoExecutor exec(s, kb);
  std::vector<Example> out;
  for (auto& it : geo::generate_corpus(s, kb)) {
    Denotation d = exec.execute(it.program);
    out.push_back(make_example(it.utterance, std::move(it.program), std::nullopt, std::move(d)));
  }
  return out;
}

// Executor for the schema's domain; Geo needs a knowledge base.
inline std::unique_ptr<Executor> make_executor(const DomainSchema& s, const std::optional<geo::GeoKb>& kb) {
  if (s.domain() == "scan") return std::make_unique<scan::ScanExecutor>(s);
  if (s.domain() == "geo") {
    if (!kb) throw DatasetError("geo execution needs a knowledge base");
    return std::make_unique<geo::GeoExecutor>(s, *kb);
  }
  throw DatasetError("no executor for domain " + s.domain());
}

}  // namespace spanparse
