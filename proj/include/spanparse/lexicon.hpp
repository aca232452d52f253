#pragma once

// Phrase -> constant lexicon behind the exact-match score feature.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spanparse/core.hpp"
#include "spanparse/typesys.hpp"

namespace spanparse {

class LexiconError : public Error {
 public:
  using Error::Error;
};

inline std::string normalize_phrase(std::string_view text) {
  std::string out;
  for (const auto& tok : tokenize(text)) {
    if (!out.empty()) out += ' ';
    for (char ch : tok) out += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return out;
}

class Lexicon {
 public:
  enum class Source { AutoEntity, Manual };

  struct Entry {
    std::string phrase;
    ConstantId constant;
    Source source;
  };

  // Maps every entity's surface phrases to the entity (the copy mechanism).
  static Lexicon auto_entities(const DomainSchema& s) {
    Lexicon lex;
    for (ConstantId c = 0; c < s.constant_count(); ++c) {
      const auto& dc = s.constant(c);
      if (!dc.is_entity()) continue;
      for (const auto& p : dc.phrases) lex.add(p, c, Source::AutoEntity);
    }
    return lex;
  }

  // One `phrase<TAB>constant` entry per line. Blank lines and '#' comments
  // are skipped; at most two manual phrases per constant.
  void read_manual(std::istream& in, const DomainSchema& s) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw LexiconError("lexicon line " + std::to_string(lineno) + ": missing tab");
      std::string phrase = line.substr(0, tab);
      std::string name = line.substr(tab + 1);
      auto c = s.find(name);
      if (!c) throw LexiconError("lexicon line " + std::to_string(lineno) + ": unknown constant " + name);
      if (++manual_per_constant_[*c] > 2)
        throw LexiconError("more than two manual phrases for constant " + name);
      add(phrase, *c, Source::Manual);
    }
  }

  void load_manual(const std::string& path, const DomainSchema& s) {
    std::ifstream in(path);
    if (!in) throw LexiconError("cannot open lexicon " + path);
    read_manual(in, s);
  }

  void add(std::string_view phrase, ConstantId c, Source src) {
    std::string key = normalize_phrase(phrase);
    if (key.empty()) return;
    for (const auto& e : entries_)
      if (e.phrase == key && e.constant == c) return;
    entries_.push_back({key, c, src});
    index_[key].insert(c);
    max_len_ = std::max(max_len_, static_cast<int>(std::count(key.begin(), key.end(), ' ')) + 1);
  }

  Lexicon without_manual() const {
    Lexicon out;
    for (const auto& e : entries_)
      if (e.source == Source::AutoEntity) out.add(e.phrase, e.constant, e.source);
    return out;
  }

  const std::set<ConstantId>& lookup(std::string_view phrase) const {
    static const std::set<ConstantId> empty;
    auto it = index_.find(normalize_phrase(phrase));
    return it == index_.end() ? empty : it->second;
  }

  bool matches(const Utterance& u, Span s, ConstantId c) const {
    if (s.length() > max_len_) return false;
    return lookup(u.phrase(s)).count(c) > 0;
  }

  int max_phrase_length() const { return max_len_; }
  const std::vector<Entry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  void write_tsv(std::ostream& out, const DomainSchema& s, bool manual_only) const {
    for (const auto& e : entries_) {
      if (manual_only && e.source != Source::Manual) continue;
      out << e.phrase << '\t' << s.constant(e.constant).name << '\n';
    }
  }

  json to_json(const DomainSchema& s) const {
    json a = json::array();
    for (const auto& e : entries_)
      a.push_back({{"phrase", e.phrase},
                   {"constant", s.constant(e.constant).name},
                   {"source", e.source == Source::Manual ? "manual" : "auto"}});
    return a;
  }
  static Lexicon from_json(const json& a, const DomainSchema& s) {
    Lexicon lex;
    for (const auto& e : a)
      lex.add(e.at("phrase").get<std::string>(), s.id(e.at("constant").get<std::string>()),
              e.at("source").get<std::string>() == "manual" ? Source::Manual : Source::AutoEntity);
    return lex;
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::set<ConstantId>> index_;
  std::map<ConstantId, int> manual_per_constant_;
  int max_len_ = 0;
};

// Every (span, constant) pair where the span's phrase is a lexicon entry.
inline std::vector<std::pair<Span, ConstantId>> lexicon_matches(const Utterance& u, const Lexicon& lex) {
  std::vector<std::pair<Span, ConstantId>> out;
  const int n = u.size();
  for (int i = 1; i <= n; ++i) {
    for (int j = i; j <= n && j - i + 1 <= lex.max_phrase_length(); ++j) {
      for (ConstantId c : lex.lookup(u.phrase({i, j}))) out.emplace_back(Span{i, j}, c);
    }
  }
  return out;
}

}  // namespace spanparse
