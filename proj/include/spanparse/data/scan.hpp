#pragma once

// SCAN-SP: SCAN navigation commands paired with programs over
//   and, after, walk, jump, run, look, turn   (binary predicates)
//   twice, thrice                             (unary predicates)
//   l, r, op, ar                              (left, right, opposite, around)
// generated from a synchronous grammar together with the derivation-induced
// span tree and the action sequence.

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>
#include <string>
#include <vector>

#include "spanparse/core.hpp"
#include "spanparse/data/executor.hpp"
#include "spanparse/lexicon.hpp"
#include "spanparse/typesys.hpp"

namespace spanparse::scan {

inline const char* kSchemaJson = R"({
  "domain": "scan",
  "types": [{"name": "action"}, {"name": "dir"}, {"name": "manner"}],
  "constants": [
    {"name": "and",    "args": ["action", "action"], "result": "action"},
    {"name": "after",  "args": ["action", "action"], "result": "action"},
    {"name": "walk",   "args": ["dir?", "manner?"], "result": "action"},
    {"name": "jump",   "args": ["dir?", "manner?"], "result": "action"},
    {"name": "run",    "args": ["dir?", "manner?"], "result": "action"},
    {"name": "look",   "args": ["dir?", "manner?"], "result": "action"},
    {"name": "turn",   "args": ["dir", "manner?"], "result": "action"},
    {"name": "twice",  "args": ["action"], "result": "action"},
    {"name": "thrice", "args": ["action"], "result": "action"},
    {"name": "l",  "result": "dir",    "phrases": ["left"]},
    {"name": "r",  "result": "dir",    "phrases": ["right"]},
    {"name": "op", "result": "manner", "phrases": ["opposite"]},
    {"name": "ar", "result": "manner", "phrases": ["around"]}
  ]
})";

inline DomainSchema schema() { return DomainSchema::from_json(json::parse(kSchemaJson)); }

inline const char* kManualLexicon =
    "walk\twalk\n"
    "jump\tjump\n"
    "run\trun\n"
    "look\tlook\n"
    "turn\tturn\n"
    "twice\ttwice\n"
    "thrice\tthrice\n"
    "and\tand\n"
    "after\tafter\n";

inline Lexicon lexicon(const DomainSchema& s, bool with_manual = true) {
  Lexicon lex = Lexicon::auto_entities(s);
  if (with_manual) {
    std::istringstream in(kManualLexicon);
    lex.read_manual(in, s);
  }
  return lex;
}

// after(a, b) runs b then a; and(a, b) runs a then b; opposite turns twice
// before acting; around repeats (turn, act) four times.
class ScanExecutor : public Executor {
 public:
  explicit ScanExecutor(const DomainSchema& s) : s_(s) {}

  Denotation execute(const Program& z) const override {
    Denotation d;
    run(z, d.values);
    return d;
  }

 private:
  void run(const Program& z, std::vector<std::string>& out) const {
    if (z.is_hole()) throw ExecError("unsaturated program");
    const std::string& name = s_.constant(z.head).name;
    auto need = [&](std::size_t k) -> const Program& {
      if (k >= z.args.size() || z.args[k].is_hole()) throw ExecError("unsaturated program: " + name);
      return z.args[k];
    };
    if (name == "and") {
      run(need(0), out);
      run(need(1), out);
    } else if (name == "after") {
      run(need(1), out);
      run(need(0), out);
    } else if (name == "twice" || name == "thrice") {
      std::vector<std::string> once;
      run(need(0), once);
      for (int r = 0; r < (name == "twice" ? 2 : 3); ++r) out.insert(out.end(), once.begin(), once.end());
    } else if (name == "walk" || name == "jump" || name == "run" || name == "look" || name == "turn") {
      std::string act;
      if (name != "turn") {
        act = name;
        for (auto& ch : act) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      }
      const Program& dir = z.args.at(0);
      const Program& manner = z.args.at(1);
      if (dir.is_hole()) {
        if (name == "turn" || !manner.is_hole()) throw ExecError("unsaturated program: " + name);
        out.push_back(act);
        return;
      }
      const std::string& d = s_.constant(dir.head).name;
      if (d != "l" && d != "r") throw ExecError("bad direction " + d);
      const std::string turn = d == "l" ? "LTURN" : "RTURN";
      auto emit = [&](int turns) {
        for (int t = 0; t < turns; ++t) out.push_back(turn);
        if (!act.empty()) out.push_back(act);
      };
      if (manner.is_hole()) {
        emit(1);
      } else if (s_.constant(manner.head).name == "op") {
        emit(2);
      } else if (s_.constant(manner.head).name == "ar") {
        for (int r = 0; r < 4; ++r) emit(1);
      } else {
        throw ExecError("bad manner");
      }
    } else {
      throw ExecError("cannot execute constant " + name);
    }
  }

  const DomainSchema& s_;
};

struct ScanItem {
  std::string utterance;
  Program program;
  SpanTree tree;
  std::vector<std::string> actions;
};

// Action sequence of a SCAN command read directly from its words, the
// way the original SCAN interpreter defines it.
inline std::vector<std::string> interpret_command(const std::vector<std::string>& w) {
  for (const char* conj : {"and", "after"}) {
    auto it = std::find(w.begin(), w.end(), conj);
    if (it == w.end()) continue;
    std::vector<std::string> a(w.begin(), it), b(it + 1, w.end());
    auto x = interpret_command(a);
    auto y = interpret_command(b);
    if (std::string(conj) == "after") std::swap(x, y);
    x.insert(x.end(), y.begin(), y.end());
    return x;
  }
  int repeat = 1;
  std::vector<std::string> v = w;
  if (v.back() == "twice") repeat = 2;
  if (v.back() == "thrice") repeat = 3;
  if (repeat > 1) v.pop_back();

  std::vector<std::string> once;
  std::string act = v[0] == "turn" ? "" : v[0];
  for (auto& ch : act) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  auto primitive = [&](const std::string& turn, int turns) {
    for (int t = 0; t < turns; ++t) once.push_back(turn);
    if (!act.empty()) once.push_back(act);
  };
  if (v.size() == 1) {
    once.push_back(act);
  } else {
    std::string turn = v.back() == "left" ? "LTURN" : "RTURN";
    if (v.size() == 2) primitive(turn, 1);
    else if (v[1] == "opposite") primitive(turn, 2);
    else for (int r = 0; r < 4; ++r) primitive(turn, 1);
  }
  std::vector<std::string> out;
  for (int r = 0; r < repeat; ++r) out.insert(out.end(), once.begin(), once.end());
  return out;
}

namespace detail {

struct Piece {
  std::vector<std::string> words;
  Program program;
  SpanTree tree;  // spans relative to the piece, starting at 1
};

inline SpanTree shifted_tree(SpanTree t, int offset) {
  t.span.start += offset;
  t.span.end += offset;
  for (auto& c : t.children) c = shifted_tree(std::move(c), offset);
  return t;
}

inline Piece word(const DomainSchema& s, const std::string& w, const std::string& constant) {
  ConstantId c = s.id(constant);
  return {{w}, s.leaf(c), SpanTree::leaf({1, 1}, Category::of(c))};
}

// Concatenates two pieces under a Join node whose program fills `slot` of
// the function piece with the argument piece.
inline Piece join(const Piece& left, const Piece& right, Program program) {
  Piece out;
  out.words = left.words;
  out.words.insert(out.words.end(), right.words.begin(), right.words.end());
  out.program = std::move(program);
  out.tree = SpanTree::join({left.tree, shifted_tree(right.tree, static_cast<int>(left.words.size()))});
  return out;
}

inline Program with_arg(Program f, std::size_t slot, const Program& a) {
  f.args.at(slot) = a;
  return f;
}

}  // namespace detail

// Enumerates every SCAN command (20,910):
//   C -> S | S and S | S after S
//   S -> V | V twice | V thrice
//   V -> U | U dir | U opposite dir | U around dir | turn dir | turn opposite dir | turn around dir
inline std::vector<ScanItem> generate_scan_sp(const DomainSchema& s) {
  using detail::Piece;
  const std::array<std::string, 4> verbs{"walk", "look", "run", "jump"};
  const std::array<std::string, 5> all_verbs{"walk", "look", "run", "jump", "turn"};
  const std::array<std::pair<std::string, std::string>, 2> dirs{{{"left", "l"}, {"right", "r"}}};
  const std::array<std::pair<std::string, std::string>, 2> manners{{{"opposite", "op"}, {"around", "ar"}}};

  std::vector<Piece> vps;
  for (const auto& u : verbs) vps.push_back(detail::word(s, u, u));
  for (const auto& [dw, dc] : dirs) {
    for (const auto& u : all_verbs) {
      Piece verb = detail::word(s, u, u);
      Piece dir = detail::word(s, dw, dc);
      vps.push_back(detail::join(verb, dir, detail::with_arg(verb.program, 0, dir.program)));
    }
  }
  for (const auto& [mw, mc] : manners) {
    for (const auto& [dw, dc] : dirs) {
      for (const auto& u : all_verbs) {
        Piece verb = detail::word(s, u, u);
        Piece manner = detail::word(s, mw, mc);
        Piece vm = detail::join(verb, manner, detail::with_arg(verb.program, 1, manner.program));
        Piece dir = detail::word(s, dw, dc);
        vps.push_back(detail::join(vm, dir, detail::with_arg(vm.program, 0, dir.program)));
      }
    }
  }

  std::vector<Piece> clauses;
  for (const auto& v : vps) clauses.push_back(v);
  for (const char* rep : {"twice", "thrice"}) {
    for (const auto& v : vps) {
      Piece r = detail::word(s, rep, rep);
      clauses.push_back(detail::join(v, r, detail::with_arg(r.program, 0, v.program)));
    }
  }

  auto finish = [&](const Piece& p) {
    ScanItem it;
    for (const auto& w : p.words) it.utterance += (it.utterance.empty() ? "" : " ") + w;
    it.program = p.program;
    it.tree = as_root(p.tree);
    it.actions = interpret_command(p.words);
    return it;
  };

  std::vector<ScanItem> out;
  out.reserve(clauses.size() * (1 + 2 * clauses.size()));
  for (const auto& c : clauses) out.push_back(finish(c));
  for (const char* conj : {"and", "after"}) {
    for (const auto& a : clauses) {
      Piece cw = detail::word(s, conj, conj);
      Piece head = detail::join(a, cw, detail::with_arg(cw.program, 0, a.program));
      for (const auto& b : clauses) out.push_back(finish(detail::join(head, b, detail::with_arg(head.program, 1, b.program))));
    }
  }
  return out;
}

}  // namespace spanparse::scan
