#pragma once

// Domain schemas, type-driven function application and the bottom-up
// mapping from span trees to programs.

#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "spanparse/core.hpp"

namespace spanparse {

using json = nlohmann::json;

class SchemaError : public Error {
 public:
  using Error::Error;
};

class ProgramSyntaxError : public Error {
 public:
  using Error::Error;
};

// Raised when two sub-programs cannot be combined by function application.
class CompositionFailure : public Error {
 public:
  CompositionFailure(Span s, const std::string& what) : Error(what), span(s) {}
  Span span;
};

struct ArgSlot {
  int type = 0;
  bool optional = false;              // may stay empty in a complete program
  ConstantId fallback = kHole;        // filled in when the program is used as an argument
};

struct DomainConstant {
  enum class Kind { Entity, Predicate };

  std::string name;
  Kind kind = Kind::Entity;
  std::vector<ArgSlot> slots;
  int result_type = 0;
  std::vector<std::string> phrases;   // surface forms for the automatic entity lexicon
  bool anonymize = false;             // replaced by its type name in program templates

  std::size_t arity() const { return slots.size(); }
  bool is_entity() const { return kind == Kind::Entity; }
};

namespace detail {

inline std::optional<std::string> quoted_payload(const std::string& name) {
  auto open = name.find("('");
  if (open == std::string::npos || name.size() < open + 4) return std::nullopt;
  if (name.compare(name.size() - 2, 2, "')") != 0) return std::nullopt;
  return name.substr(open + 2, name.size() - open - 4);
}

}  // namespace detail

class DomainSchema {
 public:
  DomainSchema() = default;

  static DomainSchema from_json(const json& j) {
    DomainSchema s;
    s.domain_ = j.value("domain", "generic");
    for (const auto& t : j.at("types")) s.add_type(t.at("name").get<std::string>());
    for (const auto& t : j.at("types")) {
      int child = s.type_id(t.at("name").get<std::string>());
      for (const auto& p : t.value("parents", json::array()))
        s.parents_[child].push_back(s.type_id(p.get<std::string>()));
    }
    s.close_subtypes();

    // Two passes so that fallback arguments may name constants declared later.
    for (const auto& c : j.at("constants")) {
      DomainConstant dc;
      dc.name = c.at("name").get<std::string>();
      if (s.by_name_.count(dc.name)) throw SchemaError("duplicate constant " + dc.name);
      dc.result_type = s.type_id(c.at("result").get<std::string>());
      for (const auto& a : c.value("args", json::array())) {
        std::string t = a.get<std::string>();
        ArgSlot slot;
        if (!t.empty() && t.back() == '?') {
          slot.optional = true;
          t.pop_back();
        }
        slot.type = s.type_id(t);
        dc.slots.push_back(slot);
      }
      dc.kind = dc.slots.empty() ? DomainConstant::Kind::Entity : DomainConstant::Kind::Predicate;
      if (c.contains("kind")) {
        std::string k = c.at("kind").get<std::string>();
        bool want_entity = (k == "entity");
        if (want_entity != dc.is_entity())
          throw SchemaError("constant " + dc.name + ": kind disagrees with its argument list");
      }
      if (dc.is_entity()) {
        if (c.contains("phrases")) {
          dc.phrases = c.at("phrases").get<std::vector<std::string>>();
        } else if (auto p = detail::quoted_payload(dc.name)) {
          dc.phrases = {*p};
        } else {
          dc.phrases = {dc.name};
        }
        dc.anonymize = c.value("anonymize", detail::quoted_payload(dc.name).has_value());
      }
      s.by_name_[dc.name] = static_cast<ConstantId>(s.constants_.size());
      s.constants_.push_back(std::move(dc));
    }
    std::size_t idx = 0;
    for (const auto& c : j.at("constants")) {
      auto defaults = c.value("defaults", json::array());
      auto& dc = s.constants_[idx++];
      for (std::size_t k = 0; k < defaults.size() && k < dc.slots.size(); ++k) {
        if (defaults[k].is_null()) continue;
        ConstantId d = s.id(defaults[k].get<std::string>());
        if (!s.constants_[d].is_entity())
          throw SchemaError("fallback argument of " + dc.name + " must be an entity");
        dc.slots[k].fallback = d;
      }
    }
    return s;
  }

  static DomainSchema load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open schema file " + path);
    return from_json(json::parse(in));
  }

  json to_json() const {
    json types = json::array();
    for (std::size_t t = 0; t < types_.size(); ++t) {
      json parents = json::array();
      for (int p : parents_[t]) parents.push_back(types_[p]);
      types.push_back({{"name", types_[t]}, {"parents", parents}});
    }
    json cs = json::array();
    for (const auto& c : constants_) {
      json o = {{"name", c.name}, {"result", types_[c.result_type]},
                {"kind", c.is_entity() ? "entity" : "predicate"}};
      if (!c.is_entity()) {
        json args = json::array();
        json defaults = json::array();
        bool any_default = false;
        for (const auto& sl : c.slots) {
          args.push_back(types_[sl.type] + (sl.optional ? "?" : ""));
          if (sl.fallback != kHole) {
            defaults.push_back(constants_[sl.fallback].name);
            any_default = true;
          } else {
            defaults.push_back(nullptr);
          }
        }
        o["args"] = args;
        if (any_default) o["defaults"] = defaults;
      } else {
        o["phrases"] = c.phrases;
        o["anonymize"] = c.anonymize;
      }
      cs.push_back(o);
    }
    return {{"domain", domain_}, {"types", types}, {"constants", cs}};
  }

  const std::string& domain() const { return domain_; }
  int constant_count() const { return static_cast<int>(constants_.size()); }
  int category_count() const { return spanparse::category_count(constant_count()); }
  const DomainConstant& constant(ConstantId id) const { return constants_.at(id); }
  const std::vector<DomainConstant>& constants() const { return constants_; }
  const std::string& type_name(int t) const { return types_.at(t); }

  std::optional<ConstantId> find(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
  }
  ConstantId id(const std::string& name) const {
    auto f = find(name);
    if (!f) throw SchemaError("unknown constant " + name);
    return *f;
  }
  int type_id(const std::string& name) const {
    for (std::size_t t = 0; t < types_.size(); ++t)
      if (types_[t] == name) return static_cast<int>(t);
    throw SchemaError("unknown type " + name);
  }

  bool is_subtype(int sub, int super) const { return subtype_[sub][super]; }

  // An argument fits a slot when the types are related in either direction:
  // a value of a general type may flow into a narrower slot, not across.
  bool compatible(int arg, int slot) const { return is_subtype(arg, slot) || is_subtype(slot, arg); }

  std::string category_name(const Category& c) const {
    if (c.is_nosem()) return "NoSem";
    if (c.is_join()) return "Join";
    return constant(c.constant).name;
  }
  Category parse_category(const std::string& s) const {
    if (s == "NoSem") return Category::nosem();
    if (s == "Join" || s == "S") return Category::join();
    return Category::of(id(s));
  }

  Program leaf(ConstantId c) const { return Program(c, constant(c).arity()); }

 private:
  void add_type(const std::string& name) {
    for (const auto& t : types_)
      if (t == name) throw SchemaError("duplicate type " + name);
    types_.push_back(name);
    parents_.emplace_back();
  }

  void close_subtypes() {
    const std::size_t n = types_.size();
    subtype_.assign(n, std::vector<bool>(n, false));
    for (std::size_t t = 0; t < n; ++t) {
      // DFS from t over parent edges; meeting t again means a cycle.
      std::vector<int> stack(parents_[t].begin(), parents_[t].end());
      subtype_[t][t] = true;
      std::vector<bool> seen(n, false);
      while (!stack.empty()) {
        int p = stack.back();
        stack.pop_back();
        if (static_cast<std::size_t>(p) == t) throw SchemaError("subtype cycle through " + types_[t]);
        if (seen[p]) continue;
        seen[p] = true;
        subtype_[t][p] = true;
        for (int q : parents_[p]) stack.push_back(q);
      }
    }
  }

  std::string domain_ = "generic";
  std::vector<std::string> types_;
  std::vector<std::vector<int>> parents_;
  std::vector<std::vector<bool>> subtype_;
  std::vector<DomainConstant> constants_;
  std::unordered_map<std::string, ConstantId> by_name_;
};

// ---------------------------------------------------------------------------
// Programs

inline int result_type(const Program& p, const DomainSchema& s) {
  return s.constant(p.head).result_type;
}

// Fills holes that have a fallback argument; fails when a required slot
// stays empty. This is what a program must pass to be used as an argument
// or returned as a complete parse.
inline std::optional<Program> close_program(const Program& p, const DomainSchema& s) {
  if (p.is_hole()) return std::nullopt;
  Program out = p;
  const auto& c = s.constant(p.head);
  for (std::size_t k = 0; k < out.args.size(); ++k) {
    if (!out.args[k].is_hole()) continue;
    const ArgSlot& slot = c.slots[k];
    if (slot.fallback != kHole) {
      out.args[k] = s.leaf(slot.fallback);
    } else if (!slot.optional) {
      return std::nullopt;
    }
  }
  return out;
}

inline std::optional<Program> apply(const Program& fn, const Program& arg, const DomainSchema& s) {
  if (fn.is_hole() || arg.is_hole()) return std::nullopt;
  const auto& c = s.constant(fn.head);
  int at = result_type(arg, s);
  for (std::size_t k = 0; k < fn.args.size(); ++k) {
    if (!fn.args[k].is_hole() || !s.compatible(at, c.slots[k].type)) continue;
    auto closed = close_program(arg, s);
    if (!closed) return std::nullopt;
    Program out = fn;
    out.args[k] = std::move(*closed);
    return out;
  }
  return std::nullopt;
}

// Function application with the type system choosing the function. When
// both orientations type-check the left program is the function.
inline std::optional<Program> compose(const Program& a, const Program& b, const DomainSchema& s) {
  if (auto r = apply(a, b, s)) return r;
  return apply(b, a, s);
}

inline bool well_typed(const Program& p, const DomainSchema& s) {
  if (p.is_hole()) return true;
  if (p.head < 0 || p.head >= s.constant_count()) return false;
  const auto& c = s.constant(p.head);
  if (p.args.size() != c.arity()) return false;
  for (std::size_t k = 0; k < p.args.size(); ++k) {
    const Program& a = p.args[k];
    if (a.is_hole()) continue;
    if (!s.compatible(result_type(a, s), c.slots[k].type)) return false;
    if (!well_typed(a, s)) return false;
  }
  return true;
}

inline void collect_constants(const Program& z, std::multiset<ConstantId>& out) {
  if (z.is_hole()) return;
  out.insert(z.head);
  for (const auto& a : z.args) collect_constants(a, out);
}

inline std::multiset<ConstantId> constants_of(const Program& z) {
  std::multiset<ConstantId> out;
  collect_constants(z, out);
  return out;
}

// With `anonymize`, anonymizable entities print as their upper-cased type
// (the program template).
inline std::string to_string(const Program& p, const DomainSchema& s, bool anonymize = false) {
  if (p.is_hole()) return "\xC2\xB7";  // middle dot
  const auto& c = s.constant(p.head);
  if (c.is_entity()) {
    if (!anonymize || !c.anonymize) return c.name;
    std::string t = s.type_name(c.result_type);
    for (auto& ch : t) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return t;
  }
  std::size_t last = p.args.size();
  while (last > 0 && p.args[last - 1].is_hole()) --last;
  if (last == 0) return c.name;
  std::string out = c.name + "(";
  for (std::size_t k = 0; k < last; ++k) {
    if (k) out += ',';
    out += to_string(p.args[k], s, anonymize);
  }
  return out + ")";
}

namespace detail {

class ProgramReader {
 public:
  ProgramReader(std::string_view text, const DomainSchema& s) : t_(text), s_(s) {}

  Program read_all() {
    Program p = read();
    skip_ws();
    if (pos_ != t_.size()) fail("trailing input");
    return p;
  }

 private:
  void skip_ws() {
    while (pos_ < t_.size() && std::isspace(static_cast<unsigned char>(t_[pos_]))) ++pos_;
  }
  [[noreturn]] void fail(const std::string& why) const {
    throw ProgramSyntaxError(why + " at offset " + std::to_string(pos_) + " in '" +
                             std::string(t_) + "'");
  }
  bool peek(char c) {
    skip_ws();
    return pos_ < t_.size() && t_[pos_] == c;
  }

  Program read() {
    skip_ws();
    if (t_.compare(pos_, 2, "\xC2\xB7") == 0) {
      pos_ += 2;
      return Program{};
    }
    if (peek('_')) {
      ++pos_;
      return Program{};
    }
    std::size_t b = pos_;
    while (pos_ < t_.size() &&
           (std::isalnum(static_cast<unsigned char>(t_[pos_])) || t_[pos_] == '_' || t_[pos_] == '.'))
      ++pos_;
    if (b == pos_) fail("expected a constant name");
    std::string name(t_.substr(b, pos_ - b));

    // Entity payload: name('...')
    if (pos_ + 1 < t_.size() && t_[pos_] == '(' && t_[pos_ + 1] == '\'') {
      auto close = t_.find("')", pos_ + 2);
      if (close == std::string_view::npos) fail("unterminated quoted payload");
      name += std::string(t_.substr(pos_, close + 2 - pos_));
      pos_ = close + 2;
      auto id = s_.find(name);
      if (!id) fail("unknown constant " + name);
      return s_.leaf(*id);
    }
    auto id = s_.find(name);
    if (!id) fail("unknown constant " + name);
    Program p = s_.leaf(*id);
    if (!peek('(')) return p;
    ++pos_;
    if (peek(')')) {
      ++pos_;
      return p;
    }
    std::size_t k = 0;
    while (true) {
      if (k >= p.args.size()) fail("too many arguments for " + name);
      p.args[k++] = read();
      if (peek(',')) {
        ++pos_;
        continue;
      }
      if (peek(')')) {
        ++pos_;
        break;
      }
      fail("expected ',' or ')'");
    }
    return p;
  }

  std::string_view t_;
  const DomainSchema& s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Program parse_program(std::string_view text, const DomainSchema& s) {
  return detail::ProgramReader(text, s).read_all();
}

// ---------------------------------------------------------------------------
// program(T)

namespace detail {

inline std::optional<Program> node_program(SpanTree& t, const DomainSchema& s, Span* failed) {
  auto fail = [&]() -> std::optional<Program> {
    if (failed) *failed = t.span;
    return std::nullopt;
  };
  if (t.is_leaf()) {
    if (t.category.is_constant()) {
      t.sub_program = s.leaf(t.category.constant);
      return t.sub_program;
    }
    return std::nullopt;
  }
  std::vector<std::optional<Program>> kids;
  for (auto& c : t.children) {
    kids.push_back(node_program(c, s, failed));
    if (!kids.back() && !c.category.is_nosem()) return std::nullopt;
  }
  std::optional<Program> out;
  if (kids.size() == 2) {
    if (kids[0] && kids[1]) {
      out = compose(*kids[0], *kids[1], s);
    } else {
      out = kids[0] ? kids[0] : kids[1];
    }
  } else if (kids.size() == 3 && kids[0] && kids[1] && kids[2]) {
    if (auto outer = compose(*kids[0], *kids[2], s)) out = compose(*outer, *kids[1], s);
  }
  if (!out) return fail();
  t.sub_program = out;
  return out;
}

}  // namespace detail

// Annotates every node with its sub-program; the root program is closed
// (fallback arguments filled). Returns nullopt and the failing span when a
// composition does not type-check.
inline std::optional<SpanTree> annotate_programs(const SpanTree& tree, const DomainSchema& s,
                                                 Span* failed = nullptr) {
  SpanTree t = tree;
  auto p = detail::node_program(t, s, failed);
  if (!p) {
    if (failed && tree.is_leaf()) *failed = tree.span;
    return std::nullopt;
  }
  auto closed = close_program(*p, s);
  if (!closed) {
    if (failed) *failed = t.span;
    return std::nullopt;
  }
  t.sub_program = std::move(closed);
  return t;
}

inline std::optional<Program> try_program_of_tree(const SpanTree& tree, const DomainSchema& s,
                                                  Span* failed = nullptr) {
  auto t = annotate_programs(tree, s, failed);
  if (!t) return std::nullopt;
  return t->sub_program;
}

inline Program program_of_tree(const SpanTree& tree, const DomainSchema& s) {
  Span failed = tree.span;
  auto p = try_program_of_tree(tree, s, &failed);
  if (!p) {
    throw CompositionFailure(failed, "composition fails at span (" + std::to_string(failed.start) +
                                         "," + std::to_string(failed.end) + ")");
  }
  return *p;
}

// ---------------------------------------------------------------------------
// Tree serialization

inline json tree_to_json(const SpanTree& t, const DomainSchema& s) {
  json j = {{"span", {t.span.start, t.span.end}}, {"category", s.category_name(t.category)}};
  json kids = json::array();
  for (const auto& c : t.children) kids.push_back(tree_to_json(c, s));
  j["children"] = kids;
  return j;
}

namespace detail {
inline SpanTree tree_node_from_json(const json& j, const DomainSchema& s, bool root) {
  SpanTree t;
  t.span = {j.at("span").at(0).get<int>(), j.at("span").at(1).get<int>()};
  t.category = s.parse_category(j.at("category").get<std::string>());
  t.is_root = root;
  for (const auto& c : j.value("children", json::array()))
    t.children.push_back(tree_node_from_json(c, s, false));
  return t;
}
}  // namespace detail

inline SpanTree tree_from_json(const json& j, const DomainSchema& s) {
  return detail::tree_node_from_json(j, s, true);
}

// Bracketed rendering, e.g. (Join:walk(r) (walk Walk) (r right)).
inline std::string bracketed(const SpanTree& t, const Utterance& u, const DomainSchema& s) {
  std::string out = "(" + s.category_name(t.category);
  if (t.category.is_join() && t.sub_program) out += ":" + to_string(*t.sub_program, s);
  if (t.is_leaf()) {
    out += " " + u.phrase(t.span);
  } else {
    for (const auto& c : t.children) out += " " + bracketed(c, u, s);
  }
  return out + ")";
}

}  // namespace spanparse
