#pragma once

// A FunQL subset over a small geography knowledge base: schema, manual
// lexicon, set-semantics executor and a templated question corpus.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "spanparse/core.hpp"
#include "spanparse/data/executor.hpp"
#include "spanparse/lexicon.hpp"
#include "spanparse/typesys.hpp"

namespace spanparse::geo {

class KbError : public Error {
 public:
  using Error::Error;
};

struct State {
  std::string name, capital;
  double population = 0, area = 0;
  std::set<std::string> borders;
};
struct City {
  std::string name, state;
  double population = 0;
};
struct River {
  std::string name;
  double length = 0;
  std::set<std::string> states;
};
struct Place {
  std::string name, state;
  double elevation = 0;
};

// Borders are symmetric, populations and areas positive, every referenced
// state exists.
struct GeoKb {
  std::vector<State> states;
  std::vector<City> cities;
  std::vector<River> rivers;
  std::vector<Place> places;

  const State* state(const std::string& name) const {
    for (const auto& s : states)
      if (s.name == name) return &s;
    return nullptr;
  }
  const City* city(const std::string& name) const {
    for (const auto& c : cities)
      if (c.name == name) return &c;
    return nullptr;
  }

  void validate() const {
    for (const auto& s : states) {
      if (s.population <= 0 || s.area <= 0) throw KbError("non-positive population or area for " + s.name);
      for (const auto& b : s.borders) {
        const State* o = state(b);
        if (!o) throw KbError(s.name + " borders unknown state " + b);
        if (!o->borders.count(s.name)) throw KbError("asymmetric border " + s.name + " / " + b);
      }
    }
    for (const auto& c : cities) {
      if (c.population <= 0) throw KbError("non-positive population for " + c.name);
      if (!state(c.state)) throw KbError("city " + c.name + " in unknown state " + c.state);
    }
    for (const auto& r : rivers)
      for (const auto& s : r.states)
        if (!state(s)) throw KbError("river " + r.name + " in unknown state " + s);
    for (const auto& p : places)
      if (!state(p.state)) throw KbError("place " + p.name + " in unknown state " + p.state);
  }

  json to_json() const {
    json j = {{"states", json::array()}, {"cities", json::array()}, {"rivers", json::array()}, {"places", json::array()}};
    for (const auto& s : states)
      j["states"].push_back({{"name", s.name}, {"capital", s.capital}, {"population", s.population},
                             {"area", s.area}, {"borders", s.borders}});
    for (const auto& c : cities) j["cities"].push_back({{"name", c.name}, {"state", c.state}, {"population", c.population}});
    for (const auto& r : rivers) j["rivers"].push_back({{"name", r.name}, {"length", r.length}, {"states", r.states}});
    for (const auto& p : places) j["places"].push_back({{"name", p.name}, {"state", p.state}, {"elevation", p.elevation}});
    return j;
  }

  static GeoKb from_json(const json& j) {
    GeoKb kb;
    for (const auto& s : j.value("states", json::array()))
      kb.states.push_back({s.at("name"), s.at("capital"), s.at("population"), s.at("area"),
                           s.value("borders", std::set<std::string>{})});
    for (const auto& c : j.value("cities", json::array())) kb.cities.push_back({c.at("name"), c.at("state"), c.at("population")});
    for (const auto& r : j.value("rivers", json::array()))
      kb.rivers.push_back({r.at("name"), r.value("length", 0.0), r.at("states").get<std::set<std::string>>()});
    for (const auto& p : j.value("places", json::array()))
      kb.places.push_back({p.at("name"), p.at("state"), p.value("elevation", 0.0)});
    kb.validate();
    return kb;
  }

  static GeoKb load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw KbError("cannot open knowledge base " + path);
    return from_json(json::parse(in));
  }
};

// Ten states; populations and areas (square miles) from the 2010 census.
inline GeoKb mini_kb() {
  GeoKb kb;
  kb.states = {
      {"new york", "albany", 19378102, 54555, {"vermont", "massachusetts", "connecticut", "new jersey", "pennsylvania"}},
      {"vermont", "montpelier", 625741, 9616, {"new york", "massachusetts"}},
      {"massachusetts", "boston", 6547629, 10554, {"new york", "vermont", "connecticut"}},
      {"connecticut", "hartford", 3574097, 5543, {"new york", "massachusetts"}},
      {"new jersey", "trenton", 8791894, 8722, {"new york", "pennsylvania"}},
      {"pennsylvania", "harrisburg", 12702379, 46054, {"new york", "new jersey"}},
      {"texas", "austin", 25145561, 268596, {}},
      {"california", "sacramento", 37253956, 163695, {}},
      {"utah", "salt lake city", 2763885, 84897, {}},
      {"alaska", "juneau", 710231, 665384, {}},
  };
  kb.cities = {
      {"albany", "new york", 97856},        {"buffalo", "new york", 261310},
      {"montpelier", "vermont", 7855},      {"burlington", "vermont", 42417},
      {"boston", "massachusetts", 617594},  {"springfield", "massachusetts", 153060},
      {"hartford", "connecticut", 124775},  {"new haven", "connecticut", 129779},
      {"trenton", "new jersey", 84913},     {"newark", "new jersey", 277140},
      {"harrisburg", "pennsylvania", 49528}, {"philadelphia", "pennsylvania", 1526006},
      {"pittsburgh", "pennsylvania", 305704}, {"austin", "texas", 790390},
      {"houston", "texas", 2099451},        {"dallas", "texas", 1197816},
      {"sacramento", "california", 466488}, {"los angeles", "california", 3792621},
      {"san francisco", "california", 805235}, {"salt lake city", "utah", 186440},
      {"provo", "utah", 112488},            {"juneau", "alaska", 31275},
      {"anchorage", "alaska", 291826},
  };
  kb.rivers = {
      {"hudson", 315, {"new york", "new jersey"}},
      {"connecticut", 406, {"vermont", "massachusetts", "connecticut"}},
      {"delaware", 301, {"new york", "new jersey", "pennsylvania"}},
      {"colorado", 1450, {"utah", "california"}},
      {"rio grande", 1896, {"texas"}},
      {"yukon", 1980, {"alaska"}},
  };
  kb.places = {
      {"mount mckinley", "alaska", 6194},
      {"mount whitney", "california", 4421},
      {"mount marcy", "new york", 1629},
      {"death valley", "california", -86},
  };
  return kb;
}

// Schema for a knowledge base: fixed predicates plus one anonymizable
// entity per KB record.
inline json schema_json(const GeoKb& kb) {
  json cs = json::array();
  auto pred = [&](const std::string& name, std::vector<std::string> args, const std::string& result,
                  std::vector<json> defaults = {}) {
    json c = {{"name", name}, {"args", args}, {"result", result}};
    if (!defaults.empty()) c["defaults"] = defaults;
    cs.push_back(c);
  };
  pred("capital", {"state"}, "city");
  pred("loc_1", {"any"}, "state");
  pred("loc_2", {"any"}, "any");
  pred("state", {"any"}, "state", {"all"});
  pred("city", {"any"}, "city", {"all"});
  pred("river", {"any"}, "river", {"all"});
  pred("place", {"any"}, "place", {"all"});
  pred("next_to_1", {"state"}, "state");
  pred("next_to_2", {"state"}, "state");
  pred("largest", {"any"}, "any");
  pred("smallest", {"any"}, "any");
  pred("largest_one", {"num"}, "any");
  pred("smallest_one", {"num"}, "any");
  pred("pop_1", {"any"}, "num");
  pred("area_1", {"any"}, "num");
  pred("count", {"any"}, "num");
  cs.push_back({{"name", "all"}, {"result", "any"}, {"phrases", json::array()}, {"anonymize", false}});
  auto entity = [&](const std::string& fn, const std::string& name, const std::string& type) {
    cs.push_back({{"name", fn + "('" + name + "')"}, {"result", type}, {"anonymize", true}});
  };
  for (const auto& s : kb.states) entity("stateid", s.name, "state");
  for (const auto& c : kb.cities) entity("cityid", c.name, "city");
  for (const auto& r : kb.rivers) entity("riverid", r.name, "river");
  for (const auto& p : kb.places) entity("placeid", p.name, "place");
  return {{"domain", "geo"},
          {"types",
           {{{"name", "any"}},
            {{"name", "state"}, {"parents", {"any"}}},
            {{"name", "city"}, {"parents", {"any"}}},
            {{"name", "river"}, {"parents", {"any"}}},
            {{"name", "place"}, {"parents", {"any"}}},
            {{"name", "num"}}}},
          {"constants", cs}};
}

inline DomainSchema schema(const GeoKb& kb) { return DomainSchema::from_json(schema_json(kb)); }

inline const char* kManualLexicon =
    "capital\tcapital\n"
    "capitals\tcapital\n"
    "of\tloc_2\n"
    "in\tloc_2\n"
    "where\tloc_1\n"
    "state\tstate\n"
    "states\tstate\n"
    "city\tcity\n"
    "cities\tcity\n"
    "river\triver\n"
    "rivers\triver\n"
    "place\tplace\n"
    "places\tplace\n"
    "border\tnext_to_1\n"
    "borders\tnext_to_1\n"
    "bordering\tnext_to_2\n"
    "adjacent\tnext_to_2\n"
    "largest\tlargest\n"
    "biggest\tlargest\n"
    "smallest\tsmallest\n"
    "most\tlargest_one\n"
    "least\tsmallest_one\n"
    "fewest\tsmallest_one\n"
    "population\tpop_1\n"
    "people\tpop_1\n"
    "area\tarea_1\n"
    "how many\tcount\n";

inline Lexicon lexicon(const DomainSchema& s, bool with_manual = true) {
  Lexicon lex = Lexicon::auto_entities(s);
  if (with_manual) {
    std::istringstream in(kManualLexicon);
    lex.read_manual(in, s);
  }
  return lex;
}

class GeoExecutor : public Executor {
 public:
  GeoExecutor(const DomainSchema& s, GeoKb kb) : s_(s), kb_(std::move(kb)) {}

  // Entities render as "kind:name", numbers in shortest round-trip form.
  Denotation execute(const Program& z) const override {
    Denotation d;
    for (const auto& v : eval(z)) d.values.push_back(render(v));
    std::sort(d.values.begin(), d.values.end());
    d.values.erase(std::unique(d.values.begin(), d.values.end()), d.values.end());
    return d;
  }

  const GeoKb& kb() const { return kb_; }

 private:
  // kind is one of state, city, river, place, num. A value produced by
  // pop_1/area_1 keeps the entity and carries its measure.
  struct Value {
    std::string kind, name;
    bool measured = false;
    double measure = 0;
    auto operator<=>(const Value&) const = default;
  };
  using Set = std::set<Value>;

  static std::string number(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.15g", x);
    return buf;
  }
  static std::string render(const Value& v) {
    if (v.kind == "num") return number(v.measure);
    if (v.measured) return number(v.measure);
    return v.kind + ":" + v.name;
  }

  Set everything() const {
    Set out;
    for (const auto& s : kb_.states) out.insert({"state", s.name});
    for (const auto& c : kb_.cities) out.insert({"city", c.name});
    for (const auto& r : kb_.rivers) out.insert({"river", r.name});
    for (const auto& p : kb_.places) out.insert({"place", p.name});
    return out;
  }

  // Size used by largest/smallest: area for states, population for cities,
  // length for rivers, elevation for places.
  std::optional<double> size_of(const Value& v) const {
    if (v.kind == "state") return kb_.state(v.name)->area;
    if (v.kind == "city") return kb_.city(v.name)->population;
    for (const auto& r : kb_.rivers)
      if (v.kind == "river" && r.name == v.name) return r.length;
    for (const auto& p : kb_.places)
      if (v.kind == "place" && p.name == v.name) return p.elevation;
    return std::nullopt;
  }

  Set eval(const Program& z) const {
    if (z.is_hole()) throw ExecError("unsaturated program");
    const auto& dc = s_.constant(z.head);
    const std::string& name = dc.name;
    if (dc.is_entity()) {
      if (name == "all") return everything();
      auto payload = detail::quoted_payload(name);
      if (!payload) throw ExecError("unknown entity " + name);
      std::string kind = name.substr(0, name.find("id('"));
      return {{kind, *payload}};
    }
    for (std::size_t k = 0; k < z.args.size(); ++k)
      if (z.args[k].is_hole() && !dc.slots[k].optional) throw ExecError("unsaturated program: " + name);
    const Set x = eval(z.args.at(0));
    Set out;
    auto strip = [](Value v) {
      v.measured = false;
      v.measure = 0;
      return v;
    };

    if (name == "state" || name == "city" || name == "river" || name == "place") {
      for (const auto& v : x)
        if (v.kind == name) out.insert(strip(v));
    } else if (name == "capital") {
      for (const auto& v : x) {
        if (v.kind == "state") out.insert({"city", kb_.state(v.name)->capital});
        if (v.kind == "city") {
          const City* c = kb_.city(v.name);
          if (c && kb_.state(c->state)->capital == c->name) out.insert(strip(v));
        }
      }
    } else if (name == "loc_2") {
      for (const auto& v : x) {
        if (v.kind != "state") continue;
        for (const auto& c : kb_.cities)
          if (c.state == v.name) out.insert({"city", c.name});
        for (const auto& r : kb_.rivers)
          if (r.states.count(v.name)) out.insert({"river", r.name});
        for (const auto& p : kb_.places)
          if (p.state == v.name) out.insert({"place", p.name});
      }
    } else if (name == "loc_1") {
      for (const auto& v : x) {
        if (v.kind == "city") out.insert({"state", kb_.city(v.name)->state});
        if (v.kind == "place")
          for (const auto& p : kb_.places)
            if (p.name == v.name) out.insert({"state", p.state});
        if (v.kind == "river")
          for (const auto& r : kb_.rivers)
            if (r.name == v.name)
              for (const auto& s : r.states) out.insert({"state", s});
      }
    } else if (name == "next_to_1" || name == "next_to_2") {
      for (const auto& v : x) {
        if (v.kind != "state") throw ExecError(name + " applied to a " + v.kind);
        for (const auto& b : kb_.state(v.name)->borders) out.insert({"state", b});
      }
    } else if (name == "pop_1" || name == "area_1") {
      for (const auto& v : x) {
        Value m = strip(v);
        m.measured = true;
        if (name == "area_1") {
          if (v.kind != "state") continue;
          m.measure = kb_.state(v.name)->area;
        } else if (v.kind == "state") {
          m.measure = kb_.state(v.name)->population;
        } else if (v.kind == "city") {
          m.measure = kb_.city(v.name)->population;
        } else {
          continue;
        }
        out.insert(m);
      }
    } else if (name == "largest_one" || name == "smallest_one") {
      const Value* best = nullptr;
      for (const auto& v : x) {
        if (!v.measured) throw ExecError(name + " needs measured values");
        if (!best || (name == "largest_one" ? v.measure > best->measure : v.measure < best->measure)) best = &v;
      }
      if (best) out.insert(strip(*best));
    } else if (name == "largest" || name == "smallest") {
      const Value* best = nullptr;
      double best_size = 0;
      for (const auto& v : x) {
        auto sz = size_of(v);
        if (!sz) continue;
        if (!best || (name == "largest" ? *sz > best_size : *sz < best_size)) {
          best = &v;
          best_size = *sz;
        }
      }
      if (best) out.insert(strip(*best));
    } else if (name == "count") {
      Value n{"num", ""};
      n.measure = static_cast<double>(x.size());
      out.insert(n);
    } else {
      throw ExecError("cannot execute constant " + name);
    }
    return out;
  }

  const DomainSchema& s_;
  GeoKb kb_;
};

struct GeoItem {
  std::string utterance;
  Program program;
};

// Question templates; {S} {C} {R} {P} are replaced by a state, city, river
// or place name and the matching entity. Only questions with a non-empty
// answer are kept.
inline std::vector<GeoItem> generate_corpus(const DomainSchema& s, const GeoKb& kb) {
  struct Template {
    std::string text, program;
    char slot;
  };
  const std::vector<Template> templates = {
      {"what is the capital of {}", "capital(loc_2({}))", 'S'},
      {"what is the capital of {} ?", "capital(loc_2({}))", 'S'},
      {"what states border {} ?", "state(next_to_2({}))", 'S'},
      {"which states border {}", "state(next_to_2({}))", 'S'},
      {"how many states border {} ?", "count(state(next_to_2({})))", 'S'},
      {"what is the capital of states that {} borders ?", "capital(loc_2(state(next_to_1({}))))", 'S'},
      {"what is the population of {} ?", "pop_1({})", 'S'},
      {"what is the population of {} ?", "pop_1({})", 'C'},
      {"what is the area of {} ?", "area_1({})", 'S'},
      {"what cities are in {} ?", "city(loc_2({}))", 'S'},
      {"how many cities are in {} ?", "count(city(loc_2({})))", 'S'},
      {"what is the largest city in {} ?", "largest(city(loc_2({})))", 'S'},
      {"what is the smallest city in {} ?", "smallest(city(loc_2({})))", 'S'},
      {"what rivers are in {} ?", "river(loc_2({}))", 'S'},
      {"where is {} ?", "loc_1({})", 'C'},
      {"where is {} ?", "loc_1({})", 'P'},
      {"what states does the {} run through ?", "state(loc_1({}))", 'R'},
      {"what city in {} has the most people ?", "largest_one(pop_1(city(loc_2({}))))", 'S'},
  };
  std::vector<std::pair<std::string, std::string>> states, cities, rivers, places;
  for (const auto& x : kb.states) states.emplace_back(x.name, "stateid('" + x.name + "')");
  for (const auto& x : kb.cities) cities.emplace_back(x.name, "cityid('" + x.name + "')");
  for (const auto& x : kb.rivers) rivers.emplace_back(x.name, "riverid('" + x.name + "')");
  for (const auto& x : kb.places) places.emplace_back(x.name, "placeid('" + x.name + "')");

  auto fill = [](std::string pattern, const std::string& value) {
    auto at = pattern.find("{}");
    return pattern.replace(at, 2, value);
  };
  std::vector<GeoItem> out;
  for (const auto& t : templates) {
    const auto& pool = t.slot == 'S' ? states : t.slot == 'C' ? cities : t.slot == 'R' ? rivers : places;
    for (const auto& [word, entity] : pool)
      out.push_back({fill(t.text, word), parse_program(fill(t.program, entity), s)});
  }
  const std::vector<std::pair<std::string, std::string>> fixed = {
      {"what is the largest state ?", "largest(state(all))"},
      {"what is the smallest state ?", "smallest(state(all))"},
      {"state that has the most people ?", "largest_one(pop_1(state(all)))"},
      {"which state has the most people ?", "largest_one(pop_1(state(all)))"},
      {"which state has the least people ?", "smallest_one(pop_1(state(all)))"},
      {"how many states are there ?", "count(state(all))"},
      {"what are the capitals of states bordering the largest state ?",
       "capital(loc_2(state(next_to_2(largest(state(all))))))"},
  };
  for (const auto& [u, p] : fixed) out.push_back({u, parse_program(p, s)});
  // An empty answer would match any other empty answer; drop such questions
  // (e.g. neighbours of a state whose neighbours are not in the KB).
  GeoExecutor exec(s, kb);
  std::erase_if(out, [&](const GeoItem& it) { return exec.execute(it.program).values.empty(); });
  return out;
}

}  // namespace spanparse::geo
