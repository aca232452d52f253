#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <set>

#include "test_util.hpp"

namespace spanparse {
namespace {

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

class Scan : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    schema_ = new DomainSchema(scan::schema());
    items_ = new std::vector<scan::ScanItem>(scan::generate_scan_sp(*schema_));
    examples_ = new std::vector<Example>(scan_examples(*schema_));
  }
  static void TearDownTestSuite() {
    delete schema_;
    delete items_;
    delete examples_;
  }
  const DomainSchema& s() const { return *schema_; }
  Program p(const std::string& text) const { return parse_program(text, s()); }
  std::string run(const std::string& text) const { return scan::ScanExecutor(s()).execute(p(text)).str(); }

  static DomainSchema* schema_;
  static std::vector<scan::ScanItem>* items_;
  static std::vector<Example>* examples_;
};
DomainSchema* Scan::schema_ = nullptr;
std::vector<scan::ScanItem>* Scan::items_ = nullptr;
std::vector<Example>* Scan::examples_ = nullptr;

TEST_F(Scan, CorpusSizeAndUniqueness) {
  EXPECT_EQ(items_->size(), 20910u);
  std::set<std::string> distinct;
  for (const auto& it : *items_) distinct.insert(it.utterance);
  EXPECT_EQ(distinct.size(), items_->size());
}

TEST_F(Scan, WalkAfterTurnItem) {
  const scan::ScanItem* found = nullptr;
  for (const auto& it : *items_)
    if (it.utterance == "walk right after turn opposite left twice") found = &it;
  ASSERT_NE(found, nullptr);
  EXPECT_EQ(to_string(found->program, s()), "after(walk(r),twice(turn(l,op)))");
  EXPECT_EQ(Denotation{found->actions}.str(), "LTURN LTURN LTURN LTURN RTURN WALK");
  EXPECT_EQ(program_of_tree(found->tree, s()), found->program);
}

TEST_F(Scan, BarePrimitive) {
  const scan::ScanItem* found = nullptr;
  for (const auto& it : *items_)
    if (it.utterance == "jump") found = &it;
  ASSERT_NE(found, nullptr);
  EXPECT_EQ(found->program, s().leaf(s().id("jump")));
  EXPECT_EQ(Denotation{found->actions}.str(), "JUMP");
}

TEST_F(Scan, ExecutorSemantics) {
  EXPECT_EQ(run("twice(turn(l,op))"), "LTURN LTURN LTURN LTURN");
  EXPECT_EQ(run("walk(r)"), "RTURN WALK");
  EXPECT_EQ(run("look(l,ar)"), "LTURN LOOK LTURN LOOK LTURN LOOK LTURN LOOK");
  EXPECT_EQ(run("turn(r,ar)"), "RTURN RTURN RTURN RTURN");
  EXPECT_EQ(run("and(jump,thrice(run(l)))"), "JUMP LTURN RUN LTURN RUN LTURN RUN");
  EXPECT_EQ(run("after(jump,run)"), "RUN JUMP");
  EXPECT_EQ(Denotation{scan::interpret_command(words("look around left"))}.str(), run("look(l,ar)"));
  EXPECT_THROW(run("turn"), ExecError);
  EXPECT_THROW(run("twice"), ExecError);
  EXPECT_THROW(run("walk(_,op)"), ExecError);
}

// Three independent views of each item agree: the generator's actions, the
// executed program, and a word-level interpreter.
TEST_F(Scan, GeneratorExecutorAndInterpreterAgree) {
  scan::ScanExecutor exec(s());
  std::size_t agree = 0;
  for (const auto& it : *items_) {
    auto a = exec.execute(it.program).values;
    agree += (a == it.actions && a == scan::interpret_command(words(it.utterance)));
  }
  EXPECT_EQ(agree, items_->size());
}

TEST_F(Scan, GoldTreesYieldTheGoldProgram) {
  std::size_t ok = 0;
  for (const auto& it : *items_) {
    ok += !grammar_violation(it.tree, false).has_value() && try_program_of_tree(it.tree, s()) == it.program &&
          it.tree.span.end == static_cast<int>(words(it.utterance).size());
  }
  EXPECT_EQ(ok, items_->size());
}

TEST_F(Scan, IidSplitSizes) {
  Partition pt = split_iid(*examples_, 1);
  EXPECT_EQ(pt.train.size(), 13383u);
  EXPECT_EQ(pt.dev.size(), 3345u);
  EXPECT_EQ(pt.test.size(), 4182u);
}

std::multiset<std::string> utterances(const std::vector<Example>& xs) {
  std::multiset<std::string> out;
  for (const auto& x : xs) out.insert(x.utterance.raw_text);
  return out;
}

void expect_partition(const std::vector<Example>& all, const Partition& pt) {
  auto u = utterances(pt.train);
  auto d = utterances(pt.dev);
  auto t = utterances(pt.test);
  u.insert(d.begin(), d.end());
  u.insert(t.begin(), t.end());
  EXPECT_EQ(u, utterances(all));
}

bool has_word(const Example& x, const std::string& w) {
  return std::find(x.utterance.tokens.begin(), x.utterance.tokens.end(), w) != x.utterance.tokens.end();
}
bool has_around_right(const Example& x) {
  const auto& t = x.utterance.tokens;
  for (std::size_t k = 0; k + 1 < t.size(); ++k)
    if (t[k] == "around" && t[k + 1] == "right") return true;
  return false;
}

TEST_F(Scan, RightSplitMembership) {
  Partition pt = split_scan_primitive(*examples_, SplitKind::Right, 1);
  expect_partition(*examples_, pt);
  bool turn_right = false;
  for (const auto& x : pt.train) {
    if (x.utterance.raw_text == "turn right") turn_right = true;
    else EXPECT_FALSE(has_word(x, "right")) << x.utterance.raw_text;
  }
  EXPECT_TRUE(turn_right);
  for (const auto& x : pt.dev) EXPECT_FALSE(has_word(x, "right"));
  for (const auto& x : pt.test) EXPECT_TRUE(has_word(x, "right"));
  EXPECT_EQ(pt.test.size(), 14354u);
  EXPECT_EQ(pt.dev.size(), (pt.dev.size() + pt.train.size() - 1) / 5);
}

TEST_F(Scan, AroundRightSplitMembership) {
  Partition pt = split_scan_primitive(*examples_, SplitKind::AroundRight, 1);
  expect_partition(*examples_, pt);
  for (const auto& x : pt.train) EXPECT_FALSE(has_around_right(x));
  for (const auto& x : pt.dev) EXPECT_FALSE(has_around_right(x));
  bool found = false;
  for (const auto& x : pt.test) {
    EXPECT_TRUE(has_around_right(x));
    found |= x.utterance.raw_text == "jump around right twice";
  }
  EXPECT_TRUE(found);
  EXPECT_EQ(pt.test.size(), 5685u);
  EXPECT_EQ(pt.dev.size(), (pt.dev.size() + pt.train.size()) / 5);
}

TEST_F(Scan, SplitsAreSeedDeterministic) {
  auto a = split_iid(*examples_, 3), b = split_iid(*examples_, 3), c = split_iid(*examples_, 4);
  EXPECT_EQ(utterances(a.test), utterances(b.test));
  EXPECT_NE(utterances(a.test), utterances(c.test));
  EXPECT_THROW(split_scan_primitive(*examples_, SplitKind::Iid, 1), DatasetError);
}

TEST_F(Scan, DenotationAccuracyCountsEquivalentPrograms) {
  scan::ScanExecutor exec(s());
  Program gold = p("twice(walk(l))");
  EXPECT_EQ(denotation_accuracy({gold}, {gold}, exec), 1.0);
  EXPECT_EQ(denotation_accuracy({p("and(walk(l),walk(l))")}, {gold}, exec), 1.0);
  EXPECT_EQ(denotation_accuracy({std::nullopt}, {gold}, exec), 0.0);
  EXPECT_EQ(denotation_accuracy({p("walk(l)"), gold}, {gold, gold}, exec), 0.5);
  EXPECT_EQ(denotation_accuracy({p("turn")}, {gold}, exec), 0.0);  // execution error counts as wrong
}

TEST_F(Scan, JsonlRoundTrip) {
  auto dir = std::filesystem::temp_directory_path() / "spanparse_data_test";
  std::filesystem::create_directories(dir);
  std::vector<Example> some(examples_->begin(), examples_->begin() + 50);
  write_jsonl((dir / "x.jsonl").string(), some, s());
  auto back = read_jsonl((dir / "x.jsonl").string(), s());
  ASSERT_EQ(back.size(), some.size());
  for (std::size_t k = 0; k < some.size(); ++k) {
    EXPECT_EQ(back[k].utterance.tokens, some[k].utterance.tokens);
    EXPECT_EQ(back[k].program, some[k].program);
    EXPECT_EQ(back[k].tree, some[k].tree);
    EXPECT_EQ(back[k].denotation, some[k].denotation);
  }
  {
    std::ofstream bad(dir / "bad.jsonl");
    bad << "{\"utterance\": \"walk\", \"program\": \"walk(\"}\n";
  }
  EXPECT_THROW(read_jsonl((dir / "bad.jsonl").string(), s()), DatasetError);
  EXPECT_THROW(read_jsonl((dir / "missing.jsonl").string(), s()), DatasetError);
  std::filesystem::remove_all(dir);
}

TEST(Metrics, LabeledSpanF1) {
  auto s = testing::toy_schema();
  SpanTree gold = testing::tree_of(3, {{1, 3, "Join"}, {1, 1, "a"}, {2, 3, "Join"}, {2, 2, "p"}}, s);
  SpanTree extra = testing::tree_of(3, {{1, 3, "Join"}, {1, 1, "a"}, {2, 3, "Join"}, {2, 2, "p"}, {3, 3, "b"}}, s);
  SpanTree other = testing::tree_of(3, {{1, 3, "Join"}, {1, 2, "Join"}, {1, 1, "b"}, {2, 2, "q"}, {3, 3, "r"}}, s, false);
  EXPECT_EQ(labeled_span_f1(gold, gold), 1.0);
  EXPECT_NEAR(labeled_span_f1(extra, gold), 8.0 / 9.0, 1e-15);
  // Only the root Join is shared.
  SpanCounts c = span_counts(other, gold);
  EXPECT_EQ(c.matched, 1u);
  SpanTree disjoint = as_root(SpanTree::leaf({1, 3}, Category::of(s.id("b"))));
  EXPECT_EQ(labeled_span_f1(disjoint, gold), 0.0);
  SpanCounts none = span_counts(std::nullopt, gold);
  EXPECT_EQ(none.f1(), 0.0);
  EXPECT_EQ(none.gold, 4u);
}

class Geo : public ::testing::Test {
 protected:
  geo::GeoKb kb = geo::mini_kb();
  DomainSchema s = geo::schema(kb);
  geo::GeoExecutor exec{s, kb};
  std::string run(const std::string& text) const { return exec.execute(parse_program(text, s)).str(); }
};

TEST_F(Geo, KbIsConsistent) {
  EXPECT_EQ(kb.states.size(), 10u);
  EXPECT_NO_THROW(kb.validate());
  auto bad = kb;
  bad.states[0].borders.insert("alaska");
  EXPECT_THROW(bad.validate(), geo::KbError);
  auto neg = kb;
  neg.states[1].population = -1;
  EXPECT_THROW(neg.validate(), geo::KbError);
  EXPECT_EQ(geo::GeoKb::from_json(kb.to_json()).to_json(), kb.to_json());
}

TEST_F(Geo, CapitalsOfNewYorkNeighbours) {
  // Hand-computed from the bundled KB: the capitals of New York's neighbours.
  EXPECT_EQ(run("capital(loc_2(state(next_to_1(stateid('new york')))))"),
            "city:boston city:harrisburg city:hartford city:montpelier city:trenton");
}

TEST_F(Geo, MostPopulousState) {
  std::string most;
  double pop = -1;
  for (const auto& st : kb.states)
    if (st.population > pop) {
      pop = st.population;
      most = st.name;
    }
  EXPECT_EQ(most, "california");
  EXPECT_EQ(run("largest_one(pop_1(state(all)))"), "state:california");
}

TEST_F(Geo, SetSemantics) {
  EXPECT_EQ(run("count(state(all))"), "10");
  EXPECT_EQ(run("state(stateid('utah'))"), "state:utah");
  EXPECT_EQ(run("loc_1(cityid('albany'))"), "state:new york");
  const std::string a = run("state(next_to_2(stateid('new york')))");
  EXPECT_EQ(a, run("state(next_to_2(stateid('new york')))"));
  EXPECT_EQ(a, run("next_to_1(stateid('new york'))"));
  EXPECT_THROW(run("next_to_1"), ExecError);

  geo::GeoKb empty;
  geo::GeoExecutor none(s, empty);
  EXPECT_TRUE(none.execute(parse_program("state(all)", s)).values.empty());
}

TEST_F(Geo, CorpusProgramsExecute) {
  auto xs = geo_examples(s, kb);
  EXPECT_GT(xs.size(), 150u);
  for (const auto& x : xs) {
    EXPECT_TRUE(well_typed(x.program, s));
    ASSERT_TRUE(x.denotation);
    EXPECT_FALSE(x.denotation->values.empty()) << x.utterance.raw_text;
  }
}

TEST_F(Geo, TemplateSplitKeepsTemplatesTogether) {
  auto xs = geo_examples(s, kb);
  for (std::uint64_t seed : {1, 2, 3}) {
    Partition pt = split_template(xs, s, seed);
    expect_partition(xs, pt);
    std::map<std::string, int> where;
    int part = 0;
    for (const auto* side : {&pt.train, &pt.dev, &pt.test}) {
      for (const auto& x : *side) {
        auto [it, fresh] = where.emplace(program_template(x.program, s), part);
        EXPECT_EQ(it->second, part) << it->first;
      }
      ++part;
    }
    EXPECT_FALSE(pt.test.empty());
    EXPECT_FALSE(pt.dev.empty());
  }
  // Two examples differing only in the entity share a template.
  EXPECT_EQ(program_template(parse_program("next_to_1(stateid('utah'))", s), s),
            program_template(parse_program("next_to_1(stateid('new york'))", s), s));

  std::vector<Example> one;
  for (const auto& st : kb.states)
    one.push_back(make_example("border " + st.name, parse_program("next_to_1(stateid('" + st.name + "'))", s)));
  Partition single = split_template(one, s, 1);
  EXPECT_EQ(single.train.size(), one.size());
}

TEST_F(Geo, LengthSplit) {
  auto base = geo_examples(s, kb);
  std::vector<Example> xs;
  for (std::size_t k = 0; xs.size() < 880; ++k) xs.push_back(base[k % base.size()]);
  Partition pt = split_length(xs, s, 1);
  expect_partition(xs, pt);
  EXPECT_EQ(pt.test.size(), 280u);
  EXPECT_EQ(pt.dev.size(), 60u);
  int min_test = 1 << 30, max_rest = 0, min_all = 1 << 30;
  for (const auto& x : pt.test) min_test = std::min(min_test, program_length(x.program, s));
  for (const auto* side : {&pt.train, &pt.dev})
    for (const auto& x : *side) max_rest = std::max(max_rest, program_length(x.program, s));
  for (const auto& x : xs) min_all = std::min(min_all, program_length(x.program, s));
  EXPECT_GE(min_test, max_rest);
  EXPECT_GT(min_test, min_all);
}

TEST(ProgramLength, CountsPrintedTokens) {
  auto s = geo::schema(geo::mini_kb());
  EXPECT_EQ(program_length(parse_program("stateid('new york')", s), s), 1);
  EXPECT_EQ(program_length(parse_program("next_to_1(stateid('utah'))", s), s), 4);
  EXPECT_EQ(program_length(parse_program("largest_one(pop_1(state(all)))", s), s), 10);
  auto sc = scan::schema();
  EXPECT_EQ(program_length(parse_program("jump", sc), sc), 1);
  EXPECT_EQ(program_length(parse_program("turn(l,op)", sc), sc), 6);
}

}  // namespace
}  // namespace spanparse
