#include <catch2/catch_amalgamated.hpp>

#include "mso2d/eval.hpp"
#include "mso2d/signature.hpp"
#include "support/generators.hpp"

using namespace mso2d;
using mso2d::testing::ConfigGen;
using mso2d::testing::FormulaGen;

namespace {

Configuration single_black(Position p) {
  Configuration x = mso2d::testing::blank_squares();
  x.set(p, "■");
  return x;
}

Formula parse2(const std::string& text) {
  return parse_formula(text, mso2d::testing::squares());
}

}  // namespace

TEST_CASE("parameter schedule follows the doubling recurrence") {
  auto s0 = params_schedule(0);
  REQUIRE(s0.size() == 1);
  CHECK(s0[0] == LevelParams{3, 2});

  auto s1 = params_schedule(1);
  REQUIRE(s1.size() == 2);
  CHECK(s1[1] == LevelParams{3, 2});
  CHECK(s1[0] == LevelParams{5, 11});

  auto s2 = params_schedule(2);
  REQUIRE(s2.size() == 3);
  CHECK(s2[2] == LevelParams{3, 2});
  CHECK(s2[1] == LevelParams{5, 11});
  CHECK(s2[0] == LevelParams{9, 36});

  CHECK(schedule_string(s2) == "[(3,2), (5,11), (9,36)]");
}

TEST_CASE("signatures extracted from pinned configurations are consistent") {
  Configuration x = single_black({0, 0});
  std::vector<Position> pins = {{1, 1}};
  Signature sig = signature_of(LayeredView(x, pins), 3, 2);
  CHECK(sig.layers == 1);
  CHECK(is_consistent(sig));
  auto blocks = glued_blocks(sig);
  REQUIRE(blocks);
  CHECK((*blocks)[0].side == 5);
  // the centre of the block carries the pin
  CHECK(cell_layer((*blocks)[0].at(2, 2), 1));
}

TEST_CASE("single-pattern signatures at side one are consistent") {
  Alphabet a = mso2d::testing::squares();
  Signature sig;
  sig.n = 1;
  sig.k = 2;
  sig.layers = 1;
  sig.alphabet = a;
  WindowKey marked;
  marked.side = 1;
  marked.cells = {make_cell(1, 1)};
  WindowKey bg;
  bg.side = 1;
  bg.cells = {make_cell(0, 0)};
  sig.counts = {{bg, 2}, {marked, 1}};
  std::sort(sig.counts.begin(), sig.counts.end());
  CHECK(is_consistent(sig));

  // two distinct marked patterns at the same offset break uniqueness
  Signature bad = sig;
  WindowKey marked2;
  marked2.side = 1;
  marked2.cells = {make_cell(0, 1)};
  bad.counts.push_back({marked2, 1});
  std::sort(bad.counts.begin(), bad.counts.end());
  CHECK_FALSE(is_consistent(bad));
}

TEST_CASE("grid-realized extension pairs satisfy the extension relation") {
  // x at level 0 with one pin placed -> y at level 1; the signatures must be
  // related by the extension conditions.
  for (Position pin : {Position{0, 0}, Position{1, 0}, Position{4, 4}, Position{-3, 2}}) {
    Configuration x = single_black({0, 0});
    Signature f = signature_of(LayeredView(x), 5, 11);
    std::vector<Position> pins = {pin};
    Signature g = signature_of(LayeredView(x, pins), 3, 2);
    CAPTURE(pin.a, pin.b);
    CHECK(is_consistent(g));
    CHECK(is_extension(g, f));
  }
}

TEST_CASE("deleting a marked pattern breaks the extension relation") {
  Configuration x = single_black({0, 0});
  Signature f = signature_of(LayeredView(x), 5, 11);
  std::vector<Position> pins = {{1, 1}};
  Signature g = signature_of(LayeredView(x, pins), 3, 2);
  REQUIRE(is_extension(g, f));
  // remove one marked count-1 pattern
  Signature broken = g;
  for (std::size_t i = 0; i < broken.counts.size(); ++i) {
    bool marked = false;
    for (Cell c : broken.counts[i].first.cells) marked |= cell_layer(c, 1);
    if (marked && broken.counts[i].second == 1) {
      broken.counts.erase(broken.counts.begin() + i);
      break;
    }
  }
  CHECK_FALSE(is_extension(broken, f));
}

TEST_CASE("extension shape mismatches are rejected") {
  Configuration x = single_black({0, 0});
  Signature f = signature_of(LayeredView(x), 5, 11);
  Signature g = signature_of(LayeredView(x), 3, 2);  // same layer count: not an extension shape
  CHECK_THROWS_AS(is_extension(g, f), std::invalid_argument);
}

TEST_CASE("extension enumeration over the blank plane") {
  Configuration x = mso2d::testing::blank_squares();
  Signature f = signature_of(LayeredView(x), 5, 11);
  auto result = enumerate_consistent_extensions(f);
  CHECK_FALSE(result.truncated);
  // placing the mark over background is the only possibility
  REQUIRE(result.extensions.size() == 1);
  const Signature& g = result.extensions[0];
  CHECK(g.layers == 1);
  CHECK(g.n == 3);
  CHECK(g.k == 2);
  // nine marked patterns and the background block
  int marked = 0;
  for (auto& [w, c] : g.counts) {
    bool has = false;
    for (Cell cell : w.cells) has |= cell_layer(cell, 1);
    if (has) {
      ++marked;
      CHECK(c == 1);
    }
  }
  CHECK(marked == 9);

  // and the enumeration matches brute force over concrete placements
  std::vector<Signature> brute;
  for (Coord a = -5; a <= 5; ++a)
    for (Coord b = -5; b <= 5; ++b) {
      std::vector<Position> pins = {{a, b}};
      Signature s = signature_of(LayeredView(x, pins), 3, 2);
      bool dup = false;
      for (auto& t : brute) dup |= (t == s);
      if (!dup) brute.push_back(s);
    }
  REQUIRE(brute.size() == 1);
  CHECK(brute[0] == g);
}

TEST_CASE("extension enumeration distinguishes on-mark and off-mark placements") {
  Configuration x = single_black({0, 0});
  Signature f = signature_of(LayeredView(x), 5, 11);
  auto result = enumerate_consistent_extensions(f);
  CHECK_FALSE(result.truncated);
  CHECK(result.extensions.size() >= 2);

  // brute-force collector over concrete pin placements
  std::vector<Signature> brute;
  for (Coord a = -7; a <= 7; ++a)
    for (Coord b = -7; b <= 7; ++b) {
      std::vector<Position> pins = {{a, b}};
      Signature s = signature_of(LayeredView(x, pins), 3, 2);
      bool dup = false;
      for (auto& t : brute) dup |= (t == s);
      if (!dup) brute.push_back(s);
    }
  // every brute signature appears in the enumeration and vice versa
  CHECK(brute.size() == result.extensions.size());
  for (auto& s : brute) {
    bool found = false;
    for (auto& g : result.extensions) found |= (g == s);
    CHECK(found);
  }
}

TEST_CASE("class evaluation of the one-mark formula") {
  Formula f = builtin_exnonsub();
  ClassUnion cu(f);
  CHECK(cu.schedule().size() == 3);
  CHECK(cu.schedule()[0] == LevelParams{9, 36});

  EvalVerdict one = evaluate_via_classes(single_black({0, 0}), cu);
  REQUIRE_FALSE(one.is_unknown());
  CHECK(one.is_true());

  EvalVerdict blank = evaluate_via_classes(mso2d::testing::blank_squares(), cu);
  CHECK(blank.is_false());

  Configuration two = single_black({0, 0});
  two.set({5, 5}, "■");
  CHECK(evaluate_via_classes(two, cu).is_false());

  Configuration twoclose = single_black({0, 0});
  twoclose.set({1, 0}, "■");
  CHECK(evaluate_via_classes(twoclose, cu).is_false());
}

TEST_CASE("class evaluation of an existential formula") {
  Formula f = parse2("E x. ■(x)");
  ClassUnion cu(f);
  CHECK(evaluate_via_classes(single_black({3, -2}), cu).is_true());
  CHECK(evaluate_via_classes(mso2d::testing::blank_squares(), cu).is_false());
}

TEST_CASE("class invariance: equivalent configurations get equal verdicts") {
  Formula f = builtin_exnonsub();
  ClassUnion cu(f);
  Configuration a = single_black({0, 0});
  Configuration b = single_black({40, -17});
  Signature sa = signature_of(a, 9, 36);
  Signature sb = signature_of(b, 9, 36);
  REQUIRE(sa == sb);
  CHECK(evaluate_via_classes(a, cu).value == evaluate_via_classes(b, cu).value);
}

TEST_CASE("membership is memoization-stable") {
  Formula f = builtin_exnonsub();
  ClassUnion cu(f);
  Signature s = signature_of(single_black({0, 0}), 9, 36);
  EvalVerdict v1 = cu.membership(s);
  EvalVerdict v2 = cu.membership(s);
  CHECK(v1.value == v2.value);
  auto stats = cu.cache_stats();
  CHECK(stats.hits >= 1);
}

TEST_CASE("class engine agrees with the oracle on one-quantifier formulas") {
  FormulaGen fgen(2024);
  ConfigGen cgen(2025);
  int determinate = 0;
  for (int i = 0; i < 25; ++i) {
    Formula f = fgen.closed(1, 1, 4);
    ClassUnion cu(f);
    for (int j = 0; j < 4; ++j) {
      Configuration x = cgen.window(3);
      EvalVerdict v = evaluate_via_classes(x, cu);
      if (v.is_unknown()) continue;
      ++determinate;
      bool expect = evaluate_oracle(x, f);
      CAPTURE(print_formula(f), print_configuration(x));
      CHECK(v.is_true() == expect);
    }
  }
  CHECK(determinate >= 95);
}

TEST_CASE("class engine agrees with the oracle on two-quantifier formulas") {
  FormulaGen fgen(31337);
  ConfigGen cgen(31338);
  for (int i = 0; i < 8; ++i) {
    Formula f = fgen.closed(2, 1, 5);
    ClassUnion cu(f);
    for (int j = 0; j < 2; ++j) {
      Configuration x = cgen.window(3);
      EvalVerdict v = evaluate_via_classes(x, cu);
      REQUIRE_FALSE(v.is_unknown());
      bool expect = evaluate_oracle(x, f);
      CAPTURE(print_formula(f), print_configuration(x));
      CHECK(v.is_true() == expect);
    }
  }
}

TEST_CASE("class engine rejects improper inputs") {
  CHECK_THROWS_AS(ClassUnion(builtin_fin()), std::invalid_argument);       // second order
  CHECK_THROWS_AS(ClassUnion(parse2("■(x)")), std::invalid_argument);     // open
}
