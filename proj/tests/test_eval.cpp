#include <catch2/catch_amalgamated.hpp>

#include "mso2d/eval.hpp"
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

TEST_CASE("oracle on the one-mark formula") {
  Formula f = builtin_exnonsub();
  CHECK(evaluate_oracle(single_black({0, 0}), f));
  CHECK(evaluate_oracle(single_black({17, -4}), f));
  CHECK_FALSE(evaluate_oracle(mso2d::testing::blank_squares(), f));
  Configuration two = single_black({0, 0});
  two.set({7, 3}, "■");
  CHECK_FALSE(evaluate_oracle(two, f));
}

TEST_CASE("oracle tautology and contradiction") {
  CHECK(evaluate_oracle(mso2d::testing::blank_squares(), parse2("A v. v = v")));
  CHECK_FALSE(evaluate_oracle(mso2d::testing::blank_squares(), parse2("E v. ~(v = v)")));
}

TEST_CASE("oracle rejects open and second-order input") {
  CHECK_THROWS_AS(evaluate_oracle(mso2d::testing::blank_squares(), parse2("■(x)")),
                  std::invalid_argument);
  CHECK_THROWS_AS(evaluate_oracle(mso2d::testing::blank_squares(), builtin_fin()),
                  std::invalid_argument);
}

TEST_CASE("negation duality on random instances") {
  FormulaGen fgen(101);
  ConfigGen cgen(202);
  for (int i = 0; i < 60; ++i) {
    Formula f = fgen.closed(2, 1);
    Configuration x = cgen.window(3);
    bool pos = evaluate_oracle(x, f);
    bool neg = evaluate_oracle(x, Formula{f.alphabet, mk_not(f.root)});
    CHECK(pos == !neg);
  }
}

TEST_CASE("shift invariance of oracle evaluation") {
  FormulaGen fgen(303);
  ConfigGen cgen(404);
  std::mt19937_64 rng(505);
  for (int i = 0; i < 60; ++i) {
    Formula f = fgen.closed(2, 1);
    Configuration x = cgen.window(3);
    Position v{static_cast<Coord>(rng() % 21) - 10, static_cast<Coord>(rng() % 21) - 10};
    CHECK(evaluate_oracle(x, f) == evaluate_oracle(shift(x, v), f));
  }
}

TEST_CASE("window stabilization corroborates the oracle") {
  FormulaGen fgen(606);
  ConfigGen cgen(707);
  int corroborated = 0;
  for (int i = 0; i < 40; ++i) {
    Formula f = fgen.closed(2, 1);
    Configuration x = cgen.window(3);
    bool w1 = evaluate_naive_window(x, f, 8);
    bool w2 = evaluate_naive_window(x, f, 9);
    bool w3 = evaluate_naive_window(x, f, 10);
    if (w1 == w2 && w2 == w3) {
      ++corroborated;
      CHECK(evaluate_oracle(x, f) == w1);
    }
  }
  CHECK(corroborated > 20);  // most sampled instances stabilize
}

TEST_CASE("oracle agreement is preserved by the syntactic transformations") {
  FormulaGen fgen(808);
  ConfigGen cgen(909);
  for (int i = 0; i < 50; ++i) {
    Formula f = fgen.closed_scattered(2, 3, 5);
    Configuration x = cgen.window(3);
    bool direct = evaluate_oracle(x, f);
    CHECK(evaluate_oracle(x, reduce_radius_to_one(f)) == direct);
    CHECK(evaluate_oracle(x, to_prenex(f)) == direct);
    CHECK(evaluate_oracle(x, to_prenex(reduce_radius_to_one(f))) == direct);
  }
}

TEST_CASE("bounded second-order evaluation of the finiteness formula") {
  Formula fin = builtin_fin();
  Configuration x = mso2d::testing::blank_squares();

  SetValue E;
  E.finite = {{0, 0}};
  SOWitnessFamily fam;
  fam.lo = {-2, -2};
  fam.hi = {2, 2};
  fam.max_subset_size = 1;

  EvalVerdict v = evaluate_bounded_mso(x, fin, fam, {{"E", E}});
  CHECK(v.is_true());

  SECTION("an infinite set is never reported finite") {
    SetValue row;
    row.plane = SetValue::Plane::HalfN;
    row.anchor = {0, 0};
    EvalVerdict w = evaluate_bounded_mso(x, fin, fam, {{"E", row}});
    CHECK_FALSE(w.is_true());
  }
}

TEST_CASE("bounded evaluation finds trivial set witnesses") {
  // E1 X. E v. v in X
  Alphabet a = mso2d::testing::squares();
  Formula f{a, mk_exists2("X", mk_exists("v", mk_member(Term{"v", {}}, "X")))};
  SOWitnessFamily fam;
  fam.lo = {-1, -1};
  fam.hi = {1, 1};
  EvalVerdict v = evaluate_bounded_mso(mso2d::testing::blank_squares(), f, fam);
  CHECK(v.is_true());

  // A1 X. E v. v in X is falsified by the empty candidate
  Formula g{a, mk_forall2("X", mk_exists("v", mk_member(Term{"v", {}}, "X")))};
  EvalVerdict w = evaluate_bounded_mso(mso2d::testing::blank_squares(), g, fam);
  CHECK(w.is_false());
  CHECK(w.note.find("counterexample") != std::string::npos);
}

TEST_CASE("unknown verdicts carry provenance") {
  // A true universal claim cannot be certified by a finite family.
  Alphabet a = mso2d::testing::squares();
  NodePtr taut = mk_or(mk_not(mk_member(Term{"v", {}}, "X")), mk_member(Term{"v", {}}, "X"));
  Formula f{a, mk_forall2("X", mk_forall("v", taut))};
  SOWitnessFamily fam;
  fam.lo = {0, 0};
  fam.hi = {0, 0};
  fam.include_planes = false;
  fam.include_complements = false;
  EvalVerdict v = evaluate_bounded_mso(mso2d::testing::blank_squares(), f, fam);
  CHECK(v.is_unknown());
  CHECK_FALSE(v.note.empty());
}
