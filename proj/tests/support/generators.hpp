#pragma once

// Seeded random generators shared by the property suites and the acceptance
// runner: closed first-order formulas of bounded radius, and finite-support
// configurations inside a small window.

#include <random>
#include <string>
#include <vector>

#include "mso2d/eval.hpp"
#include "mso2d/formula.hpp"
#include "mso2d/grid.hpp"

namespace mso2d::testing {

inline Alphabet squares() { return Alphabet({"□", "■"}); }

inline Configuration blank_squares() { return Configuration(squares(), "□"); }

struct ConfigGen {
  std::mt19937_64 rng;
  explicit ConfigGen(std::uint64_t seed) : rng(seed) {}

  // Uniform over all configurations with support inside [0,w) x [0,w).
  Configuration window(int w, double density = 0.5) {
    Configuration x = blank_squares();
    std::bernoulli_distribution mark(density);
    for (int a = 0; a < w; ++a)
      for (int b = 0; b < w; ++b)
        if (mark(rng)) x.set({a, b}, "■");
    return x;
  }
};

struct FormulaGen {
  std::mt19937_64 rng;
  Alphabet alphabet = squares();
  explicit FormulaGen(std::uint64_t seed) : rng(seed) {}

  Term term(const std::vector<std::string>& vars, int max_depth) {
    Term t{vars[rng() % vars.size()], {}};
    int d = static_cast<int>(rng() % (max_depth + 1));
    for (int i = 0; i < d; ++i) t = apply_dir(static_cast<Dir>(rng() % 4), std::move(t));
    return t;
  }

  NodePtr atom(const std::vector<std::string>& vars, int max_depth) {
    if (rng() % 2) return mk_eq(term(vars, max_depth), term(vars, max_depth));
    return mk_colour(alphabet.name(rng() % alphabet.size()), term(vars, max_depth));
  }

  NodePtr body(const std::vector<std::string>& vars, int size, int max_depth) {
    if (size <= 1 || rng() % 3 == 0) return atom(vars, max_depth);
    switch (rng() % 3) {
      case 0: return mk_not(body(vars, size - 1, max_depth));
      case 1: return mk_and(body(vars, size / 2, max_depth), body(vars, size / 2, max_depth));
      default: return mk_or(body(vars, size / 2, max_depth), body(vars, size / 2, max_depth));
    }
  }

  // Closed prenex formula with exactly `quantifiers` leading quantifiers.
  Formula closed(int quantifiers, int max_depth, int size = 6) {
    std::vector<std::string> vars;
    for (int i = 0; i < quantifiers; ++i) vars.push_back("v" + std::to_string(i));
    NodePtr f = body(vars, size, max_depth);
    for (int i = quantifiers - 1; i >= 0; --i)
      f = rng() % 2 ? mk_exists(vars[i], f) : mk_forall(vars[i], f);
    return Formula{alphabet, f};
  }

  // Closed formula with quantifiers scattered through the body.
  Formula closed_scattered(int quantifiers, int max_depth, int size = 6) {
    std::vector<std::string> vars;
    for (int i = 0; i < quantifiers; ++i) vars.push_back("v" + std::to_string(i));
    NodePtr f = body(vars, size, max_depth);
    for (int i = quantifiers - 1; i >= 0; --i) {
      NodePtr q = rng() % 2 ? mk_exists(vars[i], f) : mk_forall(vars[i], f);
      if (rng() % 2 && i > 0)
        f = rng() % 2 ? mk_and(q, atom({vars.begin(), vars.begin() + i}, max_depth))
                      : mk_or(q, atom({vars.begin(), vars.begin() + i}, max_depth));
      else
        f = q;
    }
    return Formula{alphabet, f};
  }
};

}  // namespace mso2d::testing
