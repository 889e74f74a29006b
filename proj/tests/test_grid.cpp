#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mso2d/grid.hpp"

using namespace mso2d;

namespace {

Alphabet squares() { return Alphabet({"□", "■"}); }

Configuration blank() { return Configuration(squares(), "□"); }

Configuration single_black(Position p) {
  Configuration x = blank();
  x.set(p, "■");
  return x;
}

Pattern full_square(const Alphabet& a, int n, const std::vector<std::string>& rows_north_first) {
  // rows given north to south for readability
  Pattern P(a, n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      P.set(x, n - 1 - y, a.index(std::string(1, rows_north_first[y][x])));
    }
  }
  return P;
}

Configuration random_config(std::mt19937_64& rng, int w = 4) {
  Configuration x = blank();
  std::uniform_int_distribution<int> bit(0, 1);
  for (int a = 0; a < w; ++a)
    for (int b = 0; b < w; ++b)
      if (bit(rng)) x.set({a, b}, "■");
  return x;
}

}  // namespace

TEST_CASE("shift moves the support the opposite way") {
  Configuration x = single_black({3, 2});
  CHECK(shift(x, {0, 0}) == x);
  CHECK(shift(shift(x, {5, -7}), {-5, 7}) == x);
  Configuration y = shift(x, {3, 2});
  CHECK(y.at({0, 0}) == y.alphabet().index("■"));
  CHECK(y.overrides().size() == 1);
}

TEST_CASE("capped counting saturates on the background pattern") {
  Alphabet a = squares();
  Pattern bg(a, 1, 1);
  bg.set(0, 0, a.index("□"));
  CHECK(count_occurrences_capped(blank(), bg, 2) == 2);

  Pattern black(a, 1, 1);
  black.set(0, 0, a.index("■"));
  CHECK(count_occurrences_capped(blank(), black, 2) == 0);
  CHECK(count_occurrences_capped(single_black({0, 0}), black, 2) == 1);
}

TEST_CASE("capped counting of a centred pattern around two far marks") {
  Alphabet a = squares();
  Configuration x = blank();
  x.set({0, 0}, "■");
  x.set({5, 5}, "■");
  Pattern P = full_square(a, 3, {"□□□", "□■□", "□□□"});
  CHECK(count_occurrences_capped(x, P, 2) == 2);
  // The same pattern occurs once per mark; with marks adjacent it would not.
  Configuration y = blank();
  y.set({0, 0}, "■");
  y.set({1, 0}, "■");
  CHECK(count_occurrences_capped(y, P, 2) == 0);
}

TEST_CASE("capped counting rejects non-square and partial patterns") {
  Alphabet a = squares();
  Pattern rect(a, 2, 1);
  rect.set(0, 0, 0);
  rect.set(1, 0, 0);
  CHECK_THROWS_AS(count_occurrences_capped(blank(), rect, 2), std::invalid_argument);
}

TEST_CASE("signatures of tiny configurations") {
  Configuration x = blank();
  Signature s = signature_of(x, 1, 2);
  REQUIRE(s.counts.size() == 1);  // only the background cell
  CHECK(s.counts[0].second == 2);

  Configuration y = single_black({0, 0});
  Signature t = signature_of(y, 1, 2);
  REQUIRE(t.counts.size() == 2);
  WindowKey black;
  black.side = 1;
  black.cells = {make_cell(y.alphabet().index("■"))};
  CHECK(t.count_of(black) == 1);

  Signature u = signature_of(y, 3, 2);
  // background block at cap, nine marked windows once each
  int ones = 0, caps = 0;
  for (auto& [w, c] : u.counts) (c == 1 ? ones : caps) += 1;
  CHECK(ones == 9);
  CHECK(caps == 1);
}

TEST_CASE("equivalence laws on random configurations") {
  std::mt19937_64 rng(20240811);
  for (int trial = 0; trial < 50; ++trial) {
    Configuration x = random_config(rng);
    Configuration y = random_config(rng);
    Configuration z = random_config(rng);
    int n = 1 + static_cast<int>(rng() % 3);
    int k = 1 + static_cast<int>(rng() % 3);
    CHECK(equivalent(x, x, n, k));
    if (equivalent(x, y, n, k) && equivalent(y, z, n, k)) CHECK(equivalent(x, z, n, k));
    if (equivalent(x, y, n, k)) CHECK(equivalent(y, x, n, k));
    Position v{static_cast<Coord>(rng() % 9) - 4, static_cast<Coord>(rng() % 9) - 4};
    CHECK(signature_of(shift(x, v), n, k) == signature_of(x, n, k));
    CHECK(equivalent(x, shift(x, v), n, k));
  }
}

TEST_CASE("count distinguishes one mark from two far marks") {
  Configuration one = single_black({0, 0});
  Configuration two = single_black({0, 0});
  two.set({10, 0}, "■");
  CHECK_FALSE(equivalent(one, two, 1, 2));
}

TEST_CASE("monotone refinement on sampled pairs") {
  std::mt19937_64 rng(77);
  int checked = 0;
  for (int trial = 0; trial < 400 && checked < 12; ++trial) {
    Configuration x = random_config(rng, 3);
    Configuration y = random_config(rng, 3);
    if (equivalent(x, y, 3, 2)) {
      ++checked;
      CHECK(equivalent(x, y, 1, 1));
      CHECK(equivalent(x, y, 1, 2));
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("capped census agrees with naive window scanning") {
  std::mt19937_64 rng(4242);
  Alphabet a = squares();
  for (int trial = 0; trial < 20; ++trial) {
    Configuration x = random_config(rng);
    int n = 1 + static_cast<int>(rng() % 2);
    int k = 2;
    Signature s = signature_of(x, n, k);
    // scan windows over an ample region and tally
    std::map<std::vector<Cell>, long long> tally;
    LayeredView view(x);
    for (Coord p = -12; p <= 12; ++p)
      for (Coord q = -12; q <= 12; ++q) {
        WindowKey w = view.window({p, q}, n);
        tally[w.cells] += 1;
      }
    for (auto& [w, c] : s.counts) {
      bool is_bg = w.uniform(make_cell(x.background()));
      if (is_bg) {
        CHECK(c == k);
      } else {
        CHECK(c == std::min<long long>(tally[w.cells], k));
      }
    }
  }
}

TEST_CASE("configuration text round trip") {
  Configuration x = single_black({2, -3});
  x.set({0, 0}, "■");
  Configuration y = parse_configuration(print_configuration(x));
  CHECK(x == y);
  CHECK_THROWS(parse_configuration("background: a\n"));
  CHECK_THROWS(parse_configuration("alphabet: a b\nbackground: a\ncell 0 0 zz\n"));
}

TEST_CASE("pattern text round trip") {
  Alphabet a({"0", "1", "#"});
  Pattern P(a, 3, 2);
  P.set(0, 0, a.index("0"));
  P.set(2, 1, a.index("#"));
  Pattern Q = parse_pattern(print_pattern(P));
  CHECK(P == Q);
}
