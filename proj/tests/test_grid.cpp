#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "simsync/grid.hpp"

using namespace simsync;

TEST_CASE("grid levels follow side = 2^level + 1") {
  const GridLevel g5 = make_grid(5);
  CHECK(g5.side == 33);
  CHECK(g5.n_points == 1089);
  CHECK(g5.dx == Catch::Approx(1.0 / 32.0));

  const GridLevel g6 = make_grid(6);
  CHECK(g6.n_points == 4225);

  const GridLevel g0 = make_grid(0);
  CHECK(g0.side == 2);
  CHECK(g0.n_points == 4);
  CHECK(g0.dx == 1.0);
}

TEST_CASE("grid level cap") {
  CHECK_THROWS_AS(make_grid(-1), ConfigError);
  CHECK_THROWS_AS(make_grid(13), ConfigError);
  CHECK_NOTHROW(make_grid(12));
}

TEST_CASE("every coarse point coincides with a fine point") {
  // Brute-force coordinate enumeration; exact double equality is intended,
  // the coordinates are dyadic rationals.
  for (int coarse = 0; coarse <= 4; ++coarse) {
    for (int fine = coarse; fine <= 7; ++fine) {
      const GridLevel gc = make_grid(coarse);
      const GridLevel gf = make_grid(fine);
      const Restriction r = make_restriction(gf, gc);
      for (int row = 0; row < gc.side; ++row) {
        for (int col = 0; col < gc.side; ++col) {
          const int ci = row * gc.side + col;
          const int fi = r.index_map[static_cast<std::size_t>(ci)];
          const double cx = col * gc.dx;
          const double cy = row * gc.dx;
          const double fx = (fi % gf.side) * gf.dx;
          const double fy = (fi / gf.side) * gf.dx;
          REQUIRE(cx == fx);
          REQUIRE(cy == fy);
        }
      }
    }
  }
}

TEST_CASE("restriction is injection") {
  const GridLevel g6 = make_grid(6);
  const GridLevel g5 = make_grid(5);

  SECTION("identity on the same level") {
    StateVector s = make_state(g5, 0.25);
    s.values[17] = -3.5;
    CHECK(restrict_state(s, g5) == s);
  }

  SECTION("constants are preserved") {
    const StateVector s = make_state(g6, 1.0);
    const StateVector out = restrict_state(s, g5);
    REQUIRE(out.level == g5);
    for (double v : out.values) CHECK(v == 1.0);
  }

  SECTION("the value at (0.5, 0.5) survives") {
    // Level 6: (row 32, col 32) -> 32*65 + 32 = 2112.
    // Level 5: (row 16, col 16) -> 16*33 + 16 = 544.
    StateVector s = make_state(g6);
    s.values[2112] = 7.125;
    const StateVector out = restrict_state(s, g5);
    CHECK(out.values[544] == 7.125);
  }

  SECTION("refuses to restrict onto a finer grid") {
    const StateVector s = make_state(g5);
    CHECK_THROWS_AS(restrict_state(s, g6), DimensionError);
  }
}

TEST_CASE("restriction is idempotent and linear") {
  const GridLevel g6 = make_grid(6);
  const GridLevel g4 = make_grid(4);
  std::mt19937_64 gen(99);
  auto random_state = [&](const GridLevel& g) {
    StateVector s = make_state(g);
    for (double& v : s.values) v = static_cast<double>(gen() >> 11) * 0x1.0p-53 - 0.5;
    return s;
  };

  const StateVector a = random_state(g6);
  const StateVector b = random_state(g6);

  const StateVector ra = restrict_state(a, g4);
  CHECK(restrict_state(ra, g4) == ra);

  // Exact in floating point: injection only copies values.
  StateVector diff = a;
  for (std::size_t i = 0; i < diff.values.size(); ++i) diff.values[i] -= b.values[i];
  const StateVector r_diff = restrict_state(diff, g4);
  const StateVector rb = restrict_state(b, g4);
  for (std::size_t i = 0; i < r_diff.values.size(); ++i) {
    REQUIRE(r_diff.values[i] == ra.values[i] - rb.values[i]);
  }
}
