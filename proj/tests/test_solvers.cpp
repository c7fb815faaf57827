#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "simsync/solvers.hpp"
#include "support/oracles.hpp"

using namespace simsync;

namespace {

StateVector eigenmode(const GridLevel& g) {
  StateVector s = make_state(g);
  for (int row = 0; row < g.side; ++row) {
    for (int col = 0; col < g.side; ++col) {
      s.at(row, col) = std::sin(std::numbers::pi * col * g.dx) *
                       std::sin(std::numbers::pi * row * g.dx);
    }
  }
  return s;
}

StateVector random_zero_boundary(const GridLevel& g, std::uint64_t seed, double lo = 0.0,
                                 double hi = 1.0) {
  std::mt19937_64 gen(seed);
  StateVector s = make_state(g);
  for (int row = 1; row + 1 < g.side; ++row) {
    for (int col = 1; col + 1 < g.side; ++col) {
      const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
      s.at(row, col) = lo + u * (hi - lo);
    }
  }
  return s;
}

double max_abs(const StateVector& s) {
  double m = 0.0;
  for (double v : s.values) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

TEST_CASE("ftcs: all-zero state is a fixed point") {
  const StateVector zero = make_state(make_grid(4));
  CHECK(ftcs_step(zero, 1.0, 1e-4) == zero);
}

TEST_CASE("ftcs: eigenmode decays like the heat kernel") {
  const GridLevel g = make_grid(5);
  const double alpha = 1.0, dt = 1e-4;
  const StateVector u0 = eigenmode(g);
  const StateVector u1 = ftcs_step(u0, alpha, dt);
  const double factor = std::exp(-2.0 * std::numbers::pi * std::numbers::pi * alpha * dt);
  for (int row = 1; row + 1 < g.side; ++row) {
    for (int col = 1; col + 1 < g.side; ++col) {
      REQUIRE(u1.at(row, col) == Catch::Approx(factor * u0.at(row, col)).epsilon(1e-3));
    }
  }
}

TEST_CASE("ftcs: unit spike at r = 1/4 redistributes onto its neighbors") {
  const GridLevel g = make_grid(3);  // dx = 1/8
  const double alpha = 1.0;
  const double dt = 0.25 * g.dx * g.dx;  // r = 0.25 exactly
  StateVector s = make_state(g);
  s.at(4, 4) = 1.0;
  const StateVector out = ftcs_step(s, alpha, dt);
  CHECK(out.at(4, 4) == 0.0);
  CHECK(out.at(3, 4) == 0.25);
  CHECK(out.at(5, 4) == 0.25);
  CHECK(out.at(4, 3) == 0.25);
  CHECK(out.at(4, 5) == 0.25);
}

TEST_CASE("ftcs: refuses to run outside the stability region") {
  const GridLevel g = make_grid(6);  // dx = 1/64, r = 1e-4 * 4096 = 0.41
  const StateVector s = make_state(g);
  CHECK_THROWS_AS(ftcs_step(s, 1.0, 1e-4), ConfigError);
}

TEST_CASE("ftcs: discrete maximum principle for r <= 1/4") {
  const GridLevel g = make_grid(4);
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const StateVector s = random_zero_boundary(g, seed);
    const StateVector out = ftcs_step(s, 1.0, 0.25 * g.dx * g.dx);
    double in_min = 0.0, in_max = 0.0;
    for (double v : s.values) {
      in_min = std::min(in_min, v);
      in_max = std::max(in_max, v);
    }
    for (double v : out.values) {
      REQUIRE(v >= in_min);
      REQUIRE(v <= in_max);
    }
  }
}

TEST_CASE("adi: all-zero state is a fixed point") {
  const StateVector zero = make_state(make_grid(4));
  CHECK(adi_step(zero, 1.0, 0.01) == zero);
}

TEST_CASE("adi: eigenmode decay is second order in dt") {
  const GridLevel g = make_grid(6);
  const double alpha = 1.0;
  const double t_final = 0.2;
  const StateVector u0 = eigenmode(g);
  const double exact = std::exp(-2.0 * std::numbers::pi * std::numbers::pi * alpha * t_final);

  auto error_at = [&](double dt) {
    StateVector u = u0;
    const int steps = static_cast<int>(std::round(t_final / dt));
    for (int i = 0; i < steps; ++i) u = adi_step(u, alpha, dt);
    double worst = 0.0;
    for (std::size_t i = 0; i < u.values.size(); ++i) {
      worst = std::max(worst, std::abs(u.values[i] - exact * u0.values[i]));
    }
    return worst;
  };

  const double e0 = error_at(0.1);
  const double e1 = error_at(0.05);
  const double e2 = error_at(0.025);
  const double order01 = std::log2(e0 / e1);
  const double order12 = std::log2(e1 / e2);
  CHECK(order01 >= 1.9);
  CHECK(order12 >= 1.9);
}

TEST_CASE("adi: bounded far beyond the explicit stability limit") {
  const GridLevel g = make_grid(5);
  const double r = 100.0;
  const double dt = r * g.dx * g.dx;  // alpha = 1
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    StateVector u = random_zero_boundary(g, seed);
    const double bound = max_abs(u);
    for (int i = 0; i < 5; ++i) {
      u = adi_step(u, 1.0, dt);
      REQUIRE(max_abs(u) <= bound);
      for (double v : u.values) REQUIRE(std::isfinite(v));
    }
  }
}

TEST_CASE("both solvers are linear and deterministic") {
  const GridLevel g = make_grid(3);
  const StateVector a = random_zero_boundary(g, 11, -1.0, 1.0);
  const StateVector b = random_zero_boundary(g, 12, -1.0, 1.0);

  for (ModelKind kind : {ModelKind::FTCS_Explicit, ModelKind::ADI_CrankNicolson}) {
    const double dt = kind == ModelKind::FTCS_Explicit ? 0.25 * g.dx * g.dx : 0.05;
    StateVector sum = a;
    for (std::size_t i = 0; i < sum.values.size(); ++i) sum.values[i] += b.values[i];

    const StateVector step_sum = model_step(sum, kind, 1.0, dt);
    const StateVector step_a = model_step(a, kind, 1.0, dt);
    const StateVector step_b = model_step(b, kind, 1.0, dt);
    for (std::size_t i = 0; i < sum.values.size(); ++i) {
      REQUIRE(step_sum.values[i] ==
              Catch::Approx(step_a.values[i] + step_b.values[i]).margin(1e-12));
    }

    StateVector scaled = a;
    for (double& v : scaled.values) v *= -2.5;
    const StateVector step_scaled = model_step(scaled, kind, 1.0, dt);
    for (std::size_t i = 0; i < scaled.values.size(); ++i) {
      REQUIRE(step_scaled.values[i] == Catch::Approx(-2.5 * step_a.values[i]).margin(1e-12));
    }

    // Bit-identical reruns.
    REQUIRE(model_step(a, kind, 1.0, dt) == step_a);
  }
}

TEST_CASE("adi matches its dense materialized operator") {
  const GridLevel g = make_grid(2);
  const double alpha = 1.3, dt = 0.07;
  const Eigen::MatrixXd op = oracles::materialize_operator(
      g, [&](const StateVector& s) { return adi_step(s, alpha, dt); });

  const StateVector s = random_zero_boundary(g, 5, -1.0, 1.0);
  Eigen::VectorXd x(g.n_points);
  for (int i = 0; i < g.n_points; ++i) x(i) = s.values[static_cast<std::size_t>(i)];
  const Eigen::VectorXd expect = op * x;
  const StateVector out = adi_step(s, alpha, dt);
  for (int i = 0; i < g.n_points; ++i) {
    REQUIRE(out.values[static_cast<std::size_t>(i)] == Catch::Approx(expect(i)).margin(1e-13));
  }
}

TEST_CASE("run_chain composes steps") {
  const GridLevel g = make_grid(3);
  const StateVector init = random_zero_boundary(g, 3);

  SECTION("n_t = 0 yields only the initial state") {
    const HeatProblem prob{1.0, 1e-3, 0, 1};
    const auto chain = run_chain(init, ModelKind::FTCS_Explicit, prob);
    REQUIRE(chain.size() == 1);
    CHECK(chain[0] == init);
  }

  SECTION("two FTCS steps") {
    const HeatProblem prob{1.0, 1e-3, 2, 1};
    const auto chain = run_chain(init, ModelKind::FTCS_Explicit, prob);
    REQUIRE(chain.size() == 3);
    CHECK(chain[2] == ftcs_step(ftcs_step(init, 1.0, 1e-3), 1.0, 1e-3));
  }

  SECTION("n_ref = 2 equals every 2nd state of a half-step chain, bit-exactly") {
    const HeatProblem prob{1.0, 2e-3, 5, 2};
    const HeatProblem halved{1.0, 1e-3, 10, 1};
    const auto coarse = run_chain(init, ModelKind::ADI_CrankNicolson, prob);
    const auto fine = run_chain(init, ModelKind::ADI_CrankNicolson, halved);
    REQUIRE(coarse.size() == 6);
    for (std::size_t i = 0; i < coarse.size(); ++i) {
      REQUIRE(coarse[i] == fine[2 * i]);
    }
  }
}

TEST_CASE("ftcs converges spatially at second order") {
  const double alpha = 1.0, dt = 1e-6, t_final = 0.01;
  const int steps = static_cast<int>(std::round(t_final / dt));
  const double exact_factor =
      std::exp(-2.0 * std::numbers::pi * std::numbers::pi * alpha * t_final);

  auto error_at_level = [&](int level) {
    const GridLevel g = make_grid(level);
    StateVector u = eigenmode(g);
    const StateVector u0 = u;
    for (int i = 0; i < steps; ++i) u = ftcs_step(u, alpha, dt);
    double worst = 0.0;
    for (std::size_t i = 0; i < u.values.size(); ++i) {
      worst = std::max(worst, std::abs(u.values[i] - exact_factor * u0.values[i]));
    }
    return worst;
  };

  const double e4 = error_at_level(4);
  const double e5 = error_at_level(5);
  CHECK(std::log2(e4 / e5) >= 1.8);
}
