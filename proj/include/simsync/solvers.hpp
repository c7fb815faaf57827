#pragma once

// Time steppers for the 2D heat equation with fixed Dirichlet boundaries:
// explicit FTCS (the cheap surrogate) and Peaceman-Rachford ADI with
// Crank-Nicolson half-steps (the reference). Both are linear, deterministic
// operators; ADI is unconditionally stable, FTCS requires r <= 1/4.

#include <cmath>
#include <string>
#include <vector>

#include "simsync/errors.hpp"
#include "simsync/grid.hpp"

namespace simsync {

struct HeatProblem {
  double alpha = 1.0;   // thermal diffusivity
  double dt = 1e-4;     // surrogate-scale time step
  int n_t = 100;        // emitted steps (chain has n_t + 1 states)
  int n_ref = 1;        // reference sub-steps per emitted step

  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (n_t < 0) throw ConfigError("n_t must be non-negative");
    if (n_ref < 1) throw ConfigError("n_ref must be >= 1");
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  }
};

enum class ModelKind : std::uint8_t {
  FTCS_Explicit = 0,
  ADI_CrankNicolson = 1,
};

inline double stability_ratio(const GridLevel& g, double alpha, double dt) {
  return alpha * dt / (g.dx * g.dx);
}

/// One explicit Forward-Time Central-Space step. Refuses to run outside the
/// 2D stability region r = alpha*dt/dx^2 <= 1/4 rather than diverge.
inline StateVector ftcs_step(const StateVector& in, double alpha, double dt) {
  const GridLevel& g = in.level;
  const double r = stability_ratio(g, alpha, dt);
  if (r > 0.25 + 1e-12) {
    throw ConfigError("FTCS unstable: alpha*dt/dx^2 = " + std::to_string(r) +
                      " exceeds 0.25 at level " + std::to_string(g.level));
  }
  StateVector out = in;  // boundary rows/cols keep their Dirichlet values
  const int s = g.side;
  const std::vector<double>& u = in.values;
  for (int row = 1; row + 1 < s; ++row) {
    const std::size_t base = static_cast<std::size_t>(row) * s;
    for (int col = 1; col + 1 < s; ++col) {
      const std::size_t i = base + col;
      const double c = u[i];
      out.values[i] = c + r * (u[i - s] + u[i + s] + u[i - 1] + u[i + 1] - 4.0 * c);
    }
  }
  return out;
}

namespace detail {

/// Thomas factorization of the constant tridiagonal (-lam, 1+2lam, -lam).
struct TridiagFactors {
  std::vector<double> denom;  // pivot at each row
  std::vector<double> upper;  // scaled superdiagonal
  double lam = 0.0;

  TridiagFactors(int n, double lam_) : denom(n), upper(n), lam(lam_) {
    const double b = 1.0 + 2.0 * lam;
    denom[0] = b;
    upper[0] = -lam / b;
    for (int i = 1; i < n; ++i) {
      denom[i] = b + lam * upper[i - 1];
      upper[i] = -lam / denom[i];
    }
  }

  // Solves in place; rhs has the interior length used at construction.
  void solve(std::vector<double>& rhs) const {
    const int n = static_cast<int>(denom.size());
    rhs[0] /= denom[0];
    for (int i = 1; i < n; ++i) {
      rhs[i] = (rhs[i] + lam * rhs[i - 1]) / denom[i];
    }
    for (int i = n - 2; i >= 0; --i) {
      rhs[i] -= upper[i] * rhs[i + 1];
    }
  }
};

}  // namespace detail

/// One Peaceman-Rachford ADI step: implicit in x / explicit in y over the
/// first half-step, then implicit in y / explicit in x, each half-step a
/// Crank-Nicolson tridiagonal solve per grid line. Stable for any dt > 0.
inline StateVector adi_step(const StateVector& in, double alpha, double dt) {
  const GridLevel& g = in.level;
  const int s = g.side;
  const int n = s - 2;  // interior points per line
  if (n <= 0) return in;
  const double lam = alpha * dt / (2.0 * g.dx * g.dx);
  const detail::TridiagFactors factors(n, lam);

  StateVector half = in;
  std::vector<double> rhs(static_cast<std::size_t>(n));

  // x-implicit sweep over interior rows.
  for (int row = 1; row <= n; ++row) {
    for (int col = 1; col <= n; ++col) {
      rhs[static_cast<std::size_t>(col - 1)] = lam * in.at(row - 1, col) +
                                               (1.0 - 2.0 * lam) * in.at(row, col) +
                                               lam * in.at(row + 1, col);
    }
    // Time-constant Dirichlet columns enter the solve as known data.
    rhs[0] += lam * in.at(row, 0);
    rhs[static_cast<std::size_t>(n - 1)] += lam * in.at(row, s - 1);
    factors.solve(rhs);
    for (int col = 1; col <= n; ++col) {
      half.at(row, col) = rhs[static_cast<std::size_t>(col - 1)];
    }
  }

  StateVector out = in;
  // y-implicit sweep over interior columns.
  for (int col = 1; col <= n; ++col) {
    for (int row = 1; row <= n; ++row) {
      rhs[static_cast<std::size_t>(row - 1)] = lam * half.at(row, col - 1) +
                                               (1.0 - 2.0 * lam) * half.at(row, col) +
                                               lam * half.at(row, col + 1);
    }
    rhs[0] += lam * in.at(0, col);
    rhs[static_cast<std::size_t>(n - 1)] += lam * in.at(s - 1, col);
    factors.solve(rhs);
    for (int row = 1; row <= n; ++row) {
      out.at(row, col) = rhs[static_cast<std::size_t>(row - 1)];
    }
  }
  return out;
}

inline StateVector model_step(const StateVector& in, ModelKind kind, double alpha, double dt) {
  return kind == ModelKind::FTCS_Explicit ? ftcs_step(in, alpha, dt) : adi_step(in, alpha, dt);
}

/// Advances one emitted step. The ADI reference takes n_ref internal
/// sub-steps of dt/n_ref so its emitted states align with surrogate times.
inline StateVector advance_emitted(const StateVector& in, ModelKind kind, const HeatProblem& prob) {
  if (kind == ModelKind::FTCS_Explicit) {
    return ftcs_step(in, prob.alpha, prob.dt);
  }
  StateVector cur = in;
  const double sub_dt = prob.dt / prob.n_ref;
  for (int k = 0; k < prob.n_ref; ++k) {
    cur = adi_step(cur, prob.alpha, sub_dt);
  }
  return cur;
}

inline std::vector<StateVector> run_chain(const StateVector& initial, ModelKind kind,
                                          const HeatProblem& prob) {
  prob.validate();
  std::vector<StateVector> chain;
  chain.reserve(static_cast<std::size_t>(prob.n_t) + 1);
  chain.push_back(initial);
  for (int i = 0; i < prob.n_t; ++i) {
    chain.push_back(advance_emitted(chain.back(), kind, prob));
  }
  return chain;
}

}  // namespace simsync
