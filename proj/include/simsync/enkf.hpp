#pragma once

// Ensemble Kalman filter for integrating partial point updates into the
// surrogate state. Observations come from the reference simulation and are
// perfect, so there is no observation-noise term and the analysis pins the
// observed coordinates to the observed values exactly. The whole filter is
// a pure function of (state, basic seed, observation sequence), which is
// what lets the server mirror the client bit-for-bit.

#include <Eigen/Dense>

#include <cassert>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "simsync/errors.hpp"
#include "simsync/grid.hpp"
#include "simsync/random.hpp"

namespace simsync {

struct PerturbationSpec {
  double sigma = 0.0;  // stddev of the i.i.d. interior perturbation
};

struct Ensemble {
  std::uint32_t step = 0;
  std::vector<StateVector> members;

  int size() const { return static_cast<int>(members.size()); }
  const GridLevel& grid() const { return members.front().level; }
};

/// Sorted, unique (position, value) pairs: the update vector u and the rows
/// of the selection operator H in list-of-tuples form.
struct PartialObservation {
  std::vector<std::pair<std::uint32_t, double>> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }

  void validate(int n_points) const {
    if (pairs.empty()) throw ProtocolError("partial observation must not be empty");
    std::uint32_t prev = 0;
    bool first = true;
    for (const auto& [pos, value] : pairs) {
      if (!first && pos <= prev) throw ProtocolError("observation positions must strictly increase");
      if (pos >= static_cast<std::uint32_t>(n_points)) {
        throw ProtocolError("observation position " + std::to_string(pos) + " out of range");
      }
      if (!std::isfinite(value)) throw ProtocolError("observation value not finite");
      prev = pos;
      first = false;
    }
  }
};

inline StateVector ensemble_mean(const Ensemble& ens) {
  StateVector mean = make_state(ens.grid());
  for (const StateVector& m : ens.members) {
    for (std::size_t i = 0; i < mean.values.size(); ++i) mean.values[i] += m.values[i];
  }
  const double inv = 1.0 / static_cast<double>(ens.size());
  for (double& v : mean.values) v *= inv;
  return mean;
}

/// Perturbs `state` into n_e members, e^(j) = state + r^(j). The stream is
/// seeded from derive(step); member j consumes n_points consecutive normals
/// in row-major point order (boundary draws are consumed but not applied).
inline Ensemble generate_members(const StateVector& state, int n_e, const SeedPolicy& seeds,
                                 std::uint32_t step, const PerturbationSpec& pert) {
  if (n_e < 2) throw ConfigError("ensemble needs at least 2 members, got " + std::to_string(n_e));
  GaussianStream rng(seeds.derive(step));
  Ensemble ens;
  ens.step = step;
  ens.members.reserve(static_cast<std::size_t>(n_e));
  const GridLevel& g = state.level;
  for (int j = 0; j < n_e; ++j) {
    StateVector m = state;
    std::size_t i = 0;
    for (int row = 0; row < g.side; ++row) {
      for (int col = 0; col < g.side; ++col, ++i) {
        const double z = rng.next();
        if (!is_boundary(g, row, col)) m.values[i] += pert.sigma * z;
      }
    }
    ens.members.push_back(std::move(m));
  }
  return ens;
}

/// Member-wise model propagation; the step index advances by one.
template <typename StepFn>
inline Ensemble forecast(const Ensemble& ens, StepFn&& step_fn) {
  Ensemble out;
  out.step = ens.step + 1;
  out.members.reserve(ens.members.size());
  for (const StateVector& m : ens.members) {
    out.members.push_back(step_fn(m));
  }
  return out;
}

/// Advance for a certified step: forecast only, no analysis. The published
/// state is the forecast mean.
template <typename StepFn>
inline Ensemble certified_advance(const Ensemble& ens, StepFn&& step_fn) {
  return forecast(ens, std::forward<StepFn>(step_fn));
}

struct CovarianceAction {
  Eigen::MatrixXd cht;   // C H^T, n x m
  Eigen::MatrixXd hcht;  // H C H^T, m x m
};

namespace detail {

// Deviation matrix A (n x n_e): member columns minus the ensemble mean.
inline Eigen::MatrixXd deviations(const Ensemble& ens, const StateVector& mean) {
  const int n = ens.grid().n_points;
  const int ne = ens.size();
  Eigen::MatrixXd a(n, ne);
  for (int j = 0; j < ne; ++j) {
    for (int i = 0; i < n; ++i) {
      a(i, j) = ens.members[static_cast<std::size_t>(j)].values[static_cast<std::size_t>(i)] -
                mean.values[static_cast<std::size_t>(i)];
    }
  }
  return a;
}

}  // namespace detail

/// Matrix-free covariance products: with A the member deviations, the
/// sample covariance C = A A^T / (n_e - 1) is never materialized; the two
/// products the gain needs are assembled as A (HA)^T and (HA)(HA)^T.
inline CovarianceAction sample_covariance_action(const Ensemble& ens,
                                                 std::span<const std::uint32_t> observed) {
  if (observed.empty()) throw ConfigError("sample_covariance_action needs at least one observed index");
  const StateVector mean = ensemble_mean(ens);
  const Eigen::MatrixXd a = detail::deviations(ens, mean);
  const int m = static_cast<int>(observed.size());
  Eigen::MatrixXd ha(m, ens.size());
  for (int k = 0; k < m; ++k) {
    ha.row(k) = a.row(static_cast<int>(observed[static_cast<std::size_t>(k)]));
  }
  const double scale = 1.0 / static_cast<double>(ens.size() - 1);
  CovarianceAction act;
  act.cht = scale * (a * ha.transpose());
  act.hcht = scale * (ha * ha.transpose());
  return act;
}

/// K = C H^T pinv(H C H^T), with the Moore-Penrose pseudo-inverse taken via
/// symmetric eigendecomposition; eigenvalues below rel_tol * lambda_max are
/// truncated, so rank-deficient ensembles (n_e - 1 < m) are well-defined.
inline Eigen::MatrixXd kalman_gain(const Eigen::MatrixXd& cht, const Eigen::MatrixXd& hcht,
                                   double rel_tol = 1e-10) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hcht);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double lambda_max = lambda.size() > 0 ? lambda.maxCoeff() : 0.0;
  const double cut = rel_tol * lambda_max;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(lambda.size());
  if (lambda_max > 0.0) {
    for (int i = 0; i < lambda.size(); ++i) {
      if (lambda(i) > cut) inv(i) = 1.0 / lambda(i);
    }
  }
  return cht * (eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose());
}

/// Analysis step. Computes the shared gain from the forecast ensemble, then
/// updates every member with its innovation, e^(j) = f^(j) + K (u - H f^(j)),
/// and finally pins the observed coordinates to the observed values (the
/// perfect-observation limit; with a full-rank H C H^T the pinning is a
/// no-op up to rounding). Observing every point therefore reproduces the
/// reference exactly.
///
/// The gain is assembled through the (n_e x n_e) Gram spectrum of HA, which
/// equals cht * pinv(hcht) with the same truncation rule but stays tractable
/// when m greatly exceeds n_e.
inline Ensemble analyze(const Ensemble& forecast_ens, const PartialObservation& obs) {
  if (obs.empty()) throw std::logic_error("analyze called without observations");
  if (forecast_ens.size() < 2) throw ConfigError("analysis needs at least 2 ensemble members");
  const GridLevel& g = forecast_ens.grid();
  obs.validate(g.n_points);

  const int n = g.n_points;
  const int ne = forecast_ens.size();
  const int m = static_cast<int>(obs.size());

  const StateVector mean = ensemble_mean(forecast_ens);
  const Eigen::MatrixXd a = detail::deviations(forecast_ens, mean);
  Eigen::MatrixXd ha(m, ne);
  Eigen::VectorXd u(m);
  for (int k = 0; k < m; ++k) {
    ha.row(k) = a.row(static_cast<int>(obs.pairs[static_cast<std::size_t>(k)].first));
    u(k) = obs.pairs[static_cast<std::size_t>(k)].second;
  }

  // Gram route: hcht = HA (HA)^T / (ne-1) shares its nonzero spectrum with
  // G = (HA)^T HA / (ne-1); K = A W diag(1/((ne-1) lambda)) W^T (HA)^T over
  // the retained spectrum.
  const double scale = 1.0 / static_cast<double>(ne - 1);
  const Eigen::MatrixXd gram = scale * (ha.transpose() * ha);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double lambda_max = lambda.size() > 0 ? lambda.maxCoeff() : 0.0;
  const double cut = 1e-10 * lambda_max;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(lambda.size());
  if (lambda_max > 0.0) {
    for (int i = 0; i < lambda.size(); ++i) {
      if (lambda(i) > cut) inv(i) = scale / lambda(i);
    }
  }
  const Eigen::MatrixXd k_gain =
      (a * eig.eigenvectors()) * inv.asDiagonal() * (ha * eig.eigenvectors()).transpose();

  Ensemble analyzed;
  analyzed.step = forecast_ens.step;
  analyzed.members.reserve(static_cast<std::size_t>(ne));
  Eigen::VectorXd innovation(m);
  for (int j = 0; j < ne; ++j) {
    const StateVector& f = forecast_ens.members[static_cast<std::size_t>(j)];
    for (int k = 0; k < m; ++k) {
      innovation(k) = u(k) - f.values[obs.pairs[static_cast<std::size_t>(k)].first];
    }
    const Eigen::VectorXd delta = k_gain * innovation;
    StateVector e = f;
    for (int i = 0; i < n; ++i) e.values[static_cast<std::size_t>(i)] += delta(i);
    for (const auto& [pos, value] : obs.pairs) e.values[pos] = value;
    analyzed.members.push_back(std::move(e));
  }
  return analyzed;
}

}  // namespace simsync
