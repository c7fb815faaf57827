#pragma once

// Independent oracles for the test suites. Each one re-derives a result the
// library computes, through a deliberately different route: the EnKF oracle
// materializes the full covariance, the token-bucket oracle walks an event
// queue, and the operator oracle materializes solver steps as dense
// matrices. They must never call the implementation paths they check.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <deque>
#include <utility>
#include <vector>

#include "simsync/enkf.hpp"
#include "simsync/grid.hpp"
#include "simsync/transport.hpp"

namespace oracles {

/// Textbook EnKF analysis with the sample covariance C built explicitly,
/// the gain taken as C H^T pinv(H C H^T) via a primal m x m
/// eigendecomposition, and perfect observations written back exactly.
inline simsync::Ensemble dense_analyze(const simsync::Ensemble& forecast,
                                       const simsync::PartialObservation& obs) {
  const int n = forecast.grid().n_points;
  const int ne = forecast.size();
  const int m = static_cast<int>(obs.size());

  Eigen::MatrixXd members(n, ne);
  for (int j = 0; j < ne; ++j) {
    for (int i = 0; i < n; ++i) {
      members(i, j) = forecast.members[static_cast<std::size_t>(j)]
                          .values[static_cast<std::size_t>(i)];
    }
  }
  const Eigen::VectorXd mean = members.rowwise().mean();
  const Eigen::MatrixXd devs = members.colwise() - mean;
  const Eigen::MatrixXd c = devs * devs.transpose() / static_cast<double>(ne - 1);

  Eigen::MatrixXd cht(n, m);
  Eigen::MatrixXd hcht(m, m);
  Eigen::VectorXd u(m);
  for (int k = 0; k < m; ++k) {
    const int pos = static_cast<int>(obs.pairs[static_cast<std::size_t>(k)].first);
    cht.col(k) = c.col(pos);
    u(k) = obs.pairs[static_cast<std::size_t>(k)].second;
    for (int l = 0; l < m; ++l) {
      hcht(k, l) = c(pos, static_cast<int>(obs.pairs[static_cast<std::size_t>(l)].first));
    }
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hcht);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double lambda_max = lambda.maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < m; ++i) {
    if (lambda_max > 0.0 && lambda(i) > 1e-10 * lambda_max) inv(i) = 1.0 / lambda(i);
  }
  const Eigen::MatrixXd k_gain =
      cht * (eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose());

  simsync::Ensemble analyzed;
  analyzed.step = forecast.step;
  analyzed.members = forecast.members;
  for (int j = 0; j < ne; ++j) {
    Eigen::VectorXd innovation(m);
    for (int k = 0; k < m; ++k) {
      innovation(k) = u(k) - members(static_cast<int>(obs.pairs[static_cast<std::size_t>(k)].first), j);
    }
    const Eigen::VectorXd delta = k_gain * innovation;
    auto& values = analyzed.members[static_cast<std::size_t>(j)].values;
    for (int i = 0; i < n; ++i) values[static_cast<std::size_t>(i)] += delta(i);
    for (const auto& [pos, value] : obs.pairs) values[pos] = value;
  }
  return analyzed;
}

/// Event-driven token-bucket simulation: walks arrivals and head-of-line
/// completions through an explicit queue, settling the token balance at
/// every event. Returns drain-completion times in send order.
inline std::vector<double> tbf_drain_oracle(const simsync::ChannelConfig& cfg,
                                            const std::vector<std::pair<double, std::size_t>>& sends) {
  const double rate = cfg.rate_bits_per_s / 8.0;
  std::vector<double> finish(sends.size(), 0.0);

  struct Pending {
    std::size_t id;
    double remaining;
  };
  std::deque<Pending> queue;
  double t = 0.0;
  double tokens = 0.0;
  std::size_t next_arrival = 0;

  auto settle_to = [&](double when) {
    tokens = std::min(cfg.bucket_bytes, tokens + rate * (when - t));
    t = when;
  };

  while (next_arrival < sends.size() || !queue.empty()) {
    if (queue.empty()) {
      settle_to(std::max(t, sends[next_arrival].first));
      queue.push_back({next_arrival, static_cast<double>(sends[next_arrival].second)});
      ++next_arrival;
      continue;
    }
    // Serve the head: instantly from the balance, otherwise at line rate;
    // arrivals during the service are queued behind it.
    Pending head = queue.front();
    queue.pop_front();
    double completes;
    if (tokens >= head.remaining) {
      tokens -= head.remaining;
      completes = t;
    } else {
      completes = t + (head.remaining - tokens) / rate;
      tokens = 0.0;
    }
    while (next_arrival < sends.size() && sends[next_arrival].first <= completes) {
      queue.push_back({next_arrival, static_cast<double>(sends[next_arrival].second)});
      ++next_arrival;
    }
    t = completes;
    finish[head.id] = completes;
  }
  return finish;
}

/// Materializes a linear step operator as a dense matrix by applying it to
/// unit vectors. Small grids only.
template <typename StepFn>
inline Eigen::MatrixXd materialize_operator(const simsync::GridLevel& g, StepFn&& step) {
  const int n = g.n_points;
  Eigen::MatrixXd op(n, n);
  for (int j = 0; j < n; ++j) {
    simsync::StateVector e = simsync::make_state(g);
    e.values[static_cast<std::size_t>(j)] = 1.0;
    const simsync::StateVector out = step(e);
    for (int i = 0; i < n; ++i) op(i, j) = out.values[static_cast<std::size_t>(i)];
  }
  return op;
}

}  // namespace oracles
