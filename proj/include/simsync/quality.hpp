#pragma once

// Quality metric between the approximate and the reference solution, and the
// selection of violation points for partial updates. The per-step quality is
// q_i = ||approx - restrict(reference)|| under the configured norm; a run is
// acceptable when max_i q_i <= q_max.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "simsync/enkf.hpp"
#include "simsync/errors.hpp"
#include "simsync/grid.hpp"

namespace simsync {

enum class Norm : std::uint8_t {
  Max = 0,
  Euclidean = 1,  // unnormalized 2-norm
};

struct QualitySpec {
  Norm norm = Norm::Max;
  double q_max = 0.0078125;  // 2^-7
};

namespace detail {

inline double norm_of_diff(const std::vector<double>& a, const std::vector<double>& b, Norm norm) {
  if (norm == Norm::Max) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      worst = std::max(worst, std::abs(a[i] - b[i]));
    }
    return worst;
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sq += d * d;
  }
  return std::sqrt(sq);
}

}  // namespace detail

inline double step_quality(const StateVector& approx, const StateVector& reference,
                           const QualitySpec& spec, const Restriction& restriction) {
  if (approx.level != restriction.to) {
    throw DimensionError("approximate state is not on the surrogate grid");
  }
  const StateVector restricted = restriction.apply(reference);
  return detail::norm_of_diff(approx.values, restricted.values, spec.norm);
}

inline double chain_quality(const std::vector<StateVector>& approx_chain,
                            const std::vector<StateVector>& reference_chain,
                            const QualitySpec& spec, const Restriction& restriction) {
  if (approx_chain.size() != reference_chain.size()) {
    throw DimensionError("chains differ in length: " + std::to_string(approx_chain.size()) +
                         " vs " + std::to_string(reference_chain.size()));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < approx_chain.size(); ++i) {
    worst = std::max(worst, step_quality(approx_chain[i], reference_chain[i], spec, restriction));
  }
  return worst;
}

struct ViolationReport {
  std::uint32_t step = 0;
  double q_value = 0.0;  // pre-update step quality, the decision quantity
  bool violating = false;
  std::vector<std::pair<std::uint32_t, double>> violation_points;  // sorted by index
};

/// Extended selection outcome: the analyzed ensemble is returned alongside
/// the report so the caller does not have to repeat the final analysis, and
/// capped selections (Combined strategy) report early.
struct SelectionResult {
  ViolationReport report;
  std::optional<Ensemble> analyzed;  // present iff violating and not capped
  bool exceeded_cap = false;
  int verification_rounds = 0;
};

using AnalyzeFn = std::function<Ensemble(const Ensemble&, const PartialObservation&)>;

/// Picks the points of a violating state that must travel in a partial
/// update. Candidates start from the norm-specific rule (max norm: every
/// point over the bound; other norms: the single worst point) and the set
/// is then verified: the EnKF analysis is applied and the quality of the
/// analyzed mean re-evaluated; while it still exceeds the bound, the next
/// worst unselected point joins and verification repeats. Selecting all
/// points reproduces the reference exactly, so the loop always terminates.
inline SelectionResult select_violation_points_ex(const Ensemble& mobile_state,
                                                  const StateVector& reference,
                                                  const QualitySpec& spec,
                                                  const Restriction& restriction,
                                                  const AnalyzeFn& analyze_fn,
                                                  std::size_t max_points = std::numeric_limits<std::size_t>::max()) {
  const int n = mobile_state.grid().n_points;
  const StateVector restricted = restriction.apply(reference);
  const StateVector mean = ensemble_mean(mobile_state);

  SelectionResult result;
  result.report.step = mobile_state.step;
  result.report.q_value = detail::norm_of_diff(mean.values, restricted.values, spec.norm);
  result.report.violating = result.report.q_value > spec.q_max;
  if (!result.report.violating) return result;

  std::vector<bool> selected(static_cast<std::size_t>(n), false);
  std::size_t n_selected = 0;
  auto add_point = [&](int idx) {
    selected[static_cast<std::size_t>(idx)] = true;
    ++n_selected;
  };
  // Lowest index wins among equal errors, for cross-node determinism.
  auto worst_unselected = [&](const std::vector<double>& values) {
    int best = -1;
    double best_err = -1.0;
    for (int i = 0; i < n; ++i) {
      if (selected[static_cast<std::size_t>(i)]) continue;
      const double err = std::abs(values[static_cast<std::size_t>(i)] -
                                  restricted.values[static_cast<std::size_t>(i)]);
      if (err > best_err) {
        best_err = err;
        best = i;
      }
    }
    if (best < 0) throw std::logic_error("quality bound unmet with every point selected");
    return best;
  };

  if (spec.norm == Norm::Max) {
    for (int i = 0; i < n; ++i) {
      if (std::abs(mean.values[static_cast<std::size_t>(i)] -
                   restricted.values[static_cast<std::size_t>(i)]) > spec.q_max) {
        add_point(i);
      }
    }
  } else {
    add_point(worst_unselected(mean.values));
  }

  for (int round = 0; round <= n; ++round) {
    if (n_selected > max_points) {
      result.exceeded_cap = true;
      result.report.violation_points.clear();
      return result;
    }
    PartialObservation obs;
    obs.pairs.reserve(n_selected);
    for (int i = 0; i < n; ++i) {
      if (selected[static_cast<std::size_t>(i)]) {
        obs.pairs.emplace_back(static_cast<std::uint32_t>(i),
                               restricted.values[static_cast<std::size_t>(i)]);
      }
    }
    Ensemble analyzed = analyze_fn(mobile_state, obs);
    const StateVector analyzed_mean = ensemble_mean(analyzed);
    const double q_after = detail::norm_of_diff(analyzed_mean.values, restricted.values, spec.norm);
    result.verification_rounds = round + 1;
    if (q_after <= spec.q_max) {
      result.report.violation_points = std::move(obs.pairs);
      result.analyzed = std::move(analyzed);
      return result;
    }
    add_point(worst_unselected(analyzed_mean.values));
  }
  throw std::logic_error("violation-point selection failed to terminate");
}

inline ViolationReport select_violation_points(const Ensemble& mobile_state,
                                               const StateVector& reference,
                                               const QualitySpec& spec,
                                               const Restriction& restriction,
                                               const AnalyzeFn& analyze_fn) {
  return select_violation_points_ex(mobile_state, reference, spec, restriction, analyze_fn).report;
}

}  // namespace simsync
