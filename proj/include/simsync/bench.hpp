#pragma once

// Desk-scale reproduction of the paper-style experiments: violation
// statistics, rate sweeps, synthetic update probability and update size
// sweeps, and the surrogate-level sweep. Runs are virtual-time and fully
// deterministic for a given scenario and seed; absolute latencies depend on
// the pinned cost model, so comparisons are reported as orderings and
// speedups rather than absolute numbers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "simsync/nodes.hpp"

namespace simsync {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return SeedPolicy{seed}.derive(salt ^ 0xA5A5A5A5A5A5A5A5ULL);
}

/// Zero-boundary state with uniform [0,1) interior values, row-major draw
/// order from MT19937-64.
inline StateVector random_interior_state(const GridLevel& g, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  StateVector s = make_state(g);
  for (int row = 0; row < g.side; ++row) {
    for (int col = 0; col < g.side; ++col) {
      const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
      if (!is_boundary(g, row, col)) s.at(row, col) = u;
    }
  }
  return s;
}

struct SyntheticUpdatePolicy {
  enum class Mode : std::uint8_t { Real = 0, Bernoulli = 1, FixedSize = 2 };

  Mode mode = Mode::Real;
  double p = 0.5;  // per-step update probability
  int k = 0;       // FixedSize: violation points per update
  // Bernoulli under a filtering strategy sends partial updates of this
  // fraction of the grid, mirroring the observed real update size.
  double bernoulli_partial_fraction = 0.052;
};

/// Builds the per-step decision override for a synthetic policy. Points are
/// drawn uniformly without replacement from the interior; values are taken
/// from the reference by the server. Streams take no override.
inline DecisionOverride inject_synthetic(const SyntheticUpdatePolicy& policy, StrategyKind strategy,
                                         const GridLevel& surrogate, std::uint64_t seed) {
  if (policy.mode == SyntheticUpdatePolicy::Mode::Real) return {};
  if (strategy == StrategyKind::SimpleStream || strategy == StrategyKind::AdvancedStream) return {};

  std::vector<std::uint32_t> interior;
  interior.reserve(static_cast<std::size_t>(surrogate.n_points));
  for (int row = 0; row < surrogate.side; ++row) {
    for (int col = 0; col < surrogate.side; ++col) {
      if (!is_boundary(surrogate, row, col)) {
        interior.push_back(static_cast<std::uint32_t>(row * surrogate.side + col));
      }
    }
  }

  const bool filtering = strategy == StrategyKind::PartialUpdate || strategy == StrategyKind::Combined;
  int points_per_update = 0;
  if (policy.mode == SyntheticUpdatePolicy::Mode::FixedSize) {
    points_per_update = std::min<int>(policy.k, static_cast<int>(interior.size()));
  } else if (filtering) {
    points_per_update = std::min<int>(
        std::max(1, static_cast<int>(std::lround(policy.bernoulli_partial_fraction *
                                                 surrogate.n_points))),
        static_cast<int>(interior.size()));
  }

  auto gen = std::make_shared<std::mt19937_64>(seed);
  auto pool = std::make_shared<std::vector<std::uint32_t>>(std::move(interior));
  const double p = policy.p;

  return [gen, pool, p, filtering, points_per_update](std::uint32_t) -> std::optional<ForcedDecision> {
    const double u = static_cast<double>((*gen)() >> 11) * 0x1.0p-53;
    if (u >= p) return ForcedDecision{ForcedKind::Certify, {}};
    if (!filtering || points_per_update <= 0) return ForcedDecision{ForcedKind::Full, {}};
    // Partial Fisher-Yates draw of k interior points, then index order.
    std::vector<std::uint32_t>& candidates = *pool;
    ForcedDecision forced{ForcedKind::Partial, {}};
    forced.points.reserve(static_cast<std::size_t>(points_per_update));
    for (int i = 0; i < points_per_update; ++i) {
      const std::size_t j = i + static_cast<std::size_t>((*gen)() % (candidates.size() - i));
      std::swap(candidates[static_cast<std::size_t>(i)], candidates[j]);
      forced.points.push_back(candidates[static_cast<std::size_t>(i)]);
    }
    std::sort(forced.points.begin(), forced.points.end());
    return forced;
  };
}

enum class SweepVar : std::uint8_t {
  None = 0,
  QMax,
  Rate,
  UpdateProbability,
  UpdateSizeFraction,
  SurrogateLevel,
};

inline const char* sweep_var_name(SweepVar var) {
  switch (var) {
    case SweepVar::None: return "none";
    case SweepVar::QMax: return "q_max";
    case SweepVar::Rate: return "rate";
    case SweepVar::UpdateProbability: return "update_probability";
    case SweepVar::UpdateSizeFraction: return "update_size_fraction";
    case SweepVar::SurrogateLevel: return "surrogate_level";
  }
  return "none";
}

struct Scenario {
  std::string name = "default";
  int surrogate_level = 5;
  int reference_level = 6;
  ModelKind surrogate_kind = ModelKind::FTCS_Explicit;
  ModelKind reference_kind = ModelKind::ADI_CrankNicolson;
  HeatProblem problem{1.0, 1e-4, 100, 1};
  QualitySpec quality{Norm::Max, 0.0078125};
  int n_e = 50;
  double sigma = -1.0;  // negative: use q_max / 2
  std::vector<Strategy> strategies{
      Strategy::make(StrategyKind::SimpleStream), Strategy::make(StrategyKind::AdvancedStream),
      Strategy::make(StrategyKind::FullUpdate), Strategy::make(StrategyKind::PartialUpdate)};
  SweepVar sweep = SweepVar::None;
  std::vector<double> sweep_values;
  int repetitions = 10;
  std::uint64_t seed = 1;
  ChannelConfig channel{1e6, 0.05};
  ClientMode mode = ClientMode::Optimistic;
  CostModel cost;
  SyntheticUpdatePolicy policy;

  void validate() const {
    if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
    if (sweep != SweepVar::None && sweep_values.empty()) {
      throw ConfigError("sweep requested without sweep values");
    }
    if (strategies.empty()) throw ConfigError("scenario needs at least one strategy");
  }
};

struct BenchRow {
  std::uint64_t run_id = 0;
  std::string strategy;
  std::string sweep_var;
  double sweep_value = 0.0;
  int rep = 0;  // -1 marks a median row
  double total_latency_s = 0.0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t n_certify = 0;
  std::uint64_t n_full = 0;
  std::uint64_t n_partial = 0;
  double mean_violation_fraction = 0.0;
  double q_a = 0.0;
  double q_max = 0.0;
  std::string error;
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return (v.size() % 2 == 1) ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

struct ResolvedRun {
  SessionConfig session;
  ChannelConfig channel;
  SyntheticUpdatePolicy policy;
};

inline ResolvedRun resolve_run(const Scenario& sc, SweepVar var, double value, Strategy strategy,
                               int rep) {
  ResolvedRun run;
  run.channel = sc.channel;
  run.policy = sc.policy;

  SessionConfig& cfg = run.session;
  cfg.surrogate_level = sc.surrogate_level;
  cfg.reference_level = sc.reference_level;
  cfg.surrogate_kind = sc.surrogate_kind;
  cfg.reference_kind = sc.reference_kind;
  cfg.problem = sc.problem;
  cfg.quality = sc.quality;
  cfg.n_e = sc.n_e;
  cfg.strategy = strategy;

  switch (var) {
    case SweepVar::None:
      break;
    case SweepVar::QMax:
      cfg.quality.q_max = value;
      break;
    case SweepVar::Rate:
      run.channel.rate_bits_per_s = value;
      break;
    case SweepVar::UpdateProbability:
      run.policy.mode = SyntheticUpdatePolicy::Mode::Bernoulli;
      run.policy.p = value;
      break;
    case SweepVar::UpdateSizeFraction: {
      run.policy.mode = SyntheticUpdatePolicy::Mode::FixedSize;
      run.policy.p = 0.5;
      const int n = make_grid(cfg.surrogate_level).n_points;
      run.policy.k = std::max(1, static_cast<int>(std::lround(value * n)));
      break;
    }
    case SweepVar::SurrogateLevel:
      cfg.surrogate_level = static_cast<int>(value);
      break;
  }

  cfg.sigma = sc.sigma >= 0.0 ? sc.sigma : cfg.quality.q_max / 2.0;
  // Same initial state and seeds across strategies and sweep values, so
  // comparisons are paired.
  const std::uint64_t rep_salt = static_cast<std::uint64_t>(rep);
  cfg.basic_seed = mix_seed(sc.seed, rep_salt * 2 + 1);
  cfg.initial_reference =
      random_interior_state(make_grid(cfg.reference_level), mix_seed(sc.seed, rep_salt * 2));
  return run;
}

}  // namespace detail

/// One row per (sweep value, strategy, repetition), plus per-group median
/// rows. Infeasible configurations become error rows and the sweep
/// continues.
inline std::vector<BenchRow> run_scenario(const Scenario& sc) {
  sc.validate();
  std::vector<BenchRow> rows;
  std::uint64_t run_id = 0;

  const std::vector<double> values = sc.sweep == SweepVar::None ? std::vector<double>{0.0}
                                                                : sc.sweep_values;
  for (double value : values) {
    for (const Strategy& strategy : sc.strategies) {
      std::vector<BenchRow> group;
      for (int rep = 0; rep < sc.repetitions; ++rep) {
        BenchRow row;
        row.run_id = run_id++;
        row.strategy = strategy_name(strategy.kind);
        row.sweep_var = sweep_var_name(sc.sweep);
        row.sweep_value = value;
        row.rep = rep;
        try {
          auto run = detail::resolve_run(sc, sc.sweep, value, strategy, rep);
          row.q_max = run.session.quality.q_max;
          const DecisionOverride override_fn =
              inject_synthetic(run.policy, strategy.kind, run.session.surrogate_grid(),
                               mix_seed(sc.seed, static_cast<std::uint64_t>(rep) * 2 + 7));
          RunPairResult pair = run_pair(run.session, run.channel, sc.mode, sc.cost, override_fn);

          const Restriction restriction =
              make_restriction(run.session.reference_grid(), run.session.surrogate_grid());
          row.total_latency_s = pair.client.total_latency;
          row.bytes_sent = pair.server.stats.bytes_sent;
          row.n_certify = pair.server.count(MessageKind::Certify);
          row.n_full = pair.server.count(MessageKind::FullUpdate);
          row.n_partial = pair.server.count(MessageKind::PartialUpdate);
          row.q_a = chain_quality(pair.client.approx_chain, pair.server.reference_chain,
                                  run.session.quality, restriction);

          double fraction_sum = 0.0;
          std::uint64_t fraction_count = 0;
          for (std::size_t points : pair.server.update_points) {
            if (points > 0) {
              fraction_sum += static_cast<double>(points) / run.session.surrogate_grid().n_points;
              ++fraction_count;
            }
          }
          row.mean_violation_fraction =
              fraction_count > 0 ? fraction_sum / static_cast<double>(fraction_count) : 0.0;
        } catch (const ConfigError& e) {
          row.error = e.what();
        }
        group.push_back(row);
        rows.push_back(group.back());
      }

      // Componentwise median over the successful repetitions.
      std::vector<double> lat, bytes, certify, full, partial, fraction, qa;
      for (const BenchRow& r : group) {
        if (!r.error.empty()) continue;
        lat.push_back(r.total_latency_s);
        bytes.push_back(static_cast<double>(r.bytes_sent));
        certify.push_back(static_cast<double>(r.n_certify));
        full.push_back(static_cast<double>(r.n_full));
        partial.push_back(static_cast<double>(r.n_partial));
        fraction.push_back(r.mean_violation_fraction);
        qa.push_back(r.q_a);
      }
      if (!lat.empty()) {
        BenchRow med = group.front();
        med.run_id = run_id++;
        med.rep = -1;
        med.error.clear();
        med.total_latency_s = detail::median(lat);
        med.bytes_sent = static_cast<std::uint64_t>(detail::median(bytes));
        med.n_certify = static_cast<std::uint64_t>(detail::median(certify));
        med.n_full = static_cast<std::uint64_t>(detail::median(full));
        med.n_partial = static_cast<std::uint64_t>(detail::median(partial));
        med.mean_violation_fraction = detail::median(fraction);
        med.q_a = detail::median(qa);
        rows.push_back(med);
      }
    }
  }
  return rows;
}

inline void write_csv(const std::vector<BenchRow>& rows, std::ostream& out) {
  out << "run_id,strategy,sweep_var,sweep_value,rep,total_latency_s,bytes_sent,"
         "n_certify,n_full,n_partial,mean_violation_fraction,q_a,q_max,error\n";
  for (const BenchRow& r : rows) {
    out << r.run_id << ',' << r.strategy << ',' << r.sweep_var << ',' << r.sweep_value << ',';
    if (r.rep < 0) {
      out << "median";
    } else {
      out << r.rep;
    }
    out << ',' << r.total_latency_s << ',' << r.bytes_sent << ',' << r.n_certify << ',' << r.n_full
        << ',' << r.n_partial << ',' << r.mean_violation_fraction << ',' << r.q_a << ',' << r.q_max
        << ',' << r.error << '\n';
  }
}

inline void emit_csv(const std::vector<BenchRow>& rows, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw ConfigError("cannot open " + path + " for writing");
  write_csv(rows, file);
  if (!file.good()) throw ConfigError("write to " + path + " failed");
}

/// Per-sweep-value medians with speedups against the simple-stream baseline.
inline void emit_summary(const std::vector<BenchRow>& rows, std::ostream& out) {
  std::map<double, std::map<std::string, double>> medians;
  for (const BenchRow& r : rows) {
    if (r.rep == -1 && r.error.empty()) medians[r.sweep_value][r.strategy] = r.total_latency_s;
  }
  out << "sweep_value strategy median_latency_s speedup_vs_simple_stream\n";
  for (const auto& [value, by_strategy] : medians) {
    const auto baseline = by_strategy.find("simple_stream");
    for (const auto& [strategy, latency] : by_strategy) {
      out << value << ' ' << strategy << ' ' << latency << ' ';
      if (baseline != by_strategy.end() && latency > 0.0) {
        out << baseline->second / latency;
      } else {
        out << "n/a";
      }
      out << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Canned scenarios matching the shipped config files.

inline Scenario default_scenario() { return Scenario{}; }

inline Scenario violations_scenario(int repetitions = 10, std::uint64_t seed = 1) {
  Scenario sc;
  sc.name = "violations";
  sc.strategies = {Strategy::make(StrategyKind::FullUpdate),
                   Strategy::make(StrategyKind::PartialUpdate)};
  sc.sweep = SweepVar::QMax;
  sc.sweep_values = {0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125};  // 2^-5 .. 2^-9
  sc.repetitions = repetitions;
  sc.seed = seed;
  return sc;
}

struct ViolationStats {
  double q_max = 0.0;
  double state_ratio_median = 0.0;     // updated states / n_t (full-update runs)
  double point_fraction_median = 0.0;  // mean selected fraction (partial runs)
};

inline std::vector<ViolationStats> violation_statistics(const std::vector<BenchRow>& rows, int n_t) {
  std::map<double, ViolationStats> by_qmax;
  std::map<double, std::vector<double>> state_ratios, point_fractions;
  for (const BenchRow& r : rows) {
    if (r.rep < 0 || !r.error.empty()) continue;
    if (r.strategy == strategy_name(StrategyKind::FullUpdate)) {
      state_ratios[r.sweep_value].push_back(static_cast<double>(r.n_full) / n_t);
    } else if (r.strategy == strategy_name(StrategyKind::PartialUpdate)) {
      point_fractions[r.sweep_value].push_back(r.mean_violation_fraction);
    }
  }
  std::vector<ViolationStats> out;
  for (auto& [q_max, ratios] : state_ratios) {
    ViolationStats st;
    st.q_max = q_max;
    st.state_ratio_median = detail::median(ratios);
    st.point_fraction_median = detail::median(point_fractions[q_max]);
    out.push_back(st);
  }
  std::sort(out.begin(), out.end(),
            [](const ViolationStats& a, const ViolationStats& b) { return a.q_max > b.q_max; });
  return out;
}

}  // namespace simsync
