#pragma once

// JSON scenario files for the bench CLI. Every field is optional and
// defaults to the standard desk-scale configuration; see configs/ for
// examples and README.md for the schema.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "simsync/bench.hpp"

namespace simsync {

namespace detail {

inline Strategy strategy_from_string(const std::string& name, double combined_threshold) {
  if (name == "simple_stream") return Strategy::make(StrategyKind::SimpleStream);
  if (name == "advanced_stream") return Strategy::make(StrategyKind::AdvancedStream);
  if (name == "full_update") return Strategy::make(StrategyKind::FullUpdate);
  if (name == "partial_update") return Strategy::make(StrategyKind::PartialUpdate);
  if (name == "combined") return Strategy::make(StrategyKind::Combined, combined_threshold);
  throw ConfigError("unknown strategy '" + name + "'");
}

inline SweepVar sweep_var_from_string(const std::string& name) {
  if (name == "none") return SweepVar::None;
  if (name == "q_max") return SweepVar::QMax;
  if (name == "rate") return SweepVar::Rate;
  if (name == "update_probability") return SweepVar::UpdateProbability;
  if (name == "update_size_fraction") return SweepVar::UpdateSizeFraction;
  if (name == "surrogate_level") return SweepVar::SurrogateLevel;
  throw ConfigError("unknown sweep variable '" + name + "'");
}

}  // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario sc;
  sc.name = j.value("name", sc.name);
  sc.surrogate_level = j.value("surrogate_level", sc.surrogate_level);
  sc.reference_level = j.value("reference_level", sc.reference_level);
  sc.problem.alpha = j.value("alpha", sc.problem.alpha);
  sc.problem.dt = j.value("dt", sc.problem.dt);
  sc.problem.n_t = j.value("n_t", sc.problem.n_t);
  sc.problem.n_ref = j.value("n_ref", sc.problem.n_ref);
  sc.quality.q_max = j.value("q_max", sc.quality.q_max);
  if (j.contains("norm")) {
    const std::string norm = j["norm"];
    if (norm == "max") {
      sc.quality.norm = Norm::Max;
    } else if (norm == "euclidean") {
      sc.quality.norm = Norm::Euclidean;
    } else {
      throw ConfigError("unknown norm '" + norm + "'");
    }
  }
  sc.n_e = j.value("n_e", sc.n_e);
  sc.sigma = j.value("sigma", sc.sigma);
  sc.repetitions = j.value("repetitions", sc.repetitions);
  sc.seed = j.value("seed", sc.seed);

  const double combined_threshold = j.value("combined_threshold", 0.20);
  if (j.contains("strategies")) {
    sc.strategies.clear();
    for (const auto& name : j["strategies"]) {
      sc.strategies.push_back(detail::strategy_from_string(name, combined_threshold));
    }
  }

  if (j.contains("sweep")) {
    sc.sweep = detail::sweep_var_from_string(j["sweep"].value("var", "none"));
    sc.sweep_values = j["sweep"].value("values", std::vector<double>{});
  }

  if (j.contains("channel")) {
    sc.channel.rate_bits_per_s = j["channel"].value("rate_bits_per_s", sc.channel.rate_bits_per_s);
    sc.channel.latency_s = j["channel"].value("latency_s", sc.channel.latency_s);
    sc.channel.bucket_bytes = j["channel"].value("bucket_bytes", sc.channel.bucket_bytes);
  }

  if (j.contains("client_mode")) {
    const std::string mode = j["client_mode"];
    if (mode == "optimistic") {
      sc.mode = ClientMode::Optimistic;
    } else if (mode == "pessimistic") {
      sc.mode = ClientMode::Pessimistic;
    } else {
      throw ConfigError("unknown client mode '" + mode + "'");
    }
  }

  if (j.contains("policy")) {
    const auto& p = j["policy"];
    const std::string mode = p.value("mode", "real");
    if (mode == "real") {
      sc.policy.mode = SyntheticUpdatePolicy::Mode::Real;
    } else if (mode == "bernoulli") {
      sc.policy.mode = SyntheticUpdatePolicy::Mode::Bernoulli;
    } else if (mode == "fixed_size") {
      sc.policy.mode = SyntheticUpdatePolicy::Mode::FixedSize;
    } else {
      throw ConfigError("unknown policy mode '" + mode + "'");
    }
    sc.policy.p = p.value("p", sc.policy.p);
    sc.policy.k = p.value("k", sc.policy.k);
  }

  if (j.contains("cost")) {
    const auto& c = j["cost"];
    sc.cost.server_stencil_flops = c.value("server_stencil_flops", sc.cost.server_stencil_flops);
    sc.cost.server_blas_flops = c.value("server_blas_flops", sc.cost.server_blas_flops);
    sc.cost.client_slowdown = c.value("client_slowdown", sc.cost.client_slowdown);
  }
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream file(path);
  if (!file) throw ConfigError("cannot open scenario file " + path);
  nlohmann::json j;
  file >> j;
  return scenario_from_json(j);
}

/// Session config for the TCP server, reusing the scenario schema (the first
/// listed strategy applies; sweeps are ignored).
inline SessionConfig session_from_scenario(const Scenario& sc, int rep = 0) {
  auto run = detail::resolve_run(sc, SweepVar::None, 0.0, sc.strategies.front(), rep);
  return run.session;
}

}  // namespace simsync
