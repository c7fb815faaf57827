#pragma once

// End-to-end strategies: the server pipeline (reference runner, mobile state
// tracker, update decision) and the client pipeline (update integration,
// optimistic/pessimistic execution), plus the two stream baselines.
//
// The central invariant is tracker fidelity: the state the server records
// for step i is bit-identical to the state the client publishes for step i,
// for every strategy. Everything the client computes is a deterministic
// function of the Init message and the per-step messages, and the server
// mirrors those computations on the tracked copy.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "simsync/enkf.hpp"
#include "simsync/errors.hpp"
#include "simsync/grid.hpp"
#include "simsync/protocol.hpp"
#include "simsync/quality.hpp"
#include "simsync/solvers.hpp"
#include "simsync/transport.hpp"

namespace simsync {

enum class StrategyKind : std::uint8_t {
  SimpleStream = 0,
  AdvancedStream = 1,
  FullUpdate = 2,
  PartialUpdate = 3,
  Combined = 4,
};

inline const char* strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::SimpleStream: return "simple_stream";
    case StrategyKind::AdvancedStream: return "advanced_stream";
    case StrategyKind::FullUpdate: return "full_update";
    case StrategyKind::PartialUpdate: return "partial_update";
    case StrategyKind::Combined: return "combined";
  }
  return "unknown";
}

struct Strategy {
  StrategyKind kind = StrategyKind::FullUpdate;
  double threshold_fraction = 0.20;  // Combined: partial updates above this fraction become full

  bool uses_ensemble() const {
    return kind == StrategyKind::PartialUpdate || kind == StrategyKind::Combined;
  }
  bool is_stream() const {
    return kind == StrategyKind::SimpleStream || kind == StrategyKind::AdvancedStream;
  }

  static Strategy make(StrategyKind kind, double threshold = 0.20) { return {kind, threshold}; }
};

enum class ClientMode : std::uint8_t { Optimistic = 0, Pessimistic = 1 };

/// Deterministic virtual-time cost model. Each solver/filter call is charged
/// an analytic operation count divided by a pinned throughput constant, so
/// virtual-time latency results are reproducible on any host. The client
/// runs `client_slowdown` times slower than the server. Constants are
/// desk-scale calibrations, not measurements of the build host.
struct CostModel {
  double server_stencil_flops = 2.0e9;   // bandwidth-bound sweeps
  double server_blas_flops = 2.0e10;     // dense filter algebra
  double client_slowdown = 10.0;
  double per_message_s = 2.0e-5;         // framing + syscall overhead
  double per_byte_s = 2.0e-9;            // serialization touch cost

  double ftcs_s(int n) const { return 7.0 * n / server_stencil_flops; }
  double adi_s(int n) const { return 26.0 * n / server_stencil_flops; }
  double step_s(ModelKind kind, int n) const {
    return kind == ModelKind::FTCS_Explicit ? ftcs_s(n) : adi_s(n);
  }
  double forecast_s(int ne, int n, ModelKind kind) const {
    return ne * step_s(kind, n) + mean_s(ne, n);
  }
  double mean_s(int ne, int n) const { return 1.0 * ne * n / server_blas_flops; }
  double generate_s(int ne, int n) const { return 40.0 * ne * n / server_stencil_flops; }
  double quality_s(int n) const { return 4.0 * n / server_stencil_flops; }
  double restrict_s(int n) const { return 2.0 * n / server_stencil_flops; }
  double analyze_s(int n, int m, int ne) const {
    const double flops = 2.0 * static_cast<double>(n) * m * ne   // gain assembly + member updates
                         + 3.0 * static_cast<double>(m) * ne * ne
                         + static_cast<double>(n) * ne * ne
                         + 10.0 * static_cast<double>(ne) * ne * ne;
    return flops / server_blas_flops;
  }
  double message_s(std::size_t bytes) const {
    return per_message_s + static_cast<double>(bytes) * per_byte_s;
  }
};

struct SessionConfig {
  int surrogate_level = 5;
  int reference_level = 6;
  ModelKind surrogate_kind = ModelKind::FTCS_Explicit;
  ModelKind reference_kind = ModelKind::ADI_CrankNicolson;
  HeatProblem problem;
  QualitySpec quality;
  int n_e = 50;
  double sigma = 0.00390625;  // q_max / 2 by default
  std::uint64_t basic_seed = 1;
  Strategy strategy;
  StateVector initial_reference;  // reference-grid state, prepared on the server

  GridLevel surrogate_grid() const { return make_grid(surrogate_level); }
  GridLevel reference_grid() const { return make_grid(reference_level); }

  void validate() const {
    problem.validate();
    if (reference_level < surrogate_level) {
      throw ConfigError("reference level must not be coarser than the surrogate level");
    }
    if (!(quality.q_max > 0.0)) throw ConfigError("q_max must be positive");
    if (n_e < 2) throw ConfigError("n_e must be at least 2");
    if (sigma < 0.0) throw ConfigError("sigma must be non-negative");
    if (strategy.kind == StrategyKind::Combined &&
        (strategy.threshold_fraction < 0.0 || strategy.threshold_fraction > 1.0)) {
      throw ConfigError("combined threshold must lie in [0, 1]");
    }
    if (initial_reference.level != reference_grid()) {
      throw ConfigError("initial state must live on the reference grid");
    }
    if (surrogate_kind == ModelKind::FTCS_Explicit &&
        stability_ratio(surrogate_grid(), problem.alpha, problem.dt) > 0.25 + 1e-12) {
      throw ConfigError("surrogate FTCS unstable at level " + std::to_string(surrogate_level));
    }
    if (reference_kind == ModelKind::FTCS_Explicit &&
        stability_ratio(reference_grid(), problem.alpha, problem.dt / problem.n_ref) > 0.25 + 1e-12) {
      throw ConfigError("reference FTCS unstable at level " + std::to_string(reference_level));
    }
  }
};

// ---------------------------------------------------------------------------
// Synthetic decision overrides (bench experiments).

enum class ForcedKind : std::uint8_t { Certify, Full, Partial };

struct ForcedDecision {
  ForcedKind kind = ForcedKind::Certify;
  std::vector<std::uint32_t> points;  // Partial only, strictly increasing
};

using DecisionOverride = std::function<std::optional<ForcedDecision>(std::uint32_t step)>;

// ---------------------------------------------------------------------------
// Run results.

struct MessageRecord {
  std::uint32_t step = 0;
  MessageKind kind = MessageKind::Init;
  std::size_t bytes = 0;
  double enqueue_time = 0.0;
  double delivery_time = 0.0;
};

struct RunResult {
  std::vector<StateVector> approx_chain;  // client: published; server: tracked
  std::vector<MessageRecord> messages;
  TransportStats stats;
  std::vector<double> publish_times;  // virtual seconds per step (client side)
  double total_latency = 0.0;

  // Server-side extras.
  std::vector<StateVector> reference_chain;
  std::vector<double> quality_log;          // q_i per step (index 0 unused)
  std::vector<std::size_t> update_points;   // selected points per step (0 when none)

  std::uint64_t count(MessageKind kind) const {
    std::uint64_t n = 0;
    for (const auto& m : messages) n += (m.kind == kind) ? 1 : 0;
    return n;
  }
};

struct RunPairResult {
  RunResult client;
  RunResult server;
};

// ---------------------------------------------------------------------------
// Server session.

struct ServerStepOutput {
  Message message;
  MessageKind kind = MessageKind::Certify;
  double decision_seconds = 0.0;
  double q_value = 0.0;
  std::size_t selected_points = 0;
};

/// Runs the reference model and the mobile state tracker, deciding per step
/// whether the client's surrogate result may be certified or which update to
/// send. Pure in-memory state machine; transports and clocks live outside.
class ServerSession {
 public:
  ServerSession(SessionConfig cfg, CostModel cost = {})
      : cfg_(std::move(cfg)), cost_(cost), restriction_(make_restriction(cfg_.reference_grid(),
                                                                         cfg_.surrogate_grid())) {
    cfg_.validate();
    ref_state_ = cfg_.initial_reference;
    reference_chain_.push_back(ref_state_);
    tracked_ = restriction_.apply(ref_state_);
    tracked_chain_.push_back(tracked_);
    quality_log_.push_back(0.0);
    update_points_.push_back(0);
    if (cfg_.strategy.uses_ensemble()) {
      ensemble_ = generate_members(tracked_, cfg_.n_e, SeedPolicy{cfg_.basic_seed}, 0,
                                   PerturbationSpec{cfg_.sigma});
      init_seconds_ += cost_.generate_s(cfg_.n_e, surrogate_points());
    }
    init_seconds_ += cost_.restrict_s(surrogate_points());
  }

  const SessionConfig& config() const { return cfg_; }
  const Restriction& restriction() const { return restriction_; }

  Message init_message() const {
    InitMessage init;
    init.surrogate_level = static_cast<std::uint8_t>(cfg_.surrogate_level);
    init.reference_level = static_cast<std::uint8_t>(cfg_.reference_level);
    init.n_t = static_cast<std::uint32_t>(cfg_.problem.n_t);
    init.dt = cfg_.problem.dt;
    init.alpha = cfg_.problem.alpha;
    init.q_max = cfg_.quality.q_max;
    init.sigma = cfg_.sigma;
    init.norm = static_cast<std::uint8_t>(cfg_.quality.norm);
    init.n_e = static_cast<std::uint16_t>(cfg_.n_e);
    init.basic_seed = cfg_.basic_seed;
    init.strategy = static_cast<std::uint8_t>(cfg_.strategy.kind);
    init.initial_state = tracked_chain_.front().values;
    return init;
  }

  double init_seconds() const { return init_seconds_; }

  double reference_step_seconds() const {
    return cfg_.problem.n_ref * cost_.step_s(cfg_.reference_kind, reference_points());
  }

  bool done() const { return next_step_ > static_cast<std::uint32_t>(cfg_.problem.n_t); }

  void set_decision_override(DecisionOverride override_fn) { override_ = std::move(override_fn); }

  ServerStepOutput step() {
    if (done()) throw std::logic_error("server session already finished");
    const std::uint32_t i = next_step_++;
    ref_state_ = advance_emitted(ref_state_, cfg_.reference_kind, cfg_.problem);
    reference_chain_.push_back(ref_state_);

    ServerStepOutput out;
    switch (cfg_.strategy.kind) {
      case StrategyKind::SimpleStream: {
        out.message = StreamStateMessage{i, ref_state_.values};
        out.kind = MessageKind::StreamState;
        tracked_ = restriction_.apply(ref_state_);
        out.decision_seconds = cost_.restrict_s(surrogate_points());
        break;
      }
      case StrategyKind::AdvancedStream: {
        tracked_ = restriction_.apply(ref_state_);
        out.message = StreamStateMessage{i, tracked_.values};
        out.kind = MessageKind::StreamState;
        out.decision_seconds = cost_.restrict_s(surrogate_points());
        break;
      }
      case StrategyKind::FullUpdate: {
        out = full_update_step(i);
        break;
      }
      case StrategyKind::PartialUpdate:
      case StrategyKind::Combined: {
        out = filtering_step(i);
        break;
      }
    }
    tracked_chain_.push_back(tracked_);
    quality_log_.push_back(out.q_value);
    update_points_.push_back(out.selected_points);
    return out;
  }

  const std::vector<StateVector>& tracked_chain() const { return tracked_chain_; }
  const std::vector<StateVector>& reference_chain() const { return reference_chain_; }
  const std::vector<double>& quality_log() const { return quality_log_; }
  const std::vector<std::size_t>& update_points() const { return update_points_; }

 private:
  int surrogate_points() const { return cfg_.surrogate_grid().n_points; }
  int reference_points() const { return cfg_.reference_grid().n_points; }

  StateVector surrogate_advance(const StateVector& s) const {
    return model_step(s, cfg_.surrogate_kind, cfg_.problem.alpha, cfg_.problem.dt);
  }

  ServerStepOutput full_update_step(std::uint32_t i) {
    ServerStepOutput out;
    const StateVector surrogate_next = surrogate_advance(tracked_);
    out.decision_seconds += cost_.step_s(cfg_.surrogate_kind, surrogate_points());
    out.q_value = step_quality(surrogate_next, ref_state_, cfg_.quality, restriction_);
    out.decision_seconds += cost_.quality_s(surrogate_points()) + cost_.restrict_s(surrogate_points());

    bool send_full = out.q_value > cfg_.quality.q_max;
    if (override_) {
      if (auto forced = override_(i)) {
        if (forced->kind == ForcedKind::Partial) {
          throw ConfigError("partial overrides require a filtering strategy");
        }
        send_full = forced->kind == ForcedKind::Full;
      }
    }
    if (send_full) {
      tracked_ = restriction_.apply(ref_state_);
      out.message = FullUpdateMessage{i, tracked_.values};
      out.kind = MessageKind::FullUpdate;
    } else {
      tracked_ = surrogate_next;
      out.message = CertifyMessage{i};
      out.kind = MessageKind::Certify;
    }
    return out;
  }

  ServerStepOutput filtering_step(std::uint32_t i) {
    ServerStepOutput out;
    Ensemble forecast_ens = forecast(*ensemble_, [this](const StateVector& s) {
      return surrogate_advance(s);
    });
    out.decision_seconds += cost_.forecast_s(cfg_.n_e, surrogate_points(), cfg_.surrogate_kind);

    const std::size_t cap = cfg_.strategy.kind == StrategyKind::Combined
                                ? static_cast<std::size_t>(cfg_.strategy.threshold_fraction *
                                                           surrogate_points())
                                : std::numeric_limits<std::size_t>::max();

    if (override_) {
      if (auto forced = override_(i)) {
        return forced_filtering_step(i, std::move(forecast_ens), *forced, out);
      }
    }

    double analyze_cost = 0.0;
    AnalyzeFn analyze_fn = [this, &analyze_cost](const Ensemble& ens, const PartialObservation& obs) {
      analyze_cost += cost_.analyze_s(ens.grid().n_points, static_cast<int>(obs.size()), ens.size());
      return analyze(ens, obs);
    };
    SelectionResult sel = select_violation_points_ex(forecast_ens, ref_state_, cfg_.quality,
                                                     restriction_, analyze_fn, cap);
    out.q_value = sel.report.q_value;
    out.decision_seconds += analyze_cost + cost_.quality_s(surrogate_points()) +
                            cost_.restrict_s(surrogate_points()) +
                            (sel.verification_rounds + 1) * cost_.mean_s(cfg_.n_e, surrogate_points());

    if (!sel.report.violating) {
      ensemble_ = std::move(forecast_ens);
      tracked_ = ensemble_mean(*ensemble_);
      out.message = CertifyMessage{i};
      out.kind = MessageKind::Certify;
      return out;
    }
    if (sel.exceeded_cap) {
      tracked_ = restriction_.apply(ref_state_);
      ensemble_ = generate_members(tracked_, cfg_.n_e, SeedPolicy{cfg_.basic_seed}, i,
                                   PerturbationSpec{cfg_.sigma});
      out.decision_seconds += cost_.generate_s(cfg_.n_e, surrogate_points());
      out.message = FullUpdateMessage{i, tracked_.values};
      out.kind = MessageKind::FullUpdate;
      return out;
    }
    ensemble_ = std::move(*sel.analyzed);
    tracked_ = ensemble_mean(*ensemble_);
    out.selected_points = sel.report.violation_points.size();
    out.message = PartialUpdateMessage{i, std::move(sel.report.violation_points)};
    out.kind = MessageKind::PartialUpdate;
    return out;
  }

  ServerStepOutput forced_filtering_step(std::uint32_t i, Ensemble forecast_ens,
                                         const ForcedDecision& forced, ServerStepOutput out) {
    // Quality bookkeeping still runs, but the decision is the injected one.
    const StateVector mean = ensemble_mean(forecast_ens);
    out.q_value = step_quality(mean, ref_state_, cfg_.quality, restriction_);
    out.decision_seconds += cost_.quality_s(surrogate_points()) +
                            cost_.restrict_s(surrogate_points()) +
                            cost_.mean_s(cfg_.n_e, surrogate_points());
    switch (forced.kind) {
      case ForcedKind::Certify: {
        ensemble_ = std::move(forecast_ens);
        tracked_ = mean;
        out.message = CertifyMessage{i};
        out.kind = MessageKind::Certify;
        break;
      }
      case ForcedKind::Full: {
        tracked_ = restriction_.apply(ref_state_);
        ensemble_ = generate_members(tracked_, cfg_.n_e, SeedPolicy{cfg_.basic_seed}, i,
                                     PerturbationSpec{cfg_.sigma});
        out.decision_seconds += cost_.generate_s(cfg_.n_e, surrogate_points());
        out.message = FullUpdateMessage{i, tracked_.values};
        out.kind = MessageKind::FullUpdate;
        break;
      }
      case ForcedKind::Partial: {
        const StateVector restricted = restriction_.apply(ref_state_);
        PartialObservation obs;
        obs.pairs.reserve(forced.points.size());
        for (std::uint32_t pos : forced.points) {
          obs.pairs.emplace_back(pos, restricted.values[pos]);
        }
        obs.validate(surrogate_points());
        ensemble_ = analyze(forecast_ens, obs);
        out.decision_seconds +=
            cost_.analyze_s(surrogate_points(), static_cast<int>(obs.size()), cfg_.n_e) +
            cost_.mean_s(cfg_.n_e, surrogate_points());
        tracked_ = ensemble_mean(*ensemble_);
        out.selected_points = obs.pairs.size();
        out.message = PartialUpdateMessage{i, std::move(obs.pairs)};
        out.kind = MessageKind::PartialUpdate;
        break;
      }
    }
    return out;
  }

  SessionConfig cfg_;
  CostModel cost_;
  Restriction restriction_;
  StateVector ref_state_;
  StateVector tracked_;
  std::optional<Ensemble> ensemble_;
  std::vector<StateVector> tracked_chain_;
  std::vector<StateVector> reference_chain_;
  std::vector<double> quality_log_;
  std::vector<std::size_t> update_points_;
  std::uint32_t next_step_ = 1;
  double init_seconds_ = 0.0;
  DecisionOverride override_;
};

// ---------------------------------------------------------------------------
// Client session.

/// Work the client performed for one step, split into the part a speculative
/// background computation can cover (fwd) and the part that must follow the
/// message (post). Seconds are server-scale; the harness applies the client
/// slowdown.
struct ClientWork {
  double fwd_seconds = 0.0;
  double post_seconds = 0.0;
  bool fwd_wasted = false;  // speculation discarded by a full update
};

struct ClientStepResult {
  std::uint32_t step = 0;
  StateVector published;
  ClientWork work;
};

/// Update integration on the mobile device. Feed it the Init message, then
/// every per-step message in order; it publishes exactly one state per step.
/// In optimistic mode callers run precompute_next() before blocking on the
/// network so the surrogate/forecast overlaps the wait; the state produced
/// is identical either way.
class ClientSession {
 public:
  ClientSession(ClientMode mode, CostModel cost = {}) : mode_(mode), cost_(cost) {}

  ClientMode mode() const { return mode_; }
  bool initialized() const { return initialized_; }
  std::uint32_t expected_step() const { return expected_step_; }
  std::uint32_t total_steps() const { return init_.n_t; }
  const InitMessage& init_info() const { return init_; }

  StateVector on_init(const InitMessage& init) {
    if (initialized_) throw ProtocolError("duplicate init message");
    init_ = init;
    grid_ = make_grid(init.surrogate_level);
    strategy_ = static_cast<StrategyKind>(init.strategy);
    state_ = StateVector{grid_, init.initial_state};
    if (uses_ensemble()) {
      ensemble_ = generate_members(state_, init.n_e, SeedPolicy{init.basic_seed}, 0,
                                   PerturbationSpec{init.sigma});
      init_work_ = cost_.generate_s(init.n_e, grid_.n_points);
    }
    initialized_ = true;
    expected_step_ = 1;
    return state_;
  }

  double init_seconds() const { return init_work_; }

  /// Runs the speculative computation for the next step if the strategy has
  /// one. Idempotent; optimistic callers invoke it before waiting.
  void precompute_next() {
    if (!initialized_ || pending_ || expected_step_ > init_.n_t) return;
    if (strategy_ == StrategyKind::FullUpdate) {
      pending_ = Pending{surrogate_advance(state_), std::nullopt,
                         cost_.step_s(surrogate_kind(), grid_.n_points)};
    } else if (uses_ensemble()) {
      Ensemble fc = forecast(*ensemble_, [this](const StateVector& s) {
        return surrogate_advance(s);
      });
      StateVector mean = ensemble_mean(fc);
      pending_ = Pending{std::move(mean), std::move(fc),
                         cost_.forecast_s(init_.n_e, grid_.n_points, surrogate_kind())};
    }
  }

  ClientStepResult on_message(const Message& msg) {
    if (!initialized_) throw ProtocolError("message before init");
    ClientStepResult result;
    result.step = expected_step_;

    const std::uint32_t step = std::visit([](const auto& m) -> std::uint32_t {
      if constexpr (requires { m.step; }) return m.step;
      else return 0;
    }, msg);
    if (std::holds_alternative<InitMessage>(msg)) throw ProtocolError("duplicate init message");
    if (step != expected_step_) {
      throw ProtocolError("out-of-order step " + std::to_string(step) + ", expected " +
                          std::to_string(expected_step_));
    }
    if (expected_step_ > init_.n_t) throw ProtocolError("message past the final step");

    if (const auto* stream = std::get_if<StreamStateMessage>(&msg)) {
      result = stream_step(*stream);
    } else if (const auto* certify = std::get_if<CertifyMessage>(&msg)) {
      result = certify_step(*certify);
    } else if (const auto* full = std::get_if<FullUpdateMessage>(&msg)) {
      result = full_update_step(*full);
    } else if (const auto* partial = std::get_if<PartialUpdateMessage>(&msg)) {
      result = partial_update_step(*partial);
    }
    ++expected_step_;
    return result;
  }

 private:
  struct Pending {
    StateVector state;                 // surrogate result or forecast mean
    std::optional<Ensemble> ensemble;  // forecast members when filtering
    double seconds = 0.0;
  };

  bool uses_ensemble() const {
    return strategy_ == StrategyKind::PartialUpdate || strategy_ == StrategyKind::Combined;
  }
  ModelKind surrogate_kind() const { return ModelKind::FTCS_Explicit; }

  StateVector surrogate_advance(const StateVector& s) const {
    return model_step(s, surrogate_kind(), init_.alpha, init_.dt);
  }

  Pending take_pending() {
    precompute_next();
    Pending p = std::move(*pending_);
    pending_.reset();
    return p;
  }

  ClientStepResult stream_step(const StreamStateMessage& msg) {
    ClientStepResult r;
    r.step = msg.step;
    if (strategy_ == StrategyKind::SimpleStream) {
      const GridLevel ref_grid = make_grid(init_.reference_level);
      if (msg.state.size() != static_cast<std::size_t>(ref_grid.n_points)) {
        throw ProtocolError("stream state length does not match the reference grid");
      }
      const StateVector received{ref_grid, msg.state};
      state_ = restrict_state(received, grid_);
      r.work.post_seconds = cost_.restrict_s(grid_.n_points);
    } else {
      if (msg.state.size() != static_cast<std::size_t>(grid_.n_points)) {
        throw ProtocolError("stream state length does not match the surrogate grid");
      }
      state_ = StateVector{grid_, msg.state};
    }
    r.published = state_;
    return r;
  }

  ClientStepResult certify_step(const CertifyMessage& msg) {
    ClientStepResult r;
    r.step = msg.step;
    if (strategy_ == StrategyKind::SimpleStream || strategy_ == StrategyKind::AdvancedStream) {
      throw ProtocolError("certify message under a stream strategy");
    }
    Pending p = take_pending();
    r.work.fwd_seconds = p.seconds;
    state_ = std::move(p.state);
    if (p.ensemble) ensemble_ = std::move(p.ensemble);
    r.published = state_;
    return r;
  }

  ClientStepResult full_update_step(const FullUpdateMessage& msg) {
    ClientStepResult r;
    r.step = msg.step;
    if (msg.state.size() != static_cast<std::size_t>(grid_.n_points)) {
      throw ProtocolError("full update length does not match the surrogate grid");
    }
    if (pending_) {
      r.work.fwd_seconds = pending_->seconds;
      r.work.fwd_wasted = true;
      pending_.reset();
    }
    state_ = StateVector{grid_, msg.state};
    if (uses_ensemble()) {
      ensemble_ = generate_members(state_, init_.n_e, SeedPolicy{init_.basic_seed}, msg.step,
                                   PerturbationSpec{init_.sigma});
      r.work.post_seconds = cost_.generate_s(init_.n_e, grid_.n_points);
    }
    r.published = state_;
    return r;
  }

  ClientStepResult partial_update_step(const PartialUpdateMessage& msg) {
    ClientStepResult r;
    r.step = msg.step;
    if (!uses_ensemble()) throw ProtocolError("partial update without a filtering strategy");
    Pending p = take_pending();
    r.work.fwd_seconds = p.seconds;
    PartialObservation obs{msg.pairs};
    obs.validate(grid_.n_points);
    ensemble_ = analyze(*p.ensemble, obs);
    r.work.post_seconds =
        cost_.analyze_s(grid_.n_points, static_cast<int>(obs.size()), init_.n_e) +
        cost_.mean_s(init_.n_e, grid_.n_points);
    state_ = ensemble_mean(*ensemble_);
    r.published = state_;
    return r;
  }

  ClientMode mode_;
  CostModel cost_;
  InitMessage init_;
  GridLevel grid_;
  StrategyKind strategy_ = StrategyKind::FullUpdate;
  StateVector state_;
  std::optional<Ensemble> ensemble_;
  std::optional<Pending> pending_;
  bool initialized_ = false;
  std::uint32_t expected_step_ = 0;
  double init_work_ = 0.0;
};

// ---------------------------------------------------------------------------
// Virtual-time pair harness.

namespace detail {

inline MessageKind kind_of(const Message& msg) {
  return static_cast<MessageKind>(msg.index());
}

}  // namespace detail

/// Runs one server and one client in-process over the emulated channel under
/// virtual time. Deterministic: identical inputs give identical results,
/// timings included. Encoded bytes flow through the real codec so the wire
/// path is exercised end to end.
inline RunPairResult run_pair(const SessionConfig& cfg, const ChannelConfig& channel_cfg,
                              ClientMode mode = ClientMode::Optimistic,
                              const CostModel& cost = {},
                              const DecisionOverride& override_fn = {}) {
  ServerSession server(cfg, cost);
  if (override_fn) server.set_decision_override(override_fn);

  VirtualClock clock;
  EmulatedChannel channel(channel_cfg, clock);

  // Server pipeline: reference stepping (stage 1), decision/tracking
  // (stage 2), and transmission (stage 3) overlap through bounded queues.
  constexpr std::size_t kDecisionQueueDepth = 4;

  RunResult server_result;

  const Message init_msg = server.init_message();
  {
    const double ready = server.init_seconds() + cost.message_s(message_size(init_msg));
    clock.advance_to(ready);
    const Delivery& d = channel.send(encode(init_msg), MessageKind::Init);
    server_result.messages.push_back(
        MessageRecord{0, MessageKind::Init, d.bytes.size(), d.enqueue_time, d.delivery_time});
  }

  std::vector<double> ref_done;    // stage-1 completion per step
  std::vector<double> dec_done;    // stage-2 completion per step
  ref_done.push_back(server.init_seconds());
  dec_done.push_back(server.init_seconds());

  while (!server.done()) {
    ServerStepOutput out = server.step();
    const std::size_t i = ref_done.size();

    double ref_start = ref_done.back();
    if (i > kDecisionQueueDepth) {
      ref_start = std::max(ref_start, dec_done[i - kDecisionQueueDepth]);
    }
    ref_done.push_back(ref_start + server.reference_step_seconds());

    const std::size_t bytes = message_size(out.message);
    const double dec_finish = std::max(ref_done[i], dec_done.back()) + out.decision_seconds +
                              cost.message_s(bytes);
    dec_done.push_back(dec_finish);

    clock.advance_to(dec_finish);
    const Delivery& d = channel.send(encode(out.message), out.kind);
    server_result.messages.push_back(MessageRecord{static_cast<std::uint32_t>(i), out.kind,
                                                   d.bytes.size(), d.enqueue_time,
                                                   d.delivery_time});
  }

  server_result.approx_chain = server.tracked_chain();
  server_result.reference_chain = server.reference_chain();
  server_result.quality_log = server.quality_log();
  server_result.update_points.assign(server.update_points().begin(), server.update_points().end());
  server_result.stats = channel.stats();

  // Client: replay deliveries in order, scheduling compute per mode. The
  // speculative computation runs on a background core, so an abandoned
  // speculation never delays publishing.
  ClientSession client(mode, cost);
  RunResult client_result;
  client_result.stats = channel.stats();
  client_result.messages = server_result.messages;

  const double slow = cost.client_slowdown;
  double idle = 0.0;     // when the client compute resource frees up
  double prev_pub = 0.0;

  const auto& deliveries = channel.deliveries();
  for (std::size_t k = 0; k < deliveries.size(); ++k) {
    const Delivery& d = deliveries[k];
    auto decoded = decode(d.bytes);
    if (!decoded) throw ProtocolError("incomplete frame delivered");

    double publish = 0.0;
    if (const auto* init = std::get_if<InitMessage>(&decoded->message)) {
      StateVector first = client.on_init(*init);
      publish = std::max(d.delivery_time, prev_pub);
      idle = publish + client.init_seconds() * slow;
      client_result.approx_chain.push_back(std::move(first));
    } else {
      ClientStepResult r = client.on_message(decoded->message);
      const double fwd = r.work.fwd_seconds * slow;
      const double post = r.work.post_seconds * slow;
      const MessageKind kind = detail::kind_of(decoded->message);
      if (mode == ClientMode::Optimistic) {
        const double fwd_ready = idle + fwd;
        if (kind == MessageKind::FullUpdate) {
          publish = d.delivery_time;  // background speculation is discarded
          idle = std::max(idle, publish) + post;
        } else if (kind == MessageKind::PartialUpdate) {
          publish = std::max(d.delivery_time, fwd_ready) + post;
          idle = publish;
        } else if (kind == MessageKind::Certify) {
          publish = std::max(d.delivery_time, fwd_ready);
          idle = publish;
        } else {  // stream state
          publish = std::max(d.delivery_time, idle) + post;
          idle = publish;
        }
      } else {
        const double start = std::max(d.delivery_time, idle);
        if (kind == MessageKind::FullUpdate) {
          publish = start;
          idle = publish + post;
        } else {
          publish = start + fwd + post;
          idle = publish;
        }
      }
      client_result.approx_chain.push_back(std::move(r.published));
    }
    publish = std::max(publish, prev_pub);
    prev_pub = publish;
    client_result.publish_times.push_back(publish);
  }
  client_result.total_latency = client_result.publish_times.empty()
                                    ? 0.0
                                    : client_result.publish_times.back();
  server_result.total_latency = client_result.total_latency;

  return RunPairResult{std::move(client_result), std::move(server_result)};
}

}  // namespace simsync
