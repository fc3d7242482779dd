#include "homoflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "homoflow/error.hpp"
#include "homoflow/kernels.hpp"

namespace homoflow {
namespace {

constexpr int kMaxHalvings = 30;
constexpr double kLossIncreaseTolerance = 1e-12;
constexpr double kExtendedPrecisionTau = 50.0;
constexpr double kWarmupTarget = 0.99;

Precision precision_for(const FlowConfig& config, double tau) {
  return (config.extended_precision && tau > kExtendedPrecisionTau) ? Precision::Extended
                                                                    : Precision::Double;
}

double log_n(const Dataset& data) { return std::log(static_cast<double>(data.size())); }

}  // namespace

void FlowConfig::validate() const {
  if (!(base_step > 0.0)) throw ConfigError("base_step must be positive");
  if (!(clamp > 0.0)) throw ConfigError("clamp must be positive");
  if (!std::isfinite(target_accuracy)) throw ConfigError("target_accuracy must be finite");
  if (!(checkpoint_spacing > 0.0)) throw ConfigError("checkpoint_spacing must be positive");
  if (max_steps <= 0) throw ConfigError("max_steps must be positive");
  if (!(warmup_step > 0.0)) throw ConfigError("warmup_step must be positive");
  if (warmup_max_steps < 0) throw ConfigError("warmup_max_steps must be nonnegative");
}

bool check_init(LossKind kind, const PredictorSpec& spec, const Dataset& data,
                const ParamVec& w) {
  const std::vector<double> p = margins(spec, w, data);
  return log_total_loss(kind, p) < std::log(ell(kind, 0.0));
}

ParamVec warmup(const PredictorSpec& spec, const Dataset& data, const ParamVec& w_init,
                LossKind kind, const FlowConfig& config) {
  const double threshold = std::log(kWarmupTarget * ell(kind, 0.0));
  ParamVec w = w_init;
  for (std::int64_t it = 0;; ++it) {
    const std::vector<double> p = margins(spec, w, data);
    if (log_total_loss(kind, p) < threshold) return w;
    if (it >= config.warmup_max_steps) {
      throw WarmupFailed("risk still " + std::to_string(std::exp(log_total_loss(kind, p))) +
                         " after " + std::to_string(it) + " warmup steps");
    }
    std::vector<double> coef(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) coef[i] = -ell_prime(kind, p[i]);
    const std::vector<double> descent = weighted_margin_grad(spec, w, data, coef);
    const double gnorm = norm(descent);
    if (gnorm == 0.0) {
      throw WarmupFailed("zero gradient before the risk dropped below ell(0)");
    }
    const double s = std::min(config.warmup_step, config.clamp / gnorm);
    std::vector<double> next(w.values().begin(), w.values().end());
    kernels::axpy(s, descent, next);
    w = w.with_values(std::move(next));
  }
}

FlowState initial_state(const PredictorSpec& spec, const Dataset& data, LossKind kind,
                        const ParamVec& w) {
  FlowState s;
  s.w = w;
  s.margins = margins(spec, w, data);
  s.loss_log = log_total_loss(kind, s.margins);
  s.tau = log_n(data) - s.loss_log;
  s.last_dir = unit_direction(w.values());
  return s;
}

FlowState step(const FlowState& state, const PredictorSpec& spec, const Dataset& data,
               LossKind kind, const FlowConfig& config) {
  const Precision precision = precision_for(config, state.tau);
  const std::vector<double> q = dual_weights(kind, state.margins, precision);
  // -grad L = c * grad alpha with c = -ell'(alpha) and grad alpha = sum_i q_i grad p_i.
  const std::vector<double> grad_alpha = weighted_margin_grad(spec, state.w, data, q);
  const double ga_norm = norm(grad_alpha);

  FlowState next = state;
  next.step = state.step + 1;
  if (ga_norm == 0.0) return next;

  const double c_over_l =
      std::exp(log_neg_ell_prime_at_alpha(kind, state.loss_log) - state.loss_log);
  // Update = s * grad alpha; s = eta_eff * c with eta_eff = min(eta0 / L, clamp / |grad L|).
  double s = std::min(config.base_step * c_over_l, config.clamp / ga_norm);
  for (int halving = 0; halving <= kMaxHalvings; ++halving, s *= 0.5) {
    std::vector<double> trial(state.w.values().begin(), state.w.values().end());
    kernels::axpy(s, grad_alpha, trial);
    ParamVec w_trial = state.w.with_values(std::move(trial));
    std::vector<double> p = margins(spec, w_trial, data);
    const double loss_log = log_total_loss(kind, p, precision);
    if (loss_log - state.loss_log > kLossIncreaseTolerance) continue;

    std::vector<double> dir = unit_direction(w_trial.values());
    double moved_sq = 0.0;
    for (std::size_t i = 0; i < dir.size(); ++i) {
      const double d = dir[i] - state.last_dir[i];
      moved_sq += d * d;
    }
    next.w = std::move(w_trial);
    next.margins = std::move(p);
    next.loss_log = loss_log;
    next.tau = log_n(data) - loss_log;
    next.zeta = state.zeta + std::sqrt(moved_sq);
    next.last_dir = std::move(dir);
    return next;
  }
  throw StalledFlow("loss increased after " + std::to_string(kMaxHalvings) +
                    " step halvings at step " + std::to_string(state.step) +
                    ", tau " + std::to_string(state.tau));
}

Trajectory run(const PredictorSpec& spec, const Dataset& data, LossKind kind,
               const FlowConfig& config, const ParamVec& w0,
               const CheckpointObserver& observer) {
  config.validate();
  if (!check_init(kind, spec, data, w0)) {
    throw DomainError("initial risk must be below ell(0); run warmup first");
  }
  Trajectory traj;
  FlowState state = initial_state(spec, data, kind, w0);
  auto record = [&](const FlowState& s) {
    MetricsRecord r =
        measure(spec, data, kind, s.w, s.step, s.zeta, precision_for(config, s.tau));
    if (observer) observer(s, r);
    traj.records.push_back(std::move(r));
  };
  auto next_mark = [&](double tau) {
    return (std::floor(tau / config.checkpoint_spacing) + 1.0) * config.checkpoint_spacing;
  };

  record(state);
  double mark = next_mark(state.tau);
  bool last_recorded = true;
  while (state.tau < config.target_accuracy && state.step < config.max_steps) {
    FlowState next = step(state, spec, data, kind, config);
    const bool stationary = next.w == state.w;
    state = std::move(next);
    last_recorded = false;
    if (stationary) break;
    if (state.tau >= mark) {
      record(state);
      last_recorded = true;
      mark = next_mark(state.tau);
    }
  }
  if (!last_recorded && state.tau > traj.records.back().tau) record(state);
  traj.final = std::move(state);
  return traj;
}

}  // namespace homoflow
