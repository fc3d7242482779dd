#pragma once

// Discrete approximation of gradient flow on the empirical risk: gradient
// descent with step base_step / L(W), an update-norm clamp, and step halving
// whenever the risk would increase. Trajectories are checkpointed on the
// accuracy axis tau = ln(n / L(W)) rather than on the step count.

#include <cstdint>
#include <functional>
#include <vector>

#include "homoflow/dataset.hpp"
#include "homoflow/losses.hpp"
#include "homoflow/metrics.hpp"
#include "homoflow/models.hpp"
#include "homoflow/params.hpp"

namespace homoflow {

struct FlowConfig {
  double base_step = 0.05;
  double clamp = 0.1;
  double target_accuracy = 60.0;
  double checkpoint_spacing = 0.5;
  std::int64_t max_steps = 5'000'000;
  std::uint64_t seed = 0;
  /// Fixed step of the warmup descent.
  double warmup_step = 0.01;
  std::int64_t warmup_max_steps = 200'000;
  /// Long-double loss accumulation once tau exceeds 50.
  bool extended_precision = false;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

struct FlowState {
  ParamVec w;
  std::int64_t step = 0;
  double loss_log = 0.0;  // ln L(W)
  double tau = 0.0;       // ln n - loss_log
  double zeta = 0.0;      // path length of W / |W| so far
  std::vector<double> last_dir;
  std::vector<double> margins;  // p_i(W), cached for the next step
};

struct Trajectory {
  std::vector<MetricsRecord> records;
  FlowState final;
};

/// Called at every checkpoint with the state and its record.
using CheckpointObserver = std::function<void(const FlowState&, const MetricsRecord&)>;

/// True iff sum_i ell(p_i(W)) < ell(0).
bool check_init(LossKind kind, const PredictorSpec& spec, const Dataset& data,
                const ParamVec& w);

/// Brings W into the region L(W) < 0.99 ell(0) by fixed-step descent on L
/// (update norm clamped like the flow). Throws WarmupFailed when
/// warmup_max_steps run out.
ParamVec warmup(const PredictorSpec& spec, const Dataset& data, const ParamVec& w_init,
                LossKind kind, const FlowConfig& config);

FlowState initial_state(const PredictorSpec& spec, const Dataset& data, LossKind kind,
                        const ParamVec& w);

/// One loss-normalized descent step. Throws StalledFlow when 30 halvings
/// cannot prevent a loss increase.
FlowState step(const FlowState& state, const PredictorSpec& spec, const Dataset& data,
               LossKind kind, const FlowConfig& config);

/// Steps until tau >= target_accuracy or max_steps, recording a MetricsRecord
/// at the start and whenever tau crosses the next multiple of
/// checkpoint_spacing. Throws DomainError if check_init fails.
Trajectory run(const PredictorSpec& spec, const Dataset& data, LossKind kind,
               const FlowConfig& config, const ParamVec& w0,
               const CheckpointObserver& observer = {});

}  // namespace homoflow
