#pragma once

// Positively homogeneous predictors with hand-written gradients.
//
// Gradient convention at nondifferentiable points: relu'(0) = 0 and the
// derivative of max(0, z)^2 at 0 is 0; max-pooling ties go to the lowest
// index. Every evaluation whose pre-activation lands within 1e-12 of a kink
// bumps a process-wide counter (kink_events()).

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "homoflow/dataset.hpp"
#include "homoflow/params.hpp"

namespace homoflow {

enum class ModelKind { SquaredRelu, DeepLinear, ReluMlp, NtkFrozen };

/// Architecture descriptor. Immutable once built; the factories validate shape.
///
/// Parameter layouts (all row-major):
///   SquaredRelu  m node rows w_j in R^d; Phi = sum_j sign_j max(0, <w_j,x>)^2
///   DeepLinear   A_1 (dims[1] x dims[0]), ..., A_L (1 x dims[L-1]), A_1 first
///   ReluMlp      same as DeepLinear with relu (and optional max-pool) between
///   NtkFrozen    m rows v_j; Phi = sum_j sign_j <v_j,x> max(0, <w_j,x>) with
///                frozen base rows w_j
///
/// Node signs alternate starting with -1: node index j (0-based) has sign
/// (-1)^(j+1), so nodes 1, 3, 5, ... are the positive ones.
class PredictorSpec {
 public:
  static PredictorSpec squared_relu(std::size_t input_dim, std::size_t width);
  /// dims = {d, h_1, ..., h_{L-1}, 1}.
  static PredictorSpec deep_linear(std::vector<std::size_t> dims);
  /// dims = {d, h_1, ..., h_{L-1}, 1}; each hidden width must be divisible by
  /// pool_window, and the pooled width feeds the next layer.
  static PredictorSpec relu_mlp(std::vector<std::size_t> dims,
                                std::size_t pool_window = 1);
  /// base_weights holds the frozen m x d rows w_j.
  static PredictorSpec ntk_frozen(std::size_t input_dim,
                                  std::vector<double> base_weights);

  ModelKind kind() const { return kind_; }
  double degree() const;
  std::size_t input_dim() const { return dims_.front(); }
  /// Node count for SquaredRelu / NtkFrozen, 0 otherwise.
  std::size_t width() const { return width_; }
  std::size_t layer_count() const;
  std::size_t pool_window() const { return pool_; }
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::span<const double> node_signs() const { return signs_; }
  std::span<const double> frozen_weights() const { return frozen_; }

  /// Rows and columns of weight layer j (0-based) for layered kinds.
  std::size_t layer_rows(std::size_t j) const;
  std::size_t layer_cols(std::size_t j) const;

  std::size_t param_count() const;
  /// Per-node segments for node models, per-layer segments for layered ones.
  std::vector<Segment> partition() const;
  ParamVec make_params(std::vector<double> values) const;
  /// Gaussian entries with standard deviation `scale`.
  ParamVec random_params(std::uint64_t seed, double scale) const;

  bool operator==(const PredictorSpec&) const = default;

 private:
  ModelKind kind_ = ModelKind::SquaredRelu;
  std::vector<std::size_t> dims_;
  std::size_t width_ = 0;
  std::size_t pool_ = 1;
  std::vector<double> signs_;
  std::vector<double> frozen_;
};

double node_sign(std::size_t node);

/// Throws ShapeMismatch unless W and x fit the spec.
void check_shape(const PredictorSpec& spec, const ParamVec& w,
                 std::span<const double> x);

double forward(const PredictorSpec& spec, const ParamVec& w,
               std::span<const double> x);
double margin(const PredictorSpec& spec, const ParamVec& w, const Example& ex);
std::vector<double> grad_margin(const PredictorSpec& spec, const ParamVec& w,
                                const Example& ex);
double degree(const PredictorSpec& spec);

/// phi_ij(theta) = y_i sign_j max(0, <theta, x_i>)^2.
double node_features(const Example& ex, std::span<const double> theta,
                     std::size_t node);

/// All margins p_i(W) over a dataset.
std::vector<double> margins(const PredictorSpec& spec, const ParamVec& w,
                            const Dataset& data);
/// sum_i coef_i * grad p_i(W), without materialising per-example gradients.
std::vector<double> weighted_margin_grad(const PredictorSpec& spec,
                                         const ParamVec& w, const Dataset& data,
                                         std::span<const double> coef);

std::uint64_t kink_events();
void reset_kink_events();

}  // namespace homoflow
