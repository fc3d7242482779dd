#pragma once

// Diagnostics computed from a single parameter vector: alignment angle,
// normalized margins, smoothed-margin rate identities, the J potential,
// per-partition alignment, node directions and the planar covering radius.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "homoflow/dataset.hpp"
#include "homoflow/losses.hpp"
#include "homoflow/models.hpp"
#include "homoflow/params.hpp"

namespace homoflow {

struct MetricsRecord {
  std::int64_t step = 0;
  double tau = 0.0;
  double log_loss = 0.0;
  double norm_w = 0.0;
  double alpha = 0.0;
  double alpha_norm = 0.0;
  double beta = 0.0;
  double zeta = 0.0;
  double theta = 0.0;  // radians, angle between W and -grad L
  double j_potential = 0.0;
  double euler_value = 0.0;  // <grad alpha, W> / |W|^L
  double euler_residual = 0.0;
  double rate_alpha = 0.0;  // d alpha_norm / dt from the radial/spherical split
  double rate_zeta = 0.0;   // d zeta / dt
  double dtau_dt = 0.0;     // |grad L|^2 / L, converts t-rates to tau-rates
  std::vector<double> margins_norm;
  std::vector<double> duals;
  std::vector<double> shares;
  std::vector<std::vector<double>> node_dirs;  // empty for layered models
};

/// Angle between W and -g in [0, pi]. Throws ZeroVector if either is zero.
double alignment_angle(std::span<const double> w, std::span<const double> g);

/// p_i / |W|^L. Throws ZeroNorm for norm_w <= 0.
std::vector<double> margin_distribution(std::span<const double> margins,
                                        double norm_w, double degree);

struct RateIdentities {
  double rate_alpha = 0.0;
  double rate_zeta = 0.0;
};

/// Right-hand sides of the smoothed-margin and path-length rate identities,
/// given the loss gradient grad_L at W. Requires L(W) < ell(0).
RateIdentities rate_identities(std::span<const double> w,
                               std::span<const double> grad_loss, LossKind kind,
                               std::span<const double> margins, double degree);

/// Same identities from grad alpha and c = -ell'(alpha) > 0 (grad L = -c grad alpha).
RateIdentities rate_identities_from_alpha(std::span<const double> w,
                                          std::span<const double> grad_alpha,
                                          double neg_ell_prime_alpha, double alpha,
                                          double beta, double degree);

/// |grad alpha|^2 / |W|^{2L-2}.
double j_potential(std::span<const double> w, std::span<const double> grad_alpha,
                   double degree);

/// <grad alpha, W> / |W|^L.
double asymptotic_euler(std::span<const double> w,
                        std::span<const double> grad_alpha, double degree);

struct SegmentAlignment {
  double norm_share = 0.0;  // |U_j| / |W|
  double grad_share = 0.0;  // |g_j| / |g|
  double cosine = 0.0;      // cos(U_j, -g_j); 0 when either block vanishes
};

std::vector<SegmentAlignment> partition_alignment(const ParamVec& w,
                                                  std::span<const double> grad_loss);

/// Unit rows of each segment; rows with |w_j| <= 1e-14 |W| map to zero.
std::vector<std::vector<double>> node_directions(const ParamVec& w);

struct CoverResult {
  double epsilon_cover = 0.0;  // includes grid_slack
  double epsilon_drift = 0.0;  // max_j |theta_j - theta_bar_j|, 0 if no finals given
  double grid_slack = 0.0;     // 2 pi / N
};

/// Planar covering radius of the positive and negative node directions,
/// measured on N equally spaced test directions. signs[j] > 0 marks a
/// positive node. Throws UnsupportedDimension unless every direction is 2-D.
CoverResult covering_check(const std::vector<std::vector<double>>& node_dirs,
                           std::span<const double> signs, std::size_t grid_size,
                           const std::vector<std::vector<double>>* final_dirs = nullptr);

/// Full record at W. grad_alpha_out, when given, receives grad alpha.
MetricsRecord measure(const PredictorSpec& spec, const Dataset& data, LossKind kind,
                      const ParamVec& w, std::int64_t step, double zeta,
                      Precision precision = Precision::Double,
                      std::vector<double>* grad_alpha_out = nullptr);

}  // namespace homoflow
