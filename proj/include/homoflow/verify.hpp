#pragma once

// Independent oracles for the margin-maximization limits, and the end-to-end
// checks that compare trained runs against them. Nothing here uses gradient
// descent on the training objective, so the oracles cannot inherit its bias.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "homoflow/dataset.hpp"
#include "homoflow/flow.hpp"
#include "homoflow/losses.hpp"
#include "homoflow/models.hpp"

namespace homoflow {

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values);

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  Matrix transposed() const;
};

struct MaxMarginResult {
  std::vector<double> direction;  // unit vector u
  double margin = 0.0;            // min_i y_i <x_i, u>
  double certificate_gap = 0.0;   // margin <= optimum <= margin + gap
  std::size_t iterations = 0;
};

/// Hard-margin direction through the origin: the min-norm point of
/// conv{y_i x_i}, found by Mitchell-Dem'yanov-Malozemov iterations until the
/// duality gap is at most tol. Throws NotSeparable when the hull reaches the
/// origin (min-norm point of norm <= tol) and NotConverged at the cap.
MaxMarginResult max_margin_linear(const Dataset& data, double tol = 1e-8,
                                  std::size_t max_iterations = 5'000'000);

/// sigma_2 / sigma_1 via power iteration with deflation. Throws ZeroMatrix.
double rank_one_residual(const Matrix& a);

struct SingularPair {
  double value = 0.0;
  std::vector<double> left;
  std::vector<double> right;
};

/// Leading singular triple by power iteration.
SingularPair top_singular(const Matrix& a);

struct GameResult {
  double value = 0.0;  // midpoint of [lower, upper]
  double lower = 0.0;  // min_i (M s)_i
  double upper = 0.0;  // max_j (q^T M)_j
  std::vector<double> row_strategy;  // q, minimizer over rows
  std::vector<double> col_strategy;  // s, maximizer over columns
  double gap = 0.0;                  // upper - lower
  std::size_t iterations = 0;
};

/// Value of min_q max_s q^T M s by optimistic multiplicative weights with
/// averaged strategies, stopped once the certified gap is <= tol. Throws
/// NotConverged after max_iterations.
GameResult game_value(const Matrix& m, double tol = 1e-6,
                      std::size_t max_iterations = 20'000'000);

/// min_i max_j phi_ij.
double local_guarantee_value(const Matrix& phi);

struct GlobalMarginResult {
  double value = 0.0;       // grid game value estimate
  double lower = 0.0;       // certified lower bound of the grid game
  double upper = 0.0;       // certified upper bound of the grid game
  double grid_slack = 0.0;  // 2 * (2 pi / N)
  std::vector<double> duals;
  std::size_t atoms_used = 0;
};

/// Planar signed-measure margin max_nu min_i y_i int max(0, <x_i, theta>)^2 dnu
/// with |nu| <= 1, restricted to N grid directions of both signs plus the empty
/// measure. Solved by growing the atom set with exact best responses and
/// solving each restricted game with game_value. Throws UnsupportedDimension
/// unless d = 2, DomainError if some |x_i| > 1.
GlobalMarginResult global_margin_2d(const Dataset& data, std::size_t grid_size = 4096,
                                    double tol = 1e-4);

struct Check {
  std::string name;
  double value = 0.0;
  std::optional<double> tolerance;  // empty for informational entries
  bool pass = true;
};

struct VerifyReport {
  std::vector<Check> checks;

  /// value <= tolerance passes.
  void add_upper(std::string name, double value, double tolerance);
  void add_info(std::string name, double value);
  bool all_pass() const;
  const Check* find(const std::string& name) const;
};

struct DeepLinearTolerances {
  double rank = 1e-2;
  double angle = 1e-2;
  double oracle = 1e-8;
};

/// Rank-one layer limits and product direction versus the hard-margin oracle.
VerifyReport verify_deep_linear(const PredictorSpec& spec, const ParamVec& w,
                                const Dataset& data, const DeepLinearTolerances& tol = {});
VerifyReport verify_deep_linear(const PredictorSpec& spec, const Trajectory& trajectory,
                                const Dataset& data, const DeepLinearTolerances& tol = {});

struct TwoHomoTolerances {
  double local = 1e-2;           // local guarantee residual
  double share_sum = 1e-6;       // |sum s - 1|
  double support_share = 1e-2;   // s_j above this counts as supported
  double vanish_share = 1e-4;    // s_j below this gets theta_j = 0
  double support_value = 1e-2;   // relative tolerance on sum_i q_i phi_ij vs a
  double dual_sum = 1e-3;        // |sum q - 1|
  double dual_off_support = 1e-2;
  double off_support_band = 0.05;  // multiples of alpha_norm above the min
  double global = 1e-2;
  double game = 1e-4;            // solver tolerance for game and global values
  std::size_t cover_grid = 4096;
};

/// Checks on a trained squared-ReLU network: local guarantee, share simplex,
/// support attainment, dual optimality and (for d = 2) the covering-based
/// global bound. cover_dirs are the node directions at the covering time t0;
/// when absent the first trajectory record is used.
VerifyReport verify_two_homo(const PredictorSpec& spec, const ParamVec& w,
                             const Dataset& data, LossKind kind,
                             const std::vector<std::vector<double>>& cover_dirs,
                             const TwoHomoTolerances& tol = {});
VerifyReport verify_two_homo(const PredictorSpec& spec, const Trajectory& trajectory,
                             const Dataset& data, LossKind kind,
                             const TwoHomoTolerances& tol = {});

}  // namespace homoflow
