#pragma once

// Exponential and logistic losses, evaluated so that total losses near
// 1e-30 and below keep full relative precision. Totals are carried as
// ln L(W) wherever they can underflow.

#include <span>
#include <vector>

namespace homoflow {

enum class LossKind { Exp, Logistic };

/// Extended switches the loss and smoothed-margin accumulators to long double.
enum class Precision { Double, Extended };

double ell(LossKind kind, double z);
double ell_prime(LossKind kind, double z);
/// Inverse of ell on its range; throws DomainError for v <= 0 or non-finite v.
double ell_inverse(LossKind kind, double v);

/// ln ell(z) without underflow for large z.
double log_ell(LossKind kind, double z);

/// ln sum_i ell(p_i).
double log_total_loss(LossKind kind, std::span<const double> margins,
                      Precision precision = Precision::Double);

/// alpha = ell^{-1}(L) given ln L.
double alpha_from_log_loss(LossKind kind, double log_loss);

/// ln(-ell'(alpha)) given ln L, where alpha = ell^{-1}(L).
double log_neg_ell_prime_at_alpha(LossKind kind, double log_loss);

/// Smoothed margin alpha = ell^{-1}(sum_i ell(p_i)).
double smoothed_margin(LossKind kind, std::span<const double> margins,
                       Precision precision = Precision::Double);

/// q_i = ell'(p_i) / ell'(alpha). Softmax of -p for the exponential loss.
std::vector<double> dual_weights(LossKind kind, std::span<const double> margins,
                                 Precision precision = Precision::Double);

/// beta = sum_i q_i p_i.
double beta(LossKind kind, std::span<const double> margins,
            Precision precision = Precision::Double);

/// sigma(z) = ell'(ell^{-1}(z)) ell^{-1}(z) on (0, ell(0)); DomainError outside.
double sigma(LossKind kind, double z);
/// pi(v) = ell^{-1}(sum_i ell(v_i)); same value as smoothed_margin.
double pi(LossKind kind, std::span<const double> v);

struct MarginSnapshot {
  std::vector<double> margins;
  double loss_total = 0.0;  // L(W); may underflow to 0 for huge margins
  double log_loss = 0.0;    // ln L(W)
  double alpha = 0.0;
  double alpha_norm = 0.0;  // alpha / |W|^L
  double beta = 0.0;
  std::vector<double> duals;
};

MarginSnapshot snapshot(LossKind kind, std::vector<double> margins, double norm_w,
                        double degree, Precision precision = Precision::Double);

}  // namespace homoflow
