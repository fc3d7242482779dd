#include "homoflow/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "homoflow/error.hpp"

namespace homoflow {
namespace {

// Below this, ln(expm1(v)/v) and friends switch to their first series term.
constexpr double kSeriesCutoff = 1e-12;

// Neumaier-compensated running sum.
template <typename T>
struct CompensatedSum {
  T sum = 0;
  T comp = 0;
  void add(T x) {
    const T t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  T value() const { return sum + comp; }
};

template <typename T>
T log_sum_exp(std::span<const double> logs) {
  T top = -std::numeric_limits<T>::infinity();
  for (double v : logs) top = std::max<T>(top, v);
  if (!std::isfinite(static_cast<double>(top))) return top;
  CompensatedSum<T> acc;
  for (double v : logs) acc.add(std::exp(static_cast<T>(v) - top));
  return top + std::log(acc.value());
}

// ln(-expm1(-v)) = ln(1 - e^{-v}) for v > 0.
double log_one_minus_exp_neg(double v, double log_v) {
  if (v < kSeriesCutoff) return log_v - 0.5 * v;
  return std::log(-std::expm1(-v));
}

// ln(expm1(v)) for v > 0.
double log_expm1(double v, double log_v) {
  if (v < kSeriesCutoff) return log_v + 0.5 * v;
  if (v > 1.0) return v + std::log1p(-std::exp(-v));
  return std::log(std::expm1(v));
}

// ln sigmoid(-p) = ln(-ell_log'(p)).
double log_sigmoid_neg(double p) {
  if (p > 0.0) return -p - std::log1p(std::exp(-p));
  return -std::log1p(std::exp(p));
}

std::vector<double> log_ells(LossKind kind, std::span<const double> margins) {
  std::vector<double> logs(margins.size());
  for (std::size_t i = 0; i < margins.size(); ++i) logs[i] = log_ell(kind, margins[i]);
  return logs;
}

}  // namespace

double ell(LossKind kind, double z) {
  if (kind == LossKind::Exp) return std::exp(-z);
  if (z >= 0.0) return std::log1p(std::exp(-z));
  return -z + std::log1p(std::exp(z));
}

double ell_prime(LossKind kind, double z) {
  if (kind == LossKind::Exp) return -std::exp(-z);
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return -e / (1.0 + e);
  }
  return -1.0 / (1.0 + std::exp(z));
}

double ell_inverse(LossKind kind, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw DomainError("ell_inverse needs a finite positive argument");
  }
  if (kind == LossKind::Exp) return -std::log(v);
  return -log_expm1(v, std::log(v));
}

double log_ell(LossKind kind, double z) {
  if (kind == LossKind::Exp) return -z;
  if (z > 0.0) {
    const double u = std::exp(-z);
    if (u < kSeriesCutoff) return -z - 0.5 * u;
    return -z + std::log(std::log1p(u) / u);
  }
  return std::log(-z + std::log1p(std::exp(z)));
}

double log_total_loss(LossKind kind, std::span<const double> margins,
                      Precision precision) {
  if (margins.empty()) throw DomainError("loss over an empty dataset");
  std::vector<double> logs;
  if (kind == LossKind::Exp) {
    logs.resize(margins.size());
    for (std::size_t i = 0; i < margins.size(); ++i) logs[i] = -margins[i];
  } else {
    logs = log_ells(kind, margins);
  }
  if (precision == Precision::Extended) {
    return static_cast<double>(log_sum_exp<long double>(logs));
  }
  return log_sum_exp<double>(logs);
}

double alpha_from_log_loss(LossKind kind, double log_loss) {
  if (kind == LossKind::Exp) return -log_loss;
  const double v = std::exp(log_loss);
  if (!std::isfinite(v)) throw DomainError("loss too large to invert");
  return -log_expm1(v, log_loss);
}

double log_neg_ell_prime_at_alpha(LossKind kind, double log_loss) {
  if (kind == LossKind::Exp) return log_loss;
  return log_one_minus_exp_neg(std::exp(log_loss), log_loss);
}

double smoothed_margin(LossKind kind, std::span<const double> margins,
                       Precision precision) {
  if (margins.size() == 1) return margins[0];
  return alpha_from_log_loss(kind, log_total_loss(kind, margins, precision));
}

std::vector<double> dual_weights(LossKind kind, std::span<const double> margins,
                                 Precision precision) {
  const std::size_t n = margins.size();
  if (n == 0) throw DomainError("dual weights over an empty dataset");
  std::vector<double> q(n);
  if (n == 1) {
    q[0] = 1.0;
    return q;
  }
  if (kind == LossKind::Exp) {
    double top = -std::numeric_limits<double>::infinity();
    for (double p : margins) top = std::max(top, -p);
    if (precision == Precision::Extended) {
      CompensatedSum<long double> acc;
      std::vector<long double> e(n);
      for (std::size_t i = 0; i < n; ++i) {
        e[i] = std::exp(static_cast<long double>(-margins[i]) - top);
        acc.add(e[i]);
      }
      const long double z = acc.value();
      for (std::size_t i = 0; i < n; ++i) q[i] = static_cast<double>(e[i] / z);
    } else {
      CompensatedSum<double> acc;
      for (std::size_t i = 0; i < n; ++i) {
        q[i] = std::exp(-margins[i] - top);
        acc.add(q[i]);
      }
      const double z = acc.value();
      for (double& v : q) v /= z;
    }
    return q;
  }
  const double log_denominator =
      log_neg_ell_prime_at_alpha(kind, log_total_loss(kind, margins, precision));
  for (std::size_t i = 0; i < n; ++i) {
    q[i] = std::exp(log_sigmoid_neg(margins[i]) - log_denominator);
  }
  return q;
}

double beta(LossKind kind, std::span<const double> margins, Precision precision) {
  const std::vector<double> q = dual_weights(kind, margins, precision);
  CompensatedSum<long double> acc;
  for (std::size_t i = 0; i < q.size(); ++i) {
    acc.add(static_cast<long double>(q[i]) * margins[i]);
  }
  return static_cast<double>(acc.value());
}

double sigma(LossKind kind, double z) {
  const double upper = ell(kind, 0.0);
  // The closed-form expressions extend continuously to z = ell(0).
  if (!(z > 0.0) || z > upper) {
    throw DomainError("sigma is defined on (0, ell(0)]");
  }
  if (kind == LossKind::Exp) return z * std::log(z);
  return -std::expm1(-z) * std::log(std::expm1(z));
}

double pi(LossKind kind, std::span<const double> v) {
  return smoothed_margin(kind, v);
}

MarginSnapshot snapshot(LossKind kind, std::vector<double> margins, double norm_w,
                        double degree, Precision precision) {
  if (!(norm_w > 0.0)) throw ZeroNorm("snapshot needs |W| > 0");
  MarginSnapshot s;
  s.log_loss = log_total_loss(kind, margins, precision);
  s.loss_total = std::exp(s.log_loss);
  s.alpha = margins.size() == 1 ? margins[0] : alpha_from_log_loss(kind, s.log_loss);
  s.alpha_norm = s.alpha / std::pow(norm_w, degree);
  s.duals = dual_weights(kind, margins, precision);
  CompensatedSum<long double> acc;
  for (std::size_t i = 0; i < margins.size(); ++i) {
    acc.add(static_cast<long double>(s.duals[i]) * margins[i]);
  }
  s.beta = static_cast<double>(acc.value());
  s.margins = std::move(margins);
  return s;
}

}  // namespace homoflow
