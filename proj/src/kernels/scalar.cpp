#include "homoflow/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "kernels_internal.hpp"

namespace homoflow::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  detail::Dot2 acc;
  for (std::size_t i = 0; i < n; ++i) acc.add_product(a[i], b[i]);
  return acc.value();
}

double sum_squares_scalar(const double* a, std::size_t n) {
  return dot_scalar(a, a, n);
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void gemv_scalar(const double* a, std::size_t rows, std::size_t cols,
                 const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = dot_scalar(a + r * cols, x, cols);
  }
}

void gemv_t_scalar(const double* a, std::size_t rows, std::size_t cols,
                   const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double xr = x[r];
    const double* row = a + r * cols;
    for (std::size_t c = 0; c < cols; ++c) y[c] = std::fma(row[c], xr, y[c]);
  }
}

void ger_scalar(double alpha, const double* u, std::size_t rows,
                const double* v, std::size_t cols, double* a) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double ur = alpha * u[r];
    double* row = a + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] = std::fma(ur, v[c], row[c]);
  }
}

double signed_square_sum_scalar(const double* z, const double* sign,
                                std::size_t n) {
  detail::Dot2 acc;
  for (std::size_t j = 0; j < n; ++j) {
    const double r = std::max(z[j], 0.0);
    acc.add_product(sign[j] * r, r);
  }
  return acc.value();
}

void signed_square_grad_scalar(const double* z, const double* sign,
                               double scale, double* out, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = (2.0 * scale) * (sign[j] * std::max(z[j], 0.0));
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{
      "scalar",          dot_scalar,     sum_squares_scalar,
      axpy_scalar,       gemv_scalar,    gemv_t_scalar,
      ger_scalar,        signed_square_sum_scalar,
      signed_square_grad_scalar,
  };
  return table;
}

}  // namespace homoflow::kernels
