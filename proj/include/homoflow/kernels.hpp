#pragma once

// Data-parallel inner loops used by the parameter and model code.
//
// Every kernel has a scalar reference implementation. On x86-64 an AVX2+FMA
// variant is compiled separately and selected at runtime when the CPU reports
// support. Setting HOMOFLOW_KERNELS=scalar forces the reference path.
//
// Summations that reduce a whole vector (dot, sum_squares, signed_square_sum)
// use the compensated Dot2 scheme (TwoProduct via fma + TwoSum), so results
// are accurate to about one ulp of the condition-weighted sum. The row-wise
// kernels (gemv) run the same Dot2 recurrence per row in both variants and
// are therefore bit-identical across variants; gemv_t and ger use a plain
// fma chain in row order, also bit-identical.

#include <cstddef>
#include <span>
#include <string_view>

namespace homoflow::kernels {

struct KernelTable {
  std::string_view name;

  /// Compensated inner product of two length-n arrays.
  double (*dot)(const double* a, const double* b, std::size_t n);
  /// Compensated sum of squares.
  double (*sum_squares)(const double* a, std::size_t n);
  /// y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// y = A x for row-major A (rows x cols); one compensated dot per row.
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols,
               const double* x, double* y);
  /// y += A^T x for row-major A (rows x cols).
  void (*gemv_t)(const double* a, std::size_t rows, std::size_t cols,
                 const double* x, double* y);
  /// A += alpha * u v^T for row-major A (rows x cols).
  void (*ger)(double alpha, const double* u, std::size_t rows, const double* v,
              std::size_t cols, double* a);
  /// sum_j sign[j] * max(0, z[j])^2, compensated.
  double (*signed_square_sum)(const double* z, const double* sign,
                              std::size_t n);
  /// out[j] = scale * 2 * sign[j] * max(0, z[j])
  void (*signed_square_grad)(const double* z, const double* sign, double scale,
                             double* out, std::size_t n);
};

const KernelTable& scalar_table();

/// AVX2+FMA table, or nullptr when not compiled in or not supported by the CPU.
const KernelTable* avx2_table();

/// Table used by the library: the widest supported variant unless overridden.
const KernelTable& active();

// Convenience wrappers over active().

double dot(std::span<const double> a, std::span<const double> b);
double sum_squares(std::span<const double> a);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

}  // namespace homoflow::kernels
