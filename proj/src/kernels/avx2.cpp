// Compiled with -mavx2 -mfma. Nothing in this file may run before
// avx2_table() has confirmed CPU support.

#include "homoflow/kernels.hpp"

#if defined(__x86_64__) && defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "kernels_internal.hpp"

namespace homoflow::kernels {
namespace {

// Lane-wise Dot2 state: four independent compensated accumulators.
struct Dot2x4 {
  __m256d sum = _mm256_setzero_pd();
  __m256d comp = _mm256_setzero_pd();

  void add_product(__m256d a, __m256d b) {
    const __m256d p = _mm256_mul_pd(a, b);
    const __m256d p_err = _mm256_fmsub_pd(a, b, p);
    const __m256d s = _mm256_add_pd(sum, p);
    const __m256d bp = _mm256_sub_pd(s, sum);
    const __m256d s_err = _mm256_add_pd(_mm256_sub_pd(sum, _mm256_sub_pd(s, bp)),
                                        _mm256_sub_pd(p, bp));
    sum = s;
    comp = _mm256_add_pd(comp, _mm256_add_pd(s_err, p_err));
  }

  detail::Dot2 reduce() const {
    alignas(32) double s[4];
    alignas(32) double c[4];
    _mm256_store_pd(s, sum);
    _mm256_store_pd(c, comp);
    detail::Dot2 acc{s[0], c[0]};
    for (int k = 1; k < 4; ++k) acc.add_with_error(s[k], c[k]);
    return acc;
  }
};

double dot_avx2(const double* a, const double* b, std::size_t n) {
  Dot2x4 lanes;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    lanes.add_product(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
  }
  detail::Dot2 acc = lanes.reduce();
  for (; i < n; ++i) acc.add_product(a[i], b[i]);
  return acc.value();
}

double sum_squares_avx2(const double* a, std::size_t n) {
  return dot_avx2(a, a, n);
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

double row_dot(const double* row, const double* x, std::size_t cols) {
  detail::Dot2 acc;
  for (std::size_t k = 0; k < cols; ++k) acc.add_product(row[k], x[k]);
  return acc.value();
}

// Four rows per pass, one lane per row, so each lane replays the scalar
// per-row recurrence exactly.
void gemv_avx2(const double* a, std::size_t rows, std::size_t cols,
               const double* x, double* y) {
  std::size_t r = 0;
  for (; r + 4 <= rows; r += 4) {
    const double* r0 = a + r * cols;
    const double* r1 = r0 + cols;
    const double* r2 = r1 + cols;
    const double* r3 = r2 + cols;
    Dot2x4 lanes;
    for (std::size_t k = 0; k < cols; ++k) {
      lanes.add_product(_mm256_setr_pd(r0[k], r1[k], r2[k], r3[k]),
                        _mm256_set1_pd(x[k]));
    }
    const __m256d v = _mm256_add_pd(lanes.sum, lanes.comp);
    _mm256_storeu_pd(y + r, v);
  }
  for (; r < rows; ++r) y[r] = row_dot(a + r * cols, x, cols);
}

void gemv_t_avx2(const double* a, std::size_t rows, std::size_t cols,
                 const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = a + r * cols;
    const __m256d vx = _mm256_set1_pd(x[r]);
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      _mm256_storeu_pd(y + c, _mm256_fmadd_pd(_mm256_loadu_pd(row + c), vx,
                                              _mm256_loadu_pd(y + c)));
    }
    for (; c < cols; ++c) y[c] = std::fma(row[c], x[r], y[c]);
  }
}

void ger_avx2(double alpha, const double* u, std::size_t rows, const double* v,
              std::size_t cols, double* a) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double ur = alpha * u[r];
    const __m256d vu = _mm256_set1_pd(ur);
    double* row = a + r * cols;
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      _mm256_storeu_pd(row + c, _mm256_fmadd_pd(vu, _mm256_loadu_pd(v + c),
                                                _mm256_loadu_pd(row + c)));
    }
    for (; c < cols; ++c) row[c] = std::fma(ur, v[c], row[c]);
  }
}

double signed_square_sum_avx2(const double* z, const double* sign,
                              std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  Dot2x4 lanes;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d r = _mm256_max_pd(_mm256_loadu_pd(z + j), zero);
    lanes.add_product(_mm256_mul_pd(_mm256_loadu_pd(sign + j), r), r);
  }
  detail::Dot2 acc = lanes.reduce();
  for (; j < n; ++j) {
    const double r = std::max(z[j], 0.0);
    acc.add_product(sign[j] * r, r);
  }
  return acc.value();
}

void signed_square_grad_avx2(const double* z, const double* sign, double scale,
                             double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d s2 = _mm256_set1_pd(2.0 * scale);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d r = _mm256_max_pd(_mm256_loadu_pd(z + j), zero);
    _mm256_storeu_pd(out + j,
                     _mm256_mul_pd(s2, _mm256_mul_pd(_mm256_loadu_pd(sign + j), r)));
  }
  for (; j < n; ++j) out[j] = (2.0 * scale) * (sign[j] * std::max(z[j], 0.0));
}

}  // namespace

const KernelTable* avx2_table() {
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  static const KernelTable table{
      "avx2",     dot_avx2,  sum_squares_avx2,       axpy_avx2,
      gemv_avx2,  gemv_t_avx2, ger_avx2, signed_square_sum_avx2,
      signed_square_grad_avx2,
  };
  return supported ? &table : nullptr;
}

}  // namespace homoflow::kernels

#else

namespace homoflow::kernels {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace homoflow::kernels

#endif
