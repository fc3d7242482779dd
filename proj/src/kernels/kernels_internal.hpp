#pragma once

#include <cmath>

namespace homoflow::kernels::detail {

// Ogita-Rump-Oishi Dot2: TwoProduct through fma, TwoSum on the running sum.
struct Dot2 {
  double sum = 0.0;
  double comp = 0.0;

  void add_product(double a, double b) {
    const double p = a * b;
    const double p_err = std::fma(a, b, -p);
    add_with_error(p, p_err);
  }

  void add_with_error(double x, double x_err) {
    const double s = sum + x;
    const double bp = s - sum;
    const double s_err = (sum - (s - bp)) + (x - bp);
    sum = s;
    comp += s_err + x_err;
  }

  double value() const { return sum + comp; }
};

}  // namespace homoflow::kernels::detail
