#include <cstdlib>
#include <string_view>

#include "homoflow/error.hpp"
#include "homoflow/kernels.hpp"

namespace homoflow::kernels {
namespace {

const KernelTable& select() {
  const char* env = std::getenv("HOMOFLOW_KERNELS");
  if (env != nullptr && std::string_view(env) == "scalar") return scalar_table();
  if (const KernelTable* t = avx2_table()) return *t;
  return scalar_table();
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = select();
  return table;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeMismatch("dot of lengths " + std::to_string(a.size()) + " and " +
                        std::to_string(b.size()));
  }
  return active().dot(a.data(), b.data(), a.size());
}

double sum_squares(std::span<const double> a) {
  return active().sum_squares(a.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) {
    throw ShapeMismatch("axpy of lengths " + std::to_string(x.size()) + " and " +
                        std::to_string(y.size()));
  }
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace homoflow::kernels
