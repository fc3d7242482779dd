#pragma once

// Random architectures, an independent naive forward pass and central finite
// differences, shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "homoflow/models.hpp"
#include "homoflow/params.hpp"

namespace fixture {

inline homoflow::PredictorSpec random_spec(std::mt19937_64& rng, int draw) {
  using homoflow::PredictorSpec;
  std::uniform_int_distribution<std::size_t> small(1, 5);
  const std::size_t d = small(rng);
  switch (draw % 4) {
    case 0:
      return PredictorSpec::squared_relu(d, small(rng) + 1);
    case 1: {
      std::vector<std::size_t> dims{d};
      const std::size_t depth = small(rng) % 4;
      for (std::size_t j = 0; j < depth; ++j) dims.push_back(small(rng));
      dims.push_back(1);
      return PredictorSpec::deep_linear(dims);
    }
    case 2: {
      const std::size_t pool = 1 + small(rng) % 2;
      std::vector<std::size_t> dims{d};
      const std::size_t depth = 1 + small(rng) % 2;
      for (std::size_t j = 0; j < depth; ++j) dims.push_back(pool * small(rng));
      dims.push_back(1);
      return PredictorSpec::relu_mlp(dims, pool);
    }
    default: {
      const std::size_t m = small(rng) + 1;
      std::normal_distribution<double> g;
      std::vector<double> base(m * d);
      for (double& v : base) v = g(rng);
      return PredictorSpec::ntk_frozen(d, base);
    }
  }
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

// Plain-loop forward pass; `gap` receives the smallest distance of any
// pre-activation from its kink (and of any pooled maximum from a tie).
inline double naive_forward(const homoflow::PredictorSpec& spec, const homoflow::ParamVec& w,
                            const std::vector<double>& x, double* gap = nullptr) {
  using homoflow::ModelKind;
  double closest = std::numeric_limits<double>::infinity();
  const std::size_t d = spec.input_dim();
  double out = 0.0;
  if (spec.kind() == ModelKind::SquaredRelu || spec.kind() == ModelKind::NtkFrozen) {
    for (std::size_t j = 0; j < spec.width(); ++j) {
      double z = 0.0, u = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        if (spec.kind() == ModelKind::SquaredRelu) {
          z += w[j * d + k] * x[k];
        } else {
          z += spec.frozen_weights()[j * d + k] * x[k];
          u += w[j * d + k] * x[k];
        }
      }
      closest = std::min(closest, std::abs(z));
      const double sign = std::pow(-1.0, static_cast<double>(j + 1));
      const double r = std::max(0.0, z);
      out += spec.kind() == ModelKind::SquaredRelu ? sign * r * r : sign * u * r;
    }
  } else {
    const bool relu = spec.kind() == ModelKind::ReluMlp;
    std::vector<double> a = x;
    std::size_t offset = 0;
    for (std::size_t j = 0; j < spec.layer_count(); ++j) {
      const std::size_t rows = spec.layer_rows(j), cols = spec.layer_cols(j);
      std::vector<double> z(rows, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) z[r] += w[offset + r * cols + c] * a[c];
      }
      offset += rows * cols;
      if (j + 1 == spec.layer_count() || !relu) {
        a = z;
        continue;
      }
      const std::size_t pool = spec.pool_window();
      a.assign(rows / pool, 0.0);
      for (std::size_t q = 0; q < rows / pool; ++q) {
        std::vector<double> window;
        for (std::size_t r = q * pool; r < (q + 1) * pool; ++r) {
          closest = std::min(closest, std::abs(z[r]));
          window.push_back(std::max(0.0, z[r]));
        }
        std::sort(window.begin(), window.end());
        if (pool > 1 && window.back() > 0.0) {
          closest = std::min(closest, window[pool - 1] - window[pool - 2]);
        }
        a[q] = window.back();
      }
    }
    out = a[0];
  }
  if (gap) *gap = closest;
  return out;
}

inline std::vector<double> fd_gradient(const homoflow::PredictorSpec& spec,
                                       const homoflow::ParamVec& w,
                                       const std::vector<double>& x, double h) {
  std::vector<double> g(w.size());
  std::vector<double> v(w.values().begin(), w.values().end());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double keep = v[i];
    v[i] = keep + h;
    const double up = naive_forward(spec, w.with_values(v), x);
    v[i] = keep - h;
    const double dn = naive_forward(spec, w.with_values(v), x);
    v[i] = keep;
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

inline double rel_err_vec(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  if (den == 0.0) return std::sqrt(num);
  return std::sqrt(num / den);
}

inline double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace fixture
