#include "homoflow/models.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <utility>

#include "homoflow/error.hpp"
#include "homoflow/kernels.hpp"

namespace homoflow {
namespace {

constexpr double kKinkBand = 1e-12;

std::atomic<std::uint64_t> g_kink_events{0};

void note_kinks(std::span<const double> z) {
  std::uint64_t hits = 0;
  for (double v : z) hits += (std::abs(v) <= kKinkBand) ? 1 : 0;
  if (hits != 0) g_kink_events.fetch_add(hits, std::memory_order_relaxed);
}

bool is_layered(ModelKind k) {
  return k == ModelKind::DeepLinear || k == ModelKind::ReluMlp;
}

std::vector<double> alternating_signs(std::size_t m) {
  std::vector<double> s(m);
  for (std::size_t j = 0; j < m; ++j) s[j] = node_sign(j);
  return s;
}

void check_layer_dims(const std::vector<std::size_t>& dims) {
  if (dims.size() < 2) throw ShapeMismatch("need at least one weight layer");
  if (dims.back() != 1) throw ShapeMismatch("output layer must have width 1");
  for (std::size_t v : dims) {
    if (v == 0) throw ShapeMismatch("layer widths must be positive");
  }
}

// Scratch buffers for one layered forward/backward pass.
struct LayerTape {
  std::vector<std::vector<double>> inputs;   // input to layer j
  std::vector<std::vector<double>> pre;      // pre-activation of layer j
  std::vector<std::vector<std::size_t>> arg; // pooled winner indices
};

// Phi(x; W) for layered models; fills the tape for a later backward pass.
double layered_forward(const PredictorSpec& spec, std::span<const double> w,
                       std::span<const double> x, LayerTape& tape) {
  const kernels::KernelTable& k = kernels::active();
  const std::size_t layers = spec.layer_count();
  const bool relu = spec.kind() == ModelKind::ReluMlp;
  const std::size_t pool = spec.pool_window();
  tape.inputs.resize(layers);
  tape.pre.resize(layers);
  tape.arg.resize(layers);
  tape.inputs[0].assign(x.begin(), x.end());
  std::size_t offset = 0;
  for (std::size_t j = 0; j < layers; ++j) {
    const std::size_t rows = spec.layer_rows(j);
    const std::size_t cols = spec.layer_cols(j);
    std::vector<double>& z = tape.pre[j];
    z.assign(rows, 0.0);
    k.gemv(w.data() + offset, rows, cols, tape.inputs[j].data(), z.data());
    offset += rows * cols;
    if (j + 1 == layers) break;
    std::vector<double>& next = tape.inputs[j + 1];
    if (!relu) {
      next = z;
      continue;
    }
    note_kinks(z);
    const std::size_t pooled = rows / pool;
    next.assign(pooled, 0.0);
    tape.arg[j].assign(pooled, 0);
    for (std::size_t q = 0; q < pooled; ++q) {
      std::size_t best = q * pool;
      double best_val = std::max(z[best], 0.0);
      for (std::size_t r = best + 1; r < (q + 1) * pool; ++r) {
        const double v = std::max(z[r], 0.0);
        if (std::abs(v - best_val) <= kKinkBand && v > 0.0) {
          g_kink_events.fetch_add(1, std::memory_order_relaxed);
        }
        if (v > best_val) {
          best = r;
          best_val = v;
        }
      }
      tape.arg[j][q] = best;
      next[q] = best_val;
    }
  }
  return tape.pre[layers - 1][0];
}

// grad += coef * d Phi / d W, using a tape filled by layered_forward.
void layered_backward(const PredictorSpec& spec, std::span<const double> w,
                      const LayerTape& tape, double coef, std::span<double> grad) {
  const kernels::KernelTable& k = kernels::active();
  const std::size_t layers = spec.layer_count();
  const bool relu = spec.kind() == ModelKind::ReluMlp;
  std::vector<std::size_t> offsets(layers, 0);
  for (std::size_t j = 1; j < layers; ++j) {
    offsets[j] = offsets[j - 1] + spec.layer_rows(j - 1) * spec.layer_cols(j - 1);
  }
  std::vector<double> dz{coef};
  std::vector<double> d_in;
  for (std::size_t j = layers; j-- > 0;) {
    const std::size_t rows = spec.layer_rows(j);
    const std::size_t cols = spec.layer_cols(j);
    k.ger(1.0, dz.data(), rows, tape.inputs[j].data(), cols,
          grad.data() + offsets[j]);
    if (j == 0) break;
    d_in.assign(cols, 0.0);
    k.gemv_t(w.data() + offsets[j], rows, cols, dz.data(), d_in.data());
    const std::vector<double>& z_prev = tape.pre[j - 1];
    dz.assign(z_prev.size(), 0.0);
    if (!relu) {
      dz = d_in;
      continue;
    }
    for (std::size_t q = 0; q < d_in.size(); ++q) {
      const std::size_t src = tape.arg[j - 1][q];
      if (z_prev[src] > 0.0) dz[src] += d_in[q];
    }
  }
}

}  // namespace

double node_sign(std::size_t node) { return (node % 2 == 0) ? -1.0 : 1.0; }

PredictorSpec PredictorSpec::squared_relu(std::size_t input_dim, std::size_t width) {
  if (input_dim == 0 || width == 0) throw ShapeMismatch("squared_relu needs d, m > 0");
  PredictorSpec s;
  s.kind_ = ModelKind::SquaredRelu;
  s.dims_ = {input_dim};
  s.width_ = width;
  s.signs_ = alternating_signs(width);
  return s;
}

PredictorSpec PredictorSpec::deep_linear(std::vector<std::size_t> dims) {
  check_layer_dims(dims);
  PredictorSpec s;
  s.kind_ = ModelKind::DeepLinear;
  s.dims_ = std::move(dims);
  return s;
}

PredictorSpec PredictorSpec::relu_mlp(std::vector<std::size_t> dims,
                                      std::size_t pool_window) {
  check_layer_dims(dims);
  if (pool_window == 0) throw ShapeMismatch("pool window must be positive");
  for (std::size_t j = 1; j + 1 < dims.size(); ++j) {
    if (dims[j] % pool_window != 0) {
      throw ShapeMismatch("hidden width " + std::to_string(dims[j]) +
                          " not divisible by pool window " +
                          std::to_string(pool_window));
    }
  }
  PredictorSpec s;
  s.kind_ = ModelKind::ReluMlp;
  s.dims_ = std::move(dims);
  s.pool_ = pool_window;
  return s;
}

PredictorSpec PredictorSpec::ntk_frozen(std::size_t input_dim,
                                        std::vector<double> base_weights) {
  if (input_dim == 0 || base_weights.empty() || base_weights.size() % input_dim != 0) {
    throw ShapeMismatch("ntk_frozen base weights must be a nonempty m x d array");
  }
  for (double v : base_weights) {
    if (!std::isfinite(v)) throw NonFinite("ntk_frozen base weights");
  }
  PredictorSpec s;
  s.kind_ = ModelKind::NtkFrozen;
  s.dims_ = {input_dim};
  s.width_ = base_weights.size() / input_dim;
  s.signs_ = alternating_signs(s.width_);
  s.frozen_ = std::move(base_weights);
  return s;
}

double PredictorSpec::degree() const {
  switch (kind_) {
    case ModelKind::SquaredRelu: return 2.0;
    case ModelKind::NtkFrozen: return 1.0;
    case ModelKind::DeepLinear:
    case ModelKind::ReluMlp: return static_cast<double>(layer_count());
  }
  return 0.0;
}

std::size_t PredictorSpec::layer_count() const {
  return is_layered(kind_) ? dims_.size() - 1 : 1;
}

std::size_t PredictorSpec::layer_rows(std::size_t j) const {
  if (!is_layered(kind_)) return width_;
  return dims_.at(j + 1);
}

std::size_t PredictorSpec::layer_cols(std::size_t j) const {
  if (!is_layered(kind_) || j == 0) return dims_.front();
  return kind_ == ModelKind::ReluMlp ? dims_.at(j) / pool_ : dims_.at(j);
}

std::size_t PredictorSpec::param_count() const {
  std::size_t total = 0;
  for (std::size_t j = 0; j < layer_count(); ++j) total += layer_rows(j) * layer_cols(j);
  return total;
}

std::vector<Segment> PredictorSpec::partition() const {
  std::vector<Segment> out;
  if (is_layered(kind_)) {
    std::size_t offset = 0;
    for (std::size_t j = 0; j < layer_count(); ++j) {
      const std::size_t len = layer_rows(j) * layer_cols(j);
      out.push_back({"layer" + std::to_string(j + 1), offset, len});
      offset += len;
    }
  } else {
    const std::size_t d = input_dim();
    for (std::size_t j = 0; j < width_; ++j) {
      out.push_back({"node" + std::to_string(j + 1), j * d, d});
    }
  }
  return out;
}

ParamVec PredictorSpec::make_params(std::vector<double> values) const {
  if (values.size() != param_count()) {
    throw ShapeMismatch("expected " + std::to_string(param_count()) +
                        " parameters, got " + std::to_string(values.size()));
  }
  return ParamVec(std::move(values), partition());
}

ParamVec PredictorSpec::random_params(std::uint64_t seed, double scale) const {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(param_count());
  for (double& x : v) x = normal(rng);
  return make_params(std::move(v));
}

void check_shape(const PredictorSpec& spec, const ParamVec& w,
                 std::span<const double> x) {
  if (w.size() != spec.param_count()) {
    throw ShapeMismatch("parameter length " + std::to_string(w.size()) +
                        " does not match the model (" +
                        std::to_string(spec.param_count()) + ")");
  }
  if (x.size() != spec.input_dim()) {
    throw ShapeMismatch("input dimension " + std::to_string(x.size()) +
                        " does not match the model (" +
                        std::to_string(spec.input_dim()) + ")");
  }
}

namespace {

// Forward pass; when grad is nonempty also accumulates coef * dPhi/dW.
double evaluate(const PredictorSpec& spec, const ParamVec& w,
                std::span<const double> x, double coef, std::span<double> grad,
                std::vector<double>& z, std::vector<double>& r, LayerTape& tape) {
  const kernels::KernelTable& k = kernels::active();
  const std::span<const double> wv = w.values();
  switch (spec.kind()) {
    case ModelKind::SquaredRelu: {
      const std::size_t m = spec.width();
      const std::size_t d = spec.input_dim();
      z.resize(m);
      k.gemv(wv.data(), m, d, x.data(), z.data());
      note_kinks(z);
      const double phi = k.signed_square_sum(z.data(), spec.node_signs().data(), m);
      if (!grad.empty()) {
        r.resize(m);
        k.signed_square_grad(z.data(), spec.node_signs().data(), coef, r.data(), m);
        k.ger(1.0, r.data(), m, x.data(), d, grad.data());
      }
      return phi;
    }
    case ModelKind::NtkFrozen: {
      const std::size_t m = spec.width();
      const std::size_t d = spec.input_dim();
      z.resize(m);
      k.gemv(spec.frozen_weights().data(), m, d, x.data(), z.data());
      note_kinks(z);
      r.resize(m);
      const std::span<const double> signs = spec.node_signs();
      for (std::size_t j = 0; j < m; ++j) r[j] = signs[j] * std::max(z[j], 0.0);
      std::vector<double> u(m);
      k.gemv(wv.data(), m, d, x.data(), u.data());
      const double phi = k.dot(r.data(), u.data(), m);
      if (!grad.empty()) k.ger(coef, r.data(), m, x.data(), d, grad.data());
      return phi;
    }
    case ModelKind::DeepLinear:
    case ModelKind::ReluMlp: {
      const double phi = layered_forward(spec, wv, x, tape);
      if (!grad.empty()) layered_backward(spec, wv, tape, coef, grad);
      return phi;
    }
  }
  return 0.0;
}

}  // namespace

double forward(const PredictorSpec& spec, const ParamVec& w,
               std::span<const double> x) {
  check_shape(spec, w, x);
  std::vector<double> z, r;
  LayerTape tape;
  return evaluate(spec, w, x, 0.0, {}, z, r, tape);
}

double margin(const PredictorSpec& spec, const ParamVec& w, const Example& ex) {
  return static_cast<double>(ex.y) * forward(spec, w, ex.x);
}

std::vector<double> grad_margin(const PredictorSpec& spec, const ParamVec& w,
                                const Example& ex) {
  check_shape(spec, w, ex.x);
  std::vector<double> grad(w.size(), 0.0);
  std::vector<double> z, r;
  LayerTape tape;
  evaluate(spec, w, ex.x, static_cast<double>(ex.y), grad, z, r, tape);
  return grad;
}

double degree(const PredictorSpec& spec) { return spec.degree(); }

double node_features(const Example& ex, std::span<const double> theta,
                     std::size_t node) {
  if (theta.size() != ex.x.size()) {
    throw ShapeMismatch("node direction and example differ in dimension");
  }
  const double z = std::max(kernels::dot(theta, ex.x), 0.0);
  return static_cast<double>(ex.y) * node_sign(node) * z * z;
}

std::vector<double> margins(const PredictorSpec& spec, const ParamVec& w,
                            const Dataset& data) {
  std::vector<double> out;
  out.reserve(data.size());
  std::vector<double> z, r;
  LayerTape tape;
  for (const Example& ex : data.examples) {
    check_shape(spec, w, ex.x);
    out.push_back(static_cast<double>(ex.y) *
                  evaluate(spec, w, ex.x, 0.0, {}, z, r, tape));
  }
  return out;
}

std::vector<double> weighted_margin_grad(const PredictorSpec& spec,
                                         const ParamVec& w, const Dataset& data,
                                         std::span<const double> coef) {
  if (coef.size() != data.size()) {
    throw ShapeMismatch("one coefficient per example required");
  }
  std::vector<double> grad(w.size(), 0.0);
  std::vector<double> z, r;
  LayerTape tape;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Example& ex = data.examples[i];
    check_shape(spec, w, ex.x);
    if (coef[i] == 0.0) continue;
    evaluate(spec, w, ex.x, coef[i] * static_cast<double>(ex.y), grad, z, r, tape);
  }
  return grad;
}

std::uint64_t kink_events() { return g_kink_events.load(std::memory_order_relaxed); }

void reset_kink_events() { g_kink_events.store(0, std::memory_order_relaxed); }

}  // namespace homoflow
