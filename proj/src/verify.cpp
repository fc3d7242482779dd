#include "homoflow/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "homoflow/error.hpp"
#include "homoflow/kernels.hpp"
#include "homoflow/metrics.hpp"

namespace homoflow {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) throw ShapeMismatch("matrix data does not match its shape");
}

Matrix Matrix::transposed() const {
  Matrix t(cols, rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
  }
  return t;
}

MaxMarginResult max_margin_linear(const Dataset& data, double tol,
                                  std::size_t max_iterations) {
  data.validate();
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  if (n == 0) throw DegenerateData("max margin of an empty dataset");
  std::vector<std::vector<double>> z(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) z[i][k] = data.examples[i].y * data.examples[i].x[k];
  }

  std::vector<double> lambda(n, 0.0);
  std::size_t start = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (kernels::sum_squares(z[i]) < kernels::sum_squares(z[start])) start = i;
  }
  lambda[start] = 1.0;
  std::vector<double> w = z[start];
  std::vector<double> zw(n);

  auto rebuild = [&] {
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (lambda[i] > 0.0) kernels::axpy(lambda[i], z[i], w);
    }
  };

  MaxMarginResult out;
  for (std::size_t it = 0;; ++it) {
    if (it % 1024 == 1023) rebuild();
    for (std::size_t i = 0; i < n; ++i) zw[i] = kernels::dot(z[i], w);
    const double wn = norm(w);
    std::size_t lo = 0;
    std::size_t hi = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (zw[i] < zw[lo]) lo = i;
      if (lambda[i] > 0.0 && (hi == n || zw[i] > zw[hi])) hi = i;
    }
    if (wn <= tol) throw NotSeparable("origin lies in the convex hull of y_i x_i");
    const double gamma = zw[lo] / wn;
    // |w| bounds the optimum from above, gamma from below.
    if (wn - gamma <= tol) {
      out.direction = w;
      for (double& v : out.direction) v /= wn;
      out.margin = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        out.margin = std::min(out.margin, kernels::dot(z[i], out.direction));
      }
      out.certificate_gap = std::max(0.0, wn - out.margin);
      out.iterations = it;
      if (out.margin <= 0.0) throw NotSeparable("hard-margin direction has nonpositive margin");
      return out;
    }
    if (it >= max_iterations) {
      throw NotConverged("max margin gap " + std::to_string(wn - gamma) + " after " +
                         std::to_string(it) + " iterations");
    }
    // Shift mass from the worst active vertex to the best one.
    std::vector<double> dir(d);
    for (std::size_t k = 0; k < d; ++k) dir[k] = z[lo][k] - z[hi][k];
    const double dd = kernels::sum_squares(dir);
    if (dd == 0.0) {
      rebuild();
      continue;
    }
    const double t = std::clamp(-kernels::dot(w, dir) / dd, 0.0, lambda[hi]);
    lambda[lo] += t;
    lambda[hi] -= t;
    if (lambda[hi] < 1e-300) lambda[hi] = 0.0;
    kernels::axpy(t, dir, w);
  }
}

namespace {

std::vector<double> mat_vec(const Matrix& a, std::span<const double> v) {
  std::vector<double> out(a.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    out[i] = kernels::dot(std::span<const double>(a.data).subspan(i * a.cols, a.cols), v);
  }
  return out;
}

std::vector<double> mat_t_vec(const Matrix& a, std::span<const double> u) {
  std::vector<double> out(a.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    kernels::axpy(u[i], std::span<const double>(a.data).subspan(i * a.cols, a.cols), out);
  }
  return out;
}

double frobenius(const Matrix& a) { return norm(a.data); }

}  // namespace

SingularPair top_singular(const Matrix& a) {
  const double fro = frobenius(a);
  if (fro == 0.0) throw ZeroMatrix("singular vectors of a zero matrix");
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> gauss;
  std::vector<double> v(a.cols);
  for (double& x : v) x = gauss(rng);
  double nv = norm(v);
  for (double& x : v) x /= nv;

  for (int it = 0; it < 200000; ++it) {
    std::vector<double> next = mat_t_vec(a, mat_vec(a, v));
    const double lam = kernels::dot(v, next);
    double resid = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double r = next[k] - lam * v[k];
      resid += r * r;
    }
    const double nn = norm(next);
    if (nn == 0.0) break;
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = next[k] / nn;
    if (std::sqrt(resid) <= 1e-10 * std::max(lam, 1e-300)) break;
  }
  SingularPair out;
  std::vector<double> u = mat_vec(a, v);
  out.value = norm(u);
  if (out.value > 0.0) {
    for (double& x : u) x /= out.value;
  }
  out.left = std::move(u);
  out.right = std::move(v);
  return out;
}

double rank_one_residual(const Matrix& a) {
  const SingularPair first = top_singular(a);
  if (first.value == 0.0) throw ZeroMatrix("rank one residual of a numerically zero matrix");
  Matrix rest = a;
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) {
      rest(i, j) -= first.value * first.left[i] * first.right[j];
    }
  }
  if (frobenius(rest) <= 1e-15 * first.value) return 0.0;
  return top_singular(rest).value / first.value;
}

namespace {

void softmax_into(std::span<const double> logits, std::vector<double>& out) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = std::exp(logits[k] - top);
    total += out[k];
  }
  for (double& v : out) v /= total;
}

void normalize(std::vector<double>& v) {
  double total = 0.0;
  for (double x : v) total += x;
  for (double& x : v) x /= total;
}

// min_i (M s)_i and max_j (q^T M)_j.
double row_floor(const Matrix& m, std::span<const double> s) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m.rows; ++i) {
    best = std::min(best, kernels::dot(std::span<const double>(m.data).subspan(i * m.cols, m.cols), s));
  }
  return best;
}

double col_ceiling(const Matrix& m, std::span<const double> q) {
  const std::vector<double> g = mat_t_vec(m, q);
  return *std::max_element(g.begin(), g.end());
}

}  // namespace

GameResult game_value(const Matrix& m, double tol, std::size_t max_iterations) {
  if (m.rows == 0 || m.cols == 0) throw ShapeMismatch("game matrix must be nonempty");
  for (double v : m.data) {
    if (!std::isfinite(v)) throw NonFinite("game matrix entry is not finite");
  }
  const auto [lo_it, hi_it] = std::minmax_element(m.data.begin(), m.data.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  GameResult out;
  out.row_strategy.assign(m.rows, 1.0 / static_cast<double>(m.rows));
  out.col_strategy.assign(m.cols, 1.0 / static_cast<double>(m.cols));
  if (range == 0.0) {
    out.value = out.lower = out.upper = lo;
    return out;
  }

  Matrix p = m;
  for (double& v : p.data) v = (v - lo) / range;
  constexpr double kEta = 0.25;
  std::vector<double> cum_row(m.rows, 0.0), last_row(m.rows, 0.0);
  std::vector<double> cum_col(m.cols, 0.0), last_col(m.cols, 0.0);
  std::vector<double> q(m.rows), s(m.cols), logits_row(m.rows), logits_col(m.cols);
  std::vector<double> avg_q(m.rows, 0.0), avg_s(m.cols, 0.0);

  double best_upper = col_ceiling(m, out.row_strategy);
  double best_lower = row_floor(m, out.col_strategy);
  auto consider = [&](const std::vector<double>& qq, const std::vector<double>& ss) {
    std::vector<double> qn = qq, sn = ss;
    normalize(qn);
    normalize(sn);
    const double up = col_ceiling(m, qn);
    const double dn = row_floor(m, sn);
    if (up < best_upper) {
      best_upper = up;
      out.row_strategy = std::move(qn);
    }
    if (dn > best_lower) {
      best_lower = dn;
      out.col_strategy = std::move(sn);
    }
  };

  std::size_t it = 0;
  const std::size_t check_every = 64;
  while (best_upper - best_lower > tol) {
    if (it >= max_iterations) {
      throw NotConverged("game gap " + std::to_string(best_upper - best_lower) + " after " +
                         std::to_string(it) + " iterations");
    }
    for (std::size_t i = 0; i < m.rows; ++i) logits_row[i] = -kEta * (cum_row[i] + last_row[i]);
    for (std::size_t j = 0; j < m.cols; ++j) logits_col[j] = kEta * (cum_col[j] + last_col[j]);
    softmax_into(logits_row, q);
    softmax_into(logits_col, s);
    last_row = mat_vec(p, s);
    last_col = mat_t_vec(p, q);
    for (std::size_t i = 0; i < m.rows; ++i) {
      cum_row[i] += last_row[i];
      avg_q[i] += q[i];
    }
    for (std::size_t j = 0; j < m.cols; ++j) {
      cum_col[j] += last_col[j];
      avg_s[j] += s[j];
    }
    ++it;
    if (it % check_every == 0) {
      consider(avg_q, avg_s);
      consider(q, s);
    }
  }
  out.lower = best_lower;
  out.upper = best_upper;
  out.gap = best_upper - best_lower;
  out.value = 0.5 * (best_lower + best_upper);
  out.iterations = it;
  return out;
}

double local_guarantee_value(const Matrix& phi) {
  if (phi.rows == 0 || phi.cols == 0) throw ShapeMismatch("feature matrix must be nonempty");
  double out = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < phi.rows; ++i) {
    double row_max = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < phi.cols; ++j) row_max = std::max(row_max, phi(i, j));
    out = std::min(out, row_max);
  }
  return out;
}

GlobalMarginResult global_margin_2d(const Dataset& data, std::size_t grid_size, double tol) {
  data.validate();
  if (data.dim() != 2) {
    throw UnsupportedDimension("global margin is planar only, got d = " +
                               std::to_string(data.dim()));
  }
  if (grid_size < 8) throw DomainError("global margin needs at least 8 grid directions");
  const std::size_t n = data.size();
  for (const Example& ex : data.examples) {
    if (norm(ex.x) > 1.0 + 1e-12) throw DomainError("global margin needs |x_i| <= 1");
  }
  // Column k of feat holds y_i max(0, <x_i, theta_k>)^2.
  Matrix feat(n, grid_size);
  for (std::size_t k = 0; k < grid_size; ++k) {
    const double angle =
        2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(grid_size);
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (std::size_t i = 0; i < n; ++i) {
      const Example& ex = data.examples[i];
      const double z = std::max(0.0, ex.x[0] * c + ex.x[1] * s);
      feat(i, k) = ex.y * z * z;
    }
  }
  // Atom a: 0 is the empty measure, 2k+1 is +theta_k, 2k+2 is -theta_k.
  auto atom_column = [&](std::size_t a, std::size_t i) {
    if (a == 0) return 0.0;
    const std::size_t k = (a - 1) / 2;
    return (a % 2 == 1) ? feat(i, k) : -feat(i, k);
  };
  auto best_response = [&](std::span<const double> q, double& value) {
    const std::vector<double> g = mat_t_vec(feat, q);
    std::size_t best = 0;
    value = 0.0;
    for (std::size_t k = 0; k < grid_size; ++k) {
      if (g[k] > value) {
        value = g[k];
        best = 2 * k + 1;
      }
      if (-g[k] > value) {
        value = -g[k];
        best = 2 * k + 2;
      }
    }
    return best;
  };

  std::vector<std::size_t> atoms{0};
  std::vector<double> uniform(n, 1.0 / static_cast<double>(n));
  double first_value = 0.0;
  const std::size_t first = best_response(uniform, first_value);
  if (first != 0) atoms.push_back(first);

  GlobalMarginResult out;
  out.grid_slack = 2.0 * (2.0 * std::numbers::pi / static_cast<double>(grid_size));
  double lower = -std::numeric_limits<double>::infinity();
  double upper = first_value;
  out.duals = uniform;
  double inner_tol = std::max(0.25 * tol, 0.125 * std::abs(first_value));
  for (std::size_t round = 0; round < 100000; ++round) {
    Matrix restricted(n, atoms.size());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t a = 0; a < atoms.size(); ++a) restricted(i, a) = atom_column(atoms[a], i);
    }
    const GameResult g = game_value(restricted, inner_tol);
    lower = std::max(lower, g.lower);
    double br_value = 0.0;
    const std::size_t br = best_response(g.row_strategy, br_value);
    if (br_value < upper) {
      upper = br_value;
      out.duals = g.row_strategy;
    }
    if (upper - lower <= tol) break;
    if (std::find(atoms.begin(), atoms.end(), br) == atoms.end()) {
      atoms.push_back(br);
      inner_tol = std::max(0.25 * tol, std::min(inner_tol, 0.125 * (upper - lower)));
    } else {
      if (inner_tol <= 0.25 * tol) {
        throw NotConverged("global margin stalled with gap " + std::to_string(upper - lower));
      }
      inner_tol = std::max(0.25 * tol, 0.25 * inner_tol);
    }
  }
  if (upper - lower > tol) throw NotConverged("global margin did not close its gap");
  out.lower = lower;
  out.upper = upper;
  out.value = 0.5 * (lower + upper);
  out.atoms_used = atoms.size();
  return out;
}

void VerifyReport::add_upper(std::string name, double value, double tolerance) {
  checks.push_back({std::move(name), value, tolerance, value <= tolerance});
}

void VerifyReport::add_info(std::string name, double value) {
  checks.push_back({std::move(name), value, std::nullopt, std::isfinite(value)});
}

bool VerifyReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

const Check* VerifyReport::find(const std::string& name) const {
  for (const Check& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

namespace {

Matrix layer_matrix(const PredictorSpec& spec, const ParamVec& w, std::size_t j) {
  const std::span<const double> seg = w.segment(j);
  return Matrix(spec.layer_rows(j), spec.layer_cols(j),
                std::vector<double>(seg.begin(), seg.end()));
}

Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw ShapeMismatch("matrix product shapes");
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) = std::fma(a(i, k), b(k, j), c(i, j));
    }
  }
  return c;
}

double unsigned_angle(std::span<const double> a, std::span<const double> b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) return std::numbers::pi / 2.0;
  return std::acos(std::clamp(std::abs(inner(a, b)) / (na * nb), 0.0, 1.0));
}

}  // namespace

VerifyReport verify_deep_linear(const PredictorSpec& spec, const ParamVec& w,
                                const Dataset& data, const DeepLinearTolerances& tol) {
  if (spec.kind() != ModelKind::DeepLinear) {
    throw DomainError("deep linear verification needs a DeepLinear model");
  }
  VerifyReport report;
  const std::size_t depth = spec.layer_count();
  std::vector<Matrix> layers;
  std::vector<SingularPair> tops;
  for (std::size_t j = 0; j < depth; ++j) {
    layers.push_back(layer_matrix(spec, w, j));
    report.add_upper("rank_one_residual_layer" + std::to_string(j + 1),
                     rank_one_residual(layers.back()), tol.rank);
    tops.push_back(top_singular(layers.back()));
  }
  for (std::size_t j = 1; j < depth; ++j) {
    report.add_upper("chain_angle_layer" + std::to_string(j + 1),
                     unsigned_angle(tops[j].right, tops[j - 1].left), tol.angle);
  }
  Matrix product = layers.front();
  for (std::size_t j = 1; j < depth; ++j) product = multiply(layers[j], product);

  const MaxMarginResult oracle = max_margin_linear(data, tol.oracle);
  const double np = norm(product.data);
  double angle = std::numbers::pi;
  if (np > 0.0) {
    angle = std::acos(std::clamp(inner(product.data, oracle.direction) / np, -1.0, 1.0));
  }
  report.add_upper("product_angle", angle, tol.angle);
  report.add_info("oracle_margin", oracle.margin);
  report.add_info("oracle_certificate_gap", oracle.certificate_gap);
  if (np > 0.0) {
    double worst = std::numeric_limits<double>::infinity();
    for (const Example& ex : data.examples) {
      worst = std::min(worst, ex.y * inner(product.data, ex.x) / np);
    }
    report.add_info("product_margin", worst);
  }
  return report;
}

VerifyReport verify_deep_linear(const PredictorSpec& spec, const Trajectory& trajectory,
                                const Dataset& data, const DeepLinearTolerances& tol) {
  return verify_deep_linear(spec, trajectory.final.w, data, tol);
}

VerifyReport verify_two_homo(const PredictorSpec& spec, const ParamVec& w,
                             const Dataset& data, LossKind kind,
                             const std::vector<std::vector<double>>& cover_dirs,
                             const TwoHomoTolerances& tol) {
  if (spec.kind() != ModelKind::SquaredRelu) {
    throw DomainError("two-homogeneous verification needs a SquaredRelu model");
  }
  VerifyReport report;
  const std::size_t n = data.size();
  const std::size_t m = spec.width();
  const double nw = norm(w);
  if (nw == 0.0) throw ZeroNorm("verification needs |W| > 0");
  const std::vector<double> p = margins(spec, w, data);
  const double scale = nw * nw;
  const double a_hat = *std::min_element(p.begin(), p.end()) / scale;
  report.add_info("final_margin", a_hat);

  const std::vector<double> shares = partition_shares(w, 2.0);
  std::vector<std::vector<double>> theta = node_directions(w);
  for (std::size_t j = 0; j < m; ++j) {
    if (shares[j] < tol.vanish_share) std::fill(theta[j].begin(), theta[j].end(), 0.0);
  }
  Matrix phi(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) phi(i, j) = node_features(data.examples[i], theta[j], j);
  }
  const double local = local_guarantee_value(phi);
  report.add_upper("local_guarantee_residual", std::abs(a_hat - local), tol.local);
  report.add_info("local_guarantee_value", local);
  const GameResult game = game_value(phi, tol.game);
  report.add_info("game_value", game.value);
  report.add_info("game_value_residual", std::abs(a_hat - game.value));

  double share_sum = 0.0;
  double share_min = std::numeric_limits<double>::infinity();
  for (double s : shares) {
    share_sum += s;
    share_min = std::min(share_min, s);
  }
  report.add_upper("share_sum_error", std::abs(share_sum - 1.0), tol.share_sum);
  report.add_upper("share_negativity", std::max(0.0, -share_min), 0.0);

  const std::vector<double> q = dual_weights(kind, p);
  double support_worst = 0.0;
  std::size_t supported = 0;
  for (std::size_t j = 0; j < m; ++j) {
    if (shares[j] <= tol.support_share) continue;
    ++supported;
    double value = 0.0;
    for (std::size_t i = 0; i < n; ++i) value += q[i] * phi(i, j);
    support_worst = std::max(support_worst, std::abs(value - a_hat) / std::abs(a_hat));
  }
  report.add_upper("support_value_residual", support_worst, tol.support_value);
  report.add_info("supported_nodes", static_cast<double>(supported));

  double q_sum = 0.0;
  double off_support = 0.0;
  const double alpha_norm = smoothed_margin(kind, p) / scale;
  for (std::size_t i = 0; i < n; ++i) {
    q_sum += q[i];
    if (p[i] / scale > a_hat + tol.off_support_band * alpha_norm) off_support += q[i];
  }
  if (kind == LossKind::Exp) {
    report.add_upper("dual_sum_error", std::abs(q_sum - 1.0), tol.dual_sum);
  } else {
    report.add_info("dual_sum_error", std::abs(q_sum - 1.0));
  }
  report.add_upper("dual_off_support_mass", off_support, tol.dual_off_support);

  if (data.dim() == 2) {
    const CoverResult cover =
        covering_check(cover_dirs, spec.node_signs(), tol.cover_grid, &theta);
    const double eps = std::max(cover.epsilon_cover, cover.epsilon_drift);
    const GlobalMarginResult global = global_margin_2d(data, tol.cover_grid, tol.game);
    report.add_info("epsilon_cover", cover.epsilon_cover);
    report.add_info("epsilon_drift", cover.epsilon_drift);
    report.add_info("global_margin", global.value);
    report.add_info("global_margin_upper", global.upper + global.grid_slack);
    report.add_info("global_slack_cover_only",
                    global.value - 4.0 * cover.epsilon_cover - a_hat);
    report.add_upper("global_slack", global.value - 4.0 * eps - global.grid_slack - a_hat,
                     tol.global);
  }
  return report;
}

VerifyReport verify_two_homo(const PredictorSpec& spec, const Trajectory& trajectory,
                             const Dataset& data, LossKind kind,
                             const TwoHomoTolerances& tol) {
  if (trajectory.records.empty()) throw DomainError("trajectory has no checkpoints");
  return verify_two_homo(spec, trajectory.final.w, data, kind,
                         trajectory.records.front().node_dirs, tol);
}

}  // namespace homoflow
