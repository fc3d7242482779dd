#include "homoflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "homoflow/error.hpp"
#include "homoflow/kernels.hpp"

namespace homoflow {

double alignment_angle(std::span<const double> w, std::span<const double> g) {
  if (w.size() != g.size()) throw ShapeMismatch("alignment_angle length mismatch");
  const double nw = norm(w);
  const double ng = norm(g);
  if (nw == 0.0 || ng == 0.0) throw ZeroVector("alignment angle with a zero vector");
  const double c = -inner(w, g) / (nw * ng);
  return std::acos(std::clamp(c, -1.0, 1.0));
}

std::vector<double> margin_distribution(std::span<const double> margins,
                                        double norm_w, double degree) {
  if (!(norm_w > 0.0)) throw ZeroNorm("margin distribution needs |W| > 0");
  const double scale = std::pow(norm_w, degree);
  std::vector<double> out(margins.begin(), margins.end());
  for (double& v : out) v /= scale;
  return out;
}

RateIdentities rate_identities_from_alpha(std::span<const double> w,
                                          std::span<const double> grad_alpha,
                                          double neg_ell_prime_alpha, double alpha,
                                          double beta, double degree) {
  const double nw = norm(w);
  if (nw == 0.0) throw ZeroNorm("rate identities need |W| > 0");
  const RadialSpherical parts = decompose(grad_alpha, w);
  const double radial_alpha = norm(parts.radial);
  const double spherical_alpha = norm(parts.spherical);
  const double c = neg_ell_prime_alpha;
  // Radial part of grad(alpha / |W|^L) is L (beta - alpha) / |W|^{L+1} along W~;
  // its spherical part is the spherical part of grad alpha over |W|^L.
  const double radial_bar = degree * std::abs(beta - alpha) / std::pow(nw, degree + 1.0);
  const double spherical_bar = spherical_alpha / std::pow(nw, degree);
  RateIdentities out;
  out.rate_alpha = radial_bar * (c * radial_alpha) + spherical_bar * (c * spherical_alpha);
  out.rate_zeta = c * spherical_alpha / nw;
  return out;
}

RateIdentities rate_identities(std::span<const double> w,
                               std::span<const double> grad_loss, LossKind kind,
                               std::span<const double> margins, double degree) {
  if (norm(w) == 0.0) throw ZeroNorm("rate identities need |W| > 0");
  const double log_loss = log_total_loss(kind, margins);
  if (!(std::exp(log_loss) < ell(kind, 0.0))) {
    throw DomainError("rate identities need L(W) < ell(0)");
  }
  const double alpha = smoothed_margin(kind, margins);
  const double b = beta(kind, margins);
  const double c = std::exp(log_neg_ell_prime_at_alpha(kind, log_loss));
  std::vector<double> grad_alpha(grad_loss.begin(), grad_loss.end());
  for (double& v : grad_alpha) v /= -c;
  return rate_identities_from_alpha(w, grad_alpha, c, alpha, b, degree);
}

double j_potential(std::span<const double> w, std::span<const double> grad_alpha,
                   double degree) {
  const double nw = norm(w);
  if (nw == 0.0) throw ZeroNorm("J potential needs |W| > 0");
  return kernels::sum_squares(grad_alpha) / std::pow(nw, 2.0 * degree - 2.0);
}

double asymptotic_euler(std::span<const double> w,
                        std::span<const double> grad_alpha, double degree) {
  const double nw = norm(w);
  if (nw == 0.0) throw ZeroNorm("asymptotic Euler value needs |W| > 0");
  return inner(grad_alpha, w) / std::pow(nw, degree);
}

std::vector<SegmentAlignment> partition_alignment(const ParamVec& w,
                                                  std::span<const double> grad_loss) {
  if (grad_loss.size() != w.size()) throw ShapeMismatch("partition_alignment lengths");
  const double nw = norm(w);
  const double ng = norm(grad_loss);
  if (nw == 0.0) throw ZeroNorm("partition alignment needs |W| > 0");
  if (ng == 0.0) throw ZeroNorm("partition alignment needs a nonzero gradient");
  std::vector<SegmentAlignment> out;
  out.reserve(w.segment_count());
  for (std::size_t j = 0; j < w.segment_count(); ++j) {
    const Segment& s = w.partition()[j];
    const std::span<const double> u = w.segment(j);
    const std::span<const double> g = grad_loss.subspan(s.offset, s.length);
    const double nu = norm(u);
    const double gj = norm(g);
    SegmentAlignment a;
    a.norm_share = nu / nw;
    a.grad_share = gj / ng;
    if (nu > 0.0 && gj > 0.0) a.cosine = -inner(u, g) / (nu * gj);
    out.push_back(a);
  }
  return out;
}

std::vector<std::vector<double>> node_directions(const ParamVec& w) {
  const double nw = norm(w);
  std::vector<std::vector<double>> out;
  out.reserve(w.segment_count());
  for (std::size_t j = 0; j < w.segment_count(); ++j) {
    const std::span<const double> row = w.segment(j);
    const double nr = norm(row);
    std::vector<double> dir(row.size(), 0.0);
    if (nr > 1e-14 * nw && nr > 0.0) {
      for (std::size_t k = 0; k < row.size(); ++k) dir[k] = row[k] / nr;
    }
    out.push_back(std::move(dir));
  }
  return out;
}

CoverResult covering_check(const std::vector<std::vector<double>>& node_dirs,
                           std::span<const double> signs, std::size_t grid_size,
                           const std::vector<std::vector<double>>* final_dirs) {
  if (grid_size < 8) throw DomainError("covering check needs at least 8 grid points");
  if (signs.size() != node_dirs.size()) throw ShapeMismatch("one sign per node required");
  for (const auto& d : node_dirs) {
    if (d.size() != 2) {
      throw UnsupportedDimension("covering check is planar only, got d = " +
                                 std::to_string(d.size()));
    }
  }
  CoverResult out;
  out.grid_slack = 2.0 * std::numbers::pi / static_cast<double>(grid_size);
  double worst = 0.0;
  for (std::size_t g = 0; g < grid_size; ++g) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(g) /
                         static_cast<double>(grid_size);
    const double tx = std::cos(angle);
    const double ty = std::sin(angle);
    double best_pos = std::numeric_limits<double>::infinity();
    double best_neg = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < node_dirs.size(); ++j) {
      const double dist = std::hypot(node_dirs[j][0] - tx, node_dirs[j][1] - ty);
      if (signs[j] > 0.0) {
        best_pos = std::min(best_pos, dist);
      } else {
        best_neg = std::min(best_neg, dist);
      }
    }
    worst = std::max(worst, std::max(best_pos, best_neg));
  }
  out.epsilon_cover = worst + out.grid_slack;
  if (final_dirs != nullptr) {
    if (final_dirs->size() != node_dirs.size()) {
      throw ShapeMismatch("final directions must match node count");
    }
    for (std::size_t j = 0; j < node_dirs.size(); ++j) {
      const auto& a = node_dirs[j];
      const auto& b = (*final_dirs)[j];
      if (b.size() != 2) throw UnsupportedDimension("final directions must be planar");
      out.epsilon_drift = std::max(out.epsilon_drift, std::hypot(a[0] - b[0], a[1] - b[1]));
    }
  }
  return out;
}

MetricsRecord measure(const PredictorSpec& spec, const Dataset& data, LossKind kind,
                      const ParamVec& w, std::int64_t step, double zeta,
                      Precision precision, std::vector<double>* grad_alpha_out) {
  const double degree_l = spec.degree();
  const double nw = norm(w);
  if (nw == 0.0) throw ZeroNorm("metrics need |W| > 0");
  MarginSnapshot snap = snapshot(kind, margins(spec, w, data), nw, degree_l, precision);
  std::vector<double> grad_alpha = weighted_margin_grad(spec, w, data, snap.duals);
  const double log_c = log_neg_ell_prime_at_alpha(kind, snap.log_loss);
  const double c = std::exp(log_c);

  MetricsRecord r;
  r.step = step;
  r.log_loss = snap.log_loss;
  r.tau = std::log(static_cast<double>(data.size())) - snap.log_loss;
  r.norm_w = nw;
  r.alpha = snap.alpha;
  r.alpha_norm = snap.alpha_norm;
  r.beta = snap.beta;
  r.zeta = zeta;
  const double ng = norm(grad_alpha);
  if (ng > 0.0) {
    // -grad L is a positive multiple of grad alpha.
    std::vector<double> grad_loss_dir(grad_alpha);
    for (double& v : grad_loss_dir) v = -v;
    r.theta = alignment_angle(w.values(), grad_loss_dir);
  } else {
    r.theta = std::numbers::pi / 2.0;
  }
  r.j_potential = j_potential(w.values(), grad_alpha, degree_l);
  r.euler_value = asymptotic_euler(w.values(), grad_alpha, degree_l);
  r.euler_residual = std::abs(r.euler_value - degree_l * snap.beta / std::pow(nw, degree_l));
  const RateIdentities rates =
      rate_identities_from_alpha(w.values(), grad_alpha, c, snap.alpha, snap.beta, degree_l);
  r.rate_alpha = rates.rate_alpha;
  r.rate_zeta = rates.rate_zeta;
  r.dtau_dt = std::exp(2.0 * log_c - snap.log_loss) * ng * ng;
  r.margins_norm = margin_distribution(snap.margins, nw, degree_l);
  r.duals = std::move(snap.duals);
  r.shares = partition_shares(w, degree_l);
  if (spec.kind() == ModelKind::SquaredRelu) r.node_dirs = node_directions(w);
  if (grad_alpha_out != nullptr) *grad_alpha_out = std::move(grad_alpha);
  return r;
}

}  // namespace homoflow
