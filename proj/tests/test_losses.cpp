#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "fixtures.hpp"
#include "homoflow/error.hpp"
#include "homoflow/losses.hpp"
#include "homoflow/models.hpp"

using namespace homoflow;

TEST_CASE("ell examples") {
  CHECK(ell(LossKind::Exp, 0.0) == 1.0);
  CHECK(ell_prime(LossKind::Exp, 0.0) == -1.0);
  CHECK(ell_inverse(LossKind::Exp, 1.0) == 0.0);
  CHECK(ell(LossKind::Logistic, 0.0) == doctest::Approx(0.6931471805599453).epsilon(1e-15));
  // Reference from a 40-digit evaluation of -ln(expm1(1e-12)).
  CHECK(ell_inverse(LossKind::Logistic, 1e-12) == doctest::Approx(27.631021115928048).epsilon(1e-13));
  CHECK_THROWS_AS(ell_inverse(LossKind::Exp, 0.0), DomainError);
  CHECK_THROWS_AS(ell_inverse(LossKind::Logistic, -1.0), DomainError);
  CHECK_THROWS_AS(ell_inverse(LossKind::Exp, std::numeric_limits<double>::quiet_NaN()), DomainError);
}

TEST_CASE("ell inverse round trips") {
  for (LossKind kind : {LossKind::Exp, LossKind::Logistic}) {
    for (double z = -30.0; z <= 60.0; z += 0.37) {
      const double v = ell(kind, z);
      CHECK(ell_prime(kind, z) < 0.0);
      CHECK(std::abs(ell(kind, ell_inverse(kind, v)) - v) <= 1e-12 * v);
      CHECK(std::abs(log_ell(kind, z) - std::log(v)) <= 1e-12 * std::max(1.0, std::abs(std::log(v))));
    }
    // Far beyond double underflow of ell itself.
    CHECK(log_ell(kind, 800.0) == doctest::Approx(-800.0).epsilon(1e-14));
    CHECK(alpha_from_log_loss(kind, -800.0) == doctest::Approx(800.0).epsilon(1e-14));
  }
}

TEST_CASE("smoothed margin examples") {
  for (LossKind kind : {LossKind::Exp, LossKind::Logistic}) {
    for (double p : {-3.0, 0.0, 0.7, 25.0}) {
      const std::vector<double> one{p};
      CHECK(std::abs(smoothed_margin(kind, one) - p) <= 1e-12 * std::max(1.0, std::abs(p)));
      CHECK(dual_weights(kind, one)[0] == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(beta(kind, one) == doctest::Approx(p).epsilon(1e-12));
    }
  }
  CHECK(smoothed_margin(LossKind::Exp, std::vector<double>{0, 0}) ==
        doctest::Approx(-std::log(2.0)).epsilon(1e-15));
  CHECK(smoothed_margin(LossKind::Exp, std::vector<double>{10, 12}) ==
        doctest::Approx(9.873071988957028).epsilon(1e-14));
  CHECK(pi(LossKind::Exp, std::vector<double>{10, 12}) ==
        smoothed_margin(LossKind::Exp, std::vector<double>{10, 12}));
}

TEST_CASE("dual weight and beta examples") {
  const auto q = dual_weights(LossKind::Exp, std::vector<double>{0, 0});
  CHECK(q[0] == 0.5);
  CHECK(q[1] == 0.5);
  const auto r = dual_weights(LossKind::Exp, std::vector<double>{0, std::log(3.0)});
  CHECK(r[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(r[1] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(beta(LossKind::Exp, std::vector<double>{0, 0}) == 0.0);
}

TEST_CASE("sigma examples and super-additivity") {
  CHECK(sigma(LossKind::Exp, 1.0 / std::exp(1.0)) == doctest::Approx(-1.0 / std::exp(1.0)).epsilon(1e-14));
  CHECK(std::abs(sigma(LossKind::Logistic, std::log(2.0) * (1.0 - 1e-15))) <= 1e-13);
  CHECK_THROWS_AS(sigma(LossKind::Exp, 0.0), DomainError);
  CHECK_THROWS_AS(sigma(LossKind::Exp, 1.5), DomainError);
  for (LossKind kind : {LossKind::Exp, LossKind::Logistic}) {
    const double top = ell(kind, 0.0);
    const int grid = 120;
    for (int a = 1; a < grid; ++a) {
      for (int b = 1; a + b < grid; ++b) {
        const double z1 = top * a / grid, z2 = top * b / grid;
        CHECK(sigma(kind, z1 + z2) >= sigma(kind, z1) + sigma(kind, z2) - 1e-12);
      }
    }
  }
}

TEST_CASE("sandwich and min bound on random margins") {
  std::mt19937_64 rng(51);
  std::normal_distribution<double> g;
  for (LossKind kind : {LossKind::Exp, LossKind::Logistic}) {
    int sandwiched = 0;
    for (int rep = 0; rep < 2000; ++rep) {
      const std::size_t n = 1 + rep % 12;
      std::vector<double> p(n);
      const double shift = rep % 3 == 0 ? 0.0 : 3.0 + 10.0 * (rep % 5);
      for (double& v : p) v = shift + 2.0 * g(rng);
      const double a = smoothed_margin(kind, p);
      const double b = beta(kind, p);
      const double mn = *std::min_element(p.begin(), p.end());
      CHECK(a <= mn + 1e-12 * std::max(1.0, std::abs(mn)));
      if (log_total_loss(kind, p) < std::log(ell(kind, 0.0))) {
        ++sandwiched;
        CHECK(a > 0.0);
        CHECK(a <= b + 1e-9);
        CHECK(b <= a + 2.0 * std::log(static_cast<double>(n)) + 1.0 + 1e-9);
        if (kind == LossKind::Exp) CHECK(b <= a + std::log(static_cast<double>(n)) + 1e-9);
      }
      const auto q = dual_weights(kind, p);
      double total = 0.0;
      for (double v : q) {
        CHECK(v >= 0.0);
        total += v;
      }
      if (kind == LossKind::Exp) {
        CHECK(std::abs(total - 1.0) <= 1e-12);
      } else {
        CHECK(total > 0.0);
        if (log_total_loss(kind, p) < std::log(ell(kind, 0.0))) CHECK(total <= 2.0 + 1e-9);
      }
    }
    CHECK(sandwiched > 500);
  }
}

TEST_CASE("exp sandwich on separable n=8 margins") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(1.0, 20.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> p(8);
    for (double& v : p) v = u(rng);
    const double a = smoothed_margin(LossKind::Exp, p), b = beta(LossKind::Exp, p);
    CHECK(a <= b + 1e-12);
    CHECK(b <= a + std::log(8.0) + 1e-12);
  }
}

TEST_CASE("pi is concave") {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> g(0.0, 3.0);
  std::uniform_real_distribution<double> t01(0.0, 1.0);
  for (LossKind kind : {LossKind::Exp, LossKind::Logistic}) {
    for (int rep = 0; rep < 2000; ++rep) {
      const std::size_t n = 1 + rep % 9;
      std::vector<double> v(n), w(n), mix(n);
      for (double& x : v) x = g(rng);
      for (double& x : w) x = g(rng);
      const double t = t01(rng);
      for (std::size_t i = 0; i < n; ++i) mix[i] = t * v[i] + (1.0 - t) * w[i];
      CHECK(pi(kind, mix) >= t * pi(kind, v) + (1.0 - t) * pi(kind, w) - 1e-9);
    }
  }
}

TEST_CASE("extended precision agrees with double") {
  std::mt19937_64 rng(71);
  std::normal_distribution<double> g;
  for (LossKind kind : {LossKind::Exp, LossKind::Logistic}) {
    for (int rep = 0; rep < 300; ++rep) {
      std::vector<double> p(1 + rep % 30);
      for (double& v : p) v = 40.0 + 5.0 * g(rng);
      CHECK(smoothed_margin(kind, p, Precision::Extended) ==
            doctest::Approx(smoothed_margin(kind, p)).epsilon(1e-13));
      CHECK(log_total_loss(kind, p, Precision::Extended) ==
            doctest::Approx(log_total_loss(kind, p)).epsilon(1e-13));
    }
  }
}

TEST_CASE("dual gradient consistency") {
  std::mt19937_64 rng(81);
  for (LossKind kind : {LossKind::Exp, LossKind::Logistic}) {
    for (int draw = 0; draw < 200; ++draw) {
      const auto spec = fixture::random_spec(rng, draw);
      const ParamVec w = spec.make_params(fixture::random_vector(rng, spec.param_count()));
      Dataset data;
      for (int i = 0; i < 6; ++i) {
        data.examples.push_back({fixture::random_vector(rng, spec.input_dim()), i % 2 ? 1 : -1});
      }
      const auto p = margins(spec, w, data);
      const auto q = dual_weights(kind, p);
      const double a = smoothed_margin(kind, p);
      std::vector<double> lp(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) lp[i] = ell_prime(kind, p[i]);
      const auto via_q = weighted_margin_grad(spec, w, data, q);
      auto via_loss = weighted_margin_grad(spec, w, data, lp);
      const double c = -ell_prime(kind, a);
      for (double& v : via_loss) v = -v / c;
      CHECK(fixture::rel_err_vec(via_q, via_loss) <= 1e-10);
    }
  }
}

TEST_CASE("snapshot fields are consistent") {
  const std::vector<double> p{4.0, 5.0, 9.0};
  const MarginSnapshot s = snapshot(LossKind::Exp, p, 2.0, 2.0);
  CHECK(s.loss_total == doctest::Approx(std::exp(-4.0) + std::exp(-5.0) + std::exp(-9.0)));
  CHECK(s.log_loss == doctest::Approx(std::log(s.loss_total)).epsilon(1e-14));
  CHECK(s.alpha == doctest::Approx(-s.log_loss).epsilon(1e-14));
  CHECK(s.alpha_norm == doctest::Approx(s.alpha / 4.0).epsilon(1e-15));
  CHECK(s.duals.size() == 3);
  CHECK(s.beta == doctest::Approx(beta(LossKind::Exp, p)));
  const MarginSnapshot far = snapshot(LossKind::Exp, {900.0, 901.0}, 1.0, 1.0);
  CHECK(far.loss_total == 0.0);
  CHECK(far.log_loss < -899.0);
}
