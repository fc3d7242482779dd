#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "homoflow/error.hpp"
#include "homoflow/params.hpp"

using namespace homoflow;

TEST_CASE("norm examples") {
  CHECK(norm(ParamVec({3.0, 4.0})) == 5.0);
  CHECK(norm(ParamVec({0.0, 0.0, 0.0})) == 0.0);
  CHECK(norm(ParamVec({1.0, 1.0, 1.0, 1.0})) == 2.0);
}

TEST_CASE("partitions are validated") {
  CHECK_NOTHROW(ParamVec({1, 2, 3}, {{"a", 0, 1}, {"b", 1, 2}}));
  CHECK_THROWS_AS(ParamVec({1, 2, 3}, {{"a", 0, 1}, {"b", 2, 1}}), InvalidPartition);
  CHECK_THROWS_AS(ParamVec({1, 2, 3}, {{"a", 0, 2}, {"b", 1, 2}}), InvalidPartition);
  CHECK_THROWS_AS(ParamVec({1, 2, 3}, {{"a", 0, 2}}), InvalidPartition);
  CHECK_THROWS_AS(ParamVec({1, std::numeric_limits<double>::quiet_NaN()}), NonFinite);
  CHECK_THROWS_AS(ParamVec({1, std::numeric_limits<double>::infinity()}), NonFinite);
  const ParamVec w({1, 2, 3}, {{"a", 0, 1}, {"b", 1, 2}});
  CHECK(w.segment(1)[1] == 3.0);
  CHECK(w.scaled(2.0).partition() == w.partition());
  CHECK_THROWS_AS(w.with_values({1.0, 2.0}), ShapeMismatch);
}

TEST_CASE("decompose examples") {
  auto par = decompose(std::vector<double>{1, 0}, ParamVec({1.0, 0.0}));
  CHECK(par.radial == std::vector<double>{1, 0});
  CHECK(par.spherical == std::vector<double>{0, 0});
  auto orth = decompose(std::vector<double>{0, 1}, ParamVec({1.0, 0.0}));
  CHECK(orth.radial == std::vector<double>{0, 0});
  CHECK(orth.spherical == std::vector<double>{0, 1});
  auto mix = decompose(std::vector<double>{1, 0}, ParamVec({3.0, 4.0}));
  CHECK(mix.radial[0] == doctest::Approx(0.36).epsilon(1e-14));
  CHECK(mix.radial[1] == doctest::Approx(0.48).epsilon(1e-14));
  CHECK(mix.spherical[0] == doctest::Approx(0.64).epsilon(1e-14));
  CHECK(mix.spherical[1] == doctest::Approx(-0.48).epsilon(1e-14));
  CHECK_THROWS_AS(decompose(std::vector<double>{1, 0}, ParamVec({0.0, 0.0})), ZeroNorm);
  CHECK_THROWS_AS(unit_direction(std::vector<double>{0.0}), ZeroNorm);
}

TEST_CASE("decompose properties on random vectors") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t k = 1 + rep % 40;
    std::vector<double> wv(k), gv(k);
    for (auto& x : wv) x = g(rng) * std::pow(10.0, rep % 7 - 3);
    for (auto& x : gv) x = g(rng);
    const ParamVec w(wv);
    const RadialSpherical rs = decompose(gv, w);
    double err = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      err = std::max(err, std::abs(rs.radial[i] + rs.spherical[i] - gv[i]));
    }
    CHECK(err <= 1e-12 * norm(gv));
    const double nr = norm(rs.radial), ns = norm(rs.spherical);
    if (nr > 0 && ns > 0) CHECK(std::abs(inner(rs.radial, rs.spherical)) <= 1e-12 * nr * ns + 1e-15 * norm(gv) * norm(gv));
    const double lhs = inner(gv, gv);
    CHECK(std::abs(lhs - (nr * nr + ns * ns)) <= 1e-10 * lhs);
  }
}

TEST_CASE("partition shares") {
  const ParamVec eq({1, 0, 0, 1}, {{"a", 0, 2}, {"b", 2, 2}});
  auto s = partition_shares(eq, 2.0);
  CHECK(s[0] == doctest::Approx(0.5));
  CHECK(s[1] == doctest::Approx(0.5));
  CHECK(partition_shares(ParamVec({3.0, 4.0}), 2.0)[0] == doctest::Approx(1.0));
  const ParamVec uneven({1, 0, 2}, {{"a", 0, 1}, {"b", 1, 2}});
  auto u = partition_shares(uneven, 2.0);
  CHECK(u[0] == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(u[1] == doctest::Approx(0.8).epsilon(1e-14));
  CHECK_THROWS_AS(partition_shares(ParamVec({0.0, 0.0}), 2.0), ZeroNorm);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> v(12);
    for (auto& x : v) x = g(rng);
    std::vector<Segment> parts;
    for (std::size_t j = 0; j < 4; ++j) parts.push_back({"n" + std::to_string(j), 3 * j, 3});
    double total = 0.0;
    for (double sj : partition_shares(ParamVec(v, parts), 2.0)) total += sj;
    CHECK(std::abs(total - 1.0) <= 1e-12);
  }
}
