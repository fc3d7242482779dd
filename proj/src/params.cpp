#include "homoflow/params.hpp"

#include <cmath>
#include <utility>

#include "homoflow/error.hpp"
#include "homoflow/kernels.hpp"

namespace homoflow {
namespace {

void check_finite(std::span<const double> v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw NonFinite("parameter entry " + std::to_string(i) + " is not finite");
    }
  }
}

void check_partition(const std::vector<Segment>& partition, std::size_t size) {
  std::size_t cursor = 0;
  for (const Segment& s : partition) {
    if (s.offset != cursor) {
      throw InvalidPartition("segment '" + s.name + "' starts at " +
                             std::to_string(s.offset) + ", expected " +
                             std::to_string(cursor));
    }
    cursor += s.length;
  }
  if (cursor != size) {
    throw InvalidPartition("segments cover " + std::to_string(cursor) +
                           " of " + std::to_string(size) + " entries");
  }
}

}  // namespace

ParamVec::ParamVec(std::vector<double> data)
    : ParamVec(data, {Segment{"all", 0, data.size()}}) {}

ParamVec::ParamVec(std::vector<double> data, std::vector<Segment> partition)
    : data_(std::move(data)), partition_(std::move(partition)) {
  check_partition(partition_, data_.size());
  check_finite(data_);
}

std::span<const double> ParamVec::segment(std::size_t j) const {
  const Segment& s = partition_.at(j);
  return std::span<const double>(data_).subspan(s.offset, s.length);
}

ParamVec ParamVec::with_values(std::vector<double> data) const {
  if (data.size() != data_.size()) {
    throw ShapeMismatch("with_values: length " + std::to_string(data.size()) +
                        " for a vector of length " + std::to_string(data_.size()));
  }
  return ParamVec(std::move(data), partition_);
}

ParamVec ParamVec::scaled(double c) const {
  std::vector<double> out(data_);
  for (double& x : out) x *= c;
  return with_values(std::move(out));
}

double norm(std::span<const double> v) { return std::sqrt(kernels::sum_squares(v)); }

double norm(const ParamVec& w) { return norm(w.values()); }

double inner(std::span<const double> a, std::span<const double> b) {
  return kernels::dot(a, b);
}

std::vector<double> unit_direction(std::span<const double> w) {
  const double n = norm(w);
  if (n == 0.0) throw ZeroNorm("direction of the zero vector");
  std::vector<double> out(w.begin(), w.end());
  for (double& x : out) x /= n;
  return out;
}

RadialSpherical decompose(std::span<const double> g, std::span<const double> w) {
  if (g.size() != w.size()) {
    throw ShapeMismatch("decompose: gradient length " + std::to_string(g.size()) +
                        " vs parameter length " + std::to_string(w.size()));
  }
  const std::vector<double> dir = unit_direction(w);
  const double along = inner(g, dir);
  RadialSpherical out;
  out.radial.resize(g.size());
  out.spherical.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    out.radial[i] = along * dir[i];
    out.spherical[i] = g[i] - out.radial[i];
  }
  return out;
}

RadialSpherical decompose(std::span<const double> g, const ParamVec& w) {
  return decompose(g, w.values());
}

std::vector<double> partition_shares(const ParamVec& w, double degree) {
  if (!(degree > 0.0)) throw DomainError("partition_shares needs degree > 0");
  const double total = norm(w);
  if (total == 0.0) throw ZeroNorm("partition_shares of the zero vector");
  std::vector<double> shares;
  shares.reserve(w.segment_count());
  for (std::size_t j = 0; j < w.segment_count(); ++j) {
    shares.push_back(std::pow(norm(w.segment(j)) / total, degree));
  }
  return shares;
}

}  // namespace homoflow
