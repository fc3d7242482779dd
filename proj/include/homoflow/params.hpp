#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace homoflow {

/// Named contiguous slice [offset, offset + length) of a flat parameter vector.
struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;

  bool operator==(const Segment&) const = default;
};

/// Flat real parameter vector with an ordered partition into segments
/// (layers or nodes). Values are fixed at construction; updates go through
/// with_values(), which keeps the partition.
///
/// Invariants: segments are disjoint, contiguous, in order, and cover the
/// whole vector; every entry is finite. Violations throw InvalidPartition or
/// NonFinite.
class ParamVec {
 public:
  ParamVec() = default;
  explicit ParamVec(std::vector<double> data);
  ParamVec(std::vector<double> data, std::vector<Segment> partition);

  std::size_t size() const { return data_.size(); }
  std::span<const double> values() const { return data_; }
  double operator[](std::size_t i) const { return data_[i]; }

  const std::vector<Segment>& partition() const { return partition_; }
  std::size_t segment_count() const { return partition_.size(); }
  std::span<const double> segment(std::size_t j) const;

  ParamVec with_values(std::vector<double> data) const;
  ParamVec scaled(double c) const;

  bool operator==(const ParamVec&) const = default;

 private:
  std::vector<double> data_;
  std::vector<Segment> partition_;
};

/// Radial (along W/|W|) and spherical (orthogonal) parts of a vector.
struct RadialSpherical {
  std::vector<double> radial;
  std::vector<double> spherical;
};

double norm(std::span<const double> v);
double norm(const ParamVec& w);
double inner(std::span<const double> a, std::span<const double> b);

/// W / |W|; throws ZeroNorm for the zero vector.
std::vector<double> unit_direction(std::span<const double> w);

/// Splits g into <g, W~> W~ and the remainder. Throws ZeroNorm when |W| = 0.
RadialSpherical decompose(std::span<const double> g, const ParamVec& w);
RadialSpherical decompose(std::span<const double> g, std::span<const double> w);

/// Per-segment shares |U_j|^L / |W|^L.
std::vector<double> partition_shares(const ParamVec& w, double degree);

}  // namespace homoflow
