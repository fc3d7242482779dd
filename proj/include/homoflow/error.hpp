#pragma once

#include <stdexcept>
#include <string>

namespace homoflow {

/// Base class for every error raised by the library. Each subclass names one
/// failure mode so callers can catch precisely what they can recover from.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define HOMOFLOW_DEFINE_ERROR(Name)          \
  class Name : public Error {                \
   public:                                   \
    explicit Name(const std::string& what)   \
        : Error(std::string(#Name ": ") + what) {} \
  }

HOMOFLOW_DEFINE_ERROR(ZeroNorm);
HOMOFLOW_DEFINE_ERROR(ZeroVector);
HOMOFLOW_DEFINE_ERROR(ZeroMatrix);
HOMOFLOW_DEFINE_ERROR(NonFinite);
HOMOFLOW_DEFINE_ERROR(InvalidPartition);
HOMOFLOW_DEFINE_ERROR(ShapeMismatch);
HOMOFLOW_DEFINE_ERROR(DomainError);
HOMOFLOW_DEFINE_ERROR(WarmupFailed);
HOMOFLOW_DEFINE_ERROR(StalledFlow);
HOMOFLOW_DEFINE_ERROR(NotSeparable);
HOMOFLOW_DEFINE_ERROR(NotConverged);
HOMOFLOW_DEFINE_ERROR(UnsupportedDimension);
HOMOFLOW_DEFINE_ERROR(DegenerateData);
HOMOFLOW_DEFINE_ERROR(ConfigError);

#undef HOMOFLOW_DEFINE_ERROR

}  // namespace homoflow
