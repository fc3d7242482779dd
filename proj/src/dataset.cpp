#include "homoflow/dataset.hpp"

#include <cmath>
#include <string>

#include "homoflow/error.hpp"

namespace homoflow {

void Dataset::validate() const {
  if (examples.empty()) throw DegenerateData("dataset has no examples");
  const std::size_t d = dim();
  if (d == 0) throw ShapeMismatch("examples must have at least one feature");
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const Example& ex = examples[i];
    if (ex.x.size() != d) {
      throw ShapeMismatch("example " + std::to_string(i) + " has " +
                          std::to_string(ex.x.size()) + " features, expected " +
                          std::to_string(d));
    }
    if (ex.y != 1 && ex.y != -1) {
      throw DomainError("example " + std::to_string(i) + " has label " +
                        std::to_string(ex.y));
    }
    for (double v : ex.x) {
      if (!std::isfinite(v)) throw NonFinite("example " + std::to_string(i));
    }
  }
}

}  // namespace homoflow
