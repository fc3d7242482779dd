#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace homoflow {

/// One labeled example; y is -1 or +1.
struct Example {
  std::vector<double> x;
  int y = 1;

  bool operator==(const Example&) const = default;
};

/// Labeled examples plus the parameters that produced them.
struct Dataset {
  std::vector<Example> examples;
  /// Generator name, seed and knobs, stored as strings for lossless echo.
  std::map<std::string, std::string> meta;

  std::size_t size() const { return examples.size(); }
  std::size_t dim() const { return examples.empty() ? 0 : examples.front().x.size(); }

  /// Throws ShapeMismatch / DomainError on ragged inputs or bad labels.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

}  // namespace homoflow
