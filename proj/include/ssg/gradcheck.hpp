#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssg/tensor.hpp"

namespace ssg {

/// The function under test returned different values for identical inputs.
class DeterminismError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Tensor* tensor = nullptr;
};

struct BlockError {
  std::string name;
  /// ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-8) over the block.
  double rel_error = 0.0;
  /// Largest per-element |a - n| / max(|a|, |n|, 1e-8), and where it occurs.
  double max_element_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<BlockError> blocks;

  /// Largest block-level relative error.
  double max_rel_error() const;
  double max_element_error() const;
  /// Blocks whose block-level error is not below `tolerance`.
  std::vector<BlockError> failures(double tolerance) const;
};

/// Compares the analytic gradients already stored on each tensor against
/// central differences (f(p+h) - f(p-h)) / 2h, one coordinate at a time.
/// A tensor without a gradient buffer is treated as having zero gradient.
GradCheckReport finite_diff_check(const std::function<double()>& f, std::span<const NamedTensor> params, double h = 1e-5);

}  // namespace ssg
