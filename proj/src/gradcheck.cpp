#include "ssg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace ssg {

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& b : blocks) worst = std::max(worst, b.rel_error);
  return worst;
}

double GradCheckReport::max_element_error() const {
  double worst = 0.0;
  for (const auto& b : blocks) worst = std::max(worst, b.max_element_error);
  return worst;
}

std::vector<BlockError> GradCheckReport::failures(double tolerance) const {
  std::vector<BlockError> out;
  for (const auto& b : blocks) {
    if (!(b.rel_error < tolerance)) out.push_back(b);
  }
  return out;
}

GradCheckReport finite_diff_check(const std::function<double()>& f, std::span<const NamedTensor> params, double h) {
  if (!(h > 0.0)) throw ContractError("finite_diff_check: step must be positive");
  const double base = f();
  const double again = f();
  if (base != again) {
    throw DeterminismError(fmt::format("finite_diff_check: f evaluated to {} and then {} at the same point", base, again));
  }
  GradCheckReport report;
  for (const auto& p : params) {
    if (p.tensor == nullptr) throw ContractError(fmt::format("finite_diff_check: null tensor for {}", p.name));
    BlockError block{p.name};
    auto& values = p.tensor->data();
    const bool has_grad = p.tensor->has_grad();
    double diff_sq = 0.0, analytic_sq = 0.0, numeric_sq = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = f();
      values[i] = saved - h;
      const double down = f();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = has_grad ? p.tensor->grad()[i] : 0.0;
      diff_sq += (analytic - numeric) * (analytic - numeric);
      analytic_sq += analytic * analytic;
      numeric_sq += numeric * numeric;
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double err = std::abs(analytic - numeric) / denom;
      if (err > block.max_element_error || !std::isfinite(err)) {
        block.max_element_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
        block.worst_index = i;
        block.analytic = analytic;
        block.numeric = numeric;
      }
    }
    const double norm = std::max({std::sqrt(analytic_sq), std::sqrt(numeric_sq), 1e-8});
    block.rel_error = std::sqrt(diff_sq) / norm;
    if (!std::isfinite(block.rel_error)) block.rel_error = std::numeric_limits<double>::infinity();
    report.blocks.push_back(block);
  }
  return report;
}

}  // namespace ssg
