#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "foul/errors.hpp"

namespace foul {

/// Relative difference with a small absolute floor so that exact-zero
/// gradients compare cleanly.
inline double relative_error(double analytic, double numeric) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), 1e-4});
  return std::abs(analytic - numeric) / denom;
}

/// Checks a supplied analytic gradient against central finite differences,
/// coordinate by coordinate, and returns the maximum relative error.
inline double finite_diff_check(
    const std::function<double(std::span<const double>)>& loss,
    std::span<const double> point, std::span<const double> analytic_grad,
    double h = 1e-5) {
  if (h <= 0.0) {
    throw NumericError("finite_diff_check: h must be positive");
  }
  if (point.size() != analytic_grad.size()) {
    throw ShapeError("finite_diff_check: gradient length mismatch");
  }
  std::vector<double> x(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = loss(x);
    x[i] = saved - h;
    const double down = loss(x);
    x[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff_check: non-finite loss near point");
    }
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, relative_error(analytic_grad[i], numeric));
  }
  return worst;
}

}  // namespace foul
