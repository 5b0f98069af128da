#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "foul/errors.hpp"

namespace foul {

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("dot: length mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

inline double norm(std::span<const double> a) {
  return std::sqrt(squared_norm(a));
}

/// y += scale * x
inline void axpy(double scale, std::span<const double> x,
                 std::span<double> y) {
  if (x.size() != y.size()) {
    throw ShapeError("axpy: length mismatch");
  }
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += scale * x[i];
}

inline void scale_inplace(std::span<double> x, double scale) {
  for (double& v : x) v *= scale;
}

inline bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(),
                     [](double v) { return std::isfinite(v); });
}

/// cos(a, b) = a.b / (|a||b|); throws on zero-norm input.
inline double cosine_similarity(std::span<const double> a,
                                std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine_similarity: length mismatch");
  }
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) {
    throw NumericError("cosine_similarity: zero-norm input");
  }
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

/// Euclidean projection onto the probability simplex
/// { x : x_i >= 0, sum x_i = 1 } via the exact sort-and-threshold rule.
///
/// Inputs already feasible (within 1e-12 on the sum) are returned
/// unchanged, which makes the projection exactly idempotent.
inline std::vector<double> project_to_simplex(std::span<const double> v) {
  if (v.empty()) {
    throw ShapeError("project_to_simplex: empty vector");
  }
  double sum = 0.0;
  double min_v = v[0];
  for (const double x : v) {
    sum += x;
    min_v = std::min(min_v, x);
  }
  if (min_v >= 0.0 && std::abs(sum - 1.0) <= 1e-12) {
    return std::vector<double>(v.begin(), v.end());
  }

  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumulative = 0.0;
  double tau = 0.0;
  std::size_t rho = 0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (u[j] - candidate > 0.0) {
      rho = j + 1;
      tau = candidate;
    }
  }
  (void)rho;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::max(v[i] - tau, 0.0);
  }
  return out;
}

}  // namespace foul
