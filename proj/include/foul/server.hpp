#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "foul/datagen.hpp"
#include "foul/errors.hpp"
#include "foul/geometry.hpp"
#include "foul/param_vector.hpp"
#include "foul/rng.hpp"

namespace foul {

/// Simplex-constrained mixing coefficients, one simplex per group.
struct GammaWeights {
  std::vector<double> retain;
  std::vector<double> forget;

  void validate() const {
    for (const auto* g : {&retain, &forget}) {
      if (g->empty()) throw ShapeError("GammaWeights: empty group");
      double sum = 0.0;
      for (const double v : *g) {
        if (v < -1e-9) throw NumericError("GammaWeights: negative entry");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        throw NumericError("GammaWeights: group does not sum to 1");
      }
    }
  }
};

struct MatchConfig {
  double kappa = 0.5;
  /// Exponent p of kappa^p in the dual objective's norm-product term.
  /// p = 1 matches the derivation; p = 0.5 matches the sqrt(kappa) print.
  double dual_exponent = 1.0;
  double beta = 1.0;  // forget-term weight
  int solver_steps = 500;
  double solver_rate = 0.05;
  double degeneracy_eps = 1e-12;

  void validate() const {
    if (kappa < 0.0) throw ConfigError("MatchConfig: kappa must be >= 0");
    if (solver_steps < 1) throw ConfigError("MatchConfig: solver steps >= 1");
    if (dual_exponent != 1.0 && dual_exponent != 0.5) {
      throw ConfigError("MatchConfig: dual exponent must be 1 or 0.5");
    }
  }

  double kappa_coeff() const { return std::pow(kappa, dual_exponent); }
};

struct MatchingSolution {
  GammaWeights gamma;
  std::vector<double> g_gamma_retain;
  std::vector<double> g_gamma_forget;
  double j_star = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> g_foul;
  bool degenerate = false;
};

using GradView = std::span<const double>;

/// Weighted elementwise mean; weights must sum to 1. Each coordinate is
/// accumulated in value-sorted order, which makes the reduction exactly
/// independent of the order contributions arrive in.
inline ParamVector fedavg_aggregate(const std::vector<ParamVector>& items,
                                    std::span<const double> weights) {
  if (items.empty()) throw ShapeError("fedavg_aggregate: no inputs");
  if (items.size() != weights.size()) {
    throw ShapeError("fedavg_aggregate: weight count mismatch");
  }
  double wsum = 0.0;
  for (const double w : weights) wsum += w;
  if (std::abs(wsum - 1.0) > 1e-9) {
    throw NumericError("fedavg_aggregate: weights must sum to 1");
  }
  ParamVector out = items.front().zeros_like();
  for (const auto& item : items) {
    if (item.size() != out.size() || !item.layout_matches(out)) {
      throw ShapeError("fedavg_aggregate: layout mismatch");
    }
  }
  std::vector<double> terms(items.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      terms[i] = weights[i] * items[i].values()[c];
    }
    std::sort(terms.begin(), terms.end());
    double sum = 0.0;
    for (const double t : terms) sum += t;
    out.values()[c] = sum;
  }
  return out;
}

/// gamma-weighted combination of a group's updates.
inline std::vector<double> combine_updates(std::span<const double> gamma,
                                           const std::vector<GradView>& g) {
  if (gamma.size() != g.size() || g.empty()) {
    throw ShapeError("combine_updates: size mismatch");
  }
  std::vector<double> out(g.front().size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    axpy(gamma[i], g[i], out);
  }
  return out;
}

/// Dual objective of the matching problem:
///   J = (g_R - beta g_F) . g_FL + kappa^p |g_FL| |g_R - beta g_F|.
inline double dual_objective(const GammaWeights& gamma,
                             const std::vector<GradView>& updates_retain,
                             const std::vector<GradView>& updates_forget,
                             std::span<const double> g_fl,
                             const MatchConfig& config) {
  const std::vector<double> g_r = combine_updates(gamma.retain, updates_retain);
  const std::vector<double> g_f = combine_updates(gamma.forget, updates_forget);
  std::vector<double> d = g_r;
  axpy(-config.beta, g_f, d);
  return dot(d, g_fl) + config.kappa_coeff() * norm(g_fl) * norm(d);
}

/// Projected gradient descent on the dual objective over the product of the
/// two simplexes. Uniform initialization, fixed step count, best iterate
/// kept (first attainment wins ties).
///
/// The argmin is invariant to a common rescaling of all inputs (J scales
/// quadratically), so descent runs on unit-normalized copies and the pinned
/// step size stays meaningful at any update magnitude. When the norm term
/// vanishes (kappa = 0 or |g_FL| = 0) the objective is linear and the exact
/// minimum is taken over vertex pairs instead.
inline MatchingSolution optimize_gamma(
    const std::vector<GradView>& updates_retain,
    const std::vector<GradView>& updates_forget, std::span<const double> g_fl,
    const MatchConfig& config, [[maybe_unused]] RngStream& rng) {
  config.validate();
  if (updates_retain.empty() || updates_forget.empty()) {
    throw ShapeError("optimize_gamma: need >= 1 update per group");
  }
  for (const auto& list : {updates_retain, updates_forget}) {
    for (const auto& g : list) {
      if (g.size() != g_fl.size()) {
        throw ShapeError("optimize_gamma: update length mismatch");
      }
      if (!all_finite(g)) {
        throw NumericError("optimize_gamma: non-finite update");
      }
    }
  }
  if (!all_finite(g_fl)) {
    throw NumericError("optimize_gamma: non-finite aggregate");
  }

  const auto finish = [&](MatchingSolution sol) {
    sol.g_gamma_retain = combine_updates(sol.gamma.retain, updates_retain);
    sol.g_gamma_forget = combine_updates(sol.gamma.forget, updates_forget);
    return sol;
  };

  GammaWeights gamma;
  gamma.retain.assign(updates_retain.size(),
                      1.0 / static_cast<double>(updates_retain.size()));
  gamma.forget.assign(updates_forget.size(),
                      1.0 / static_cast<double>(updates_forget.size()));

  MatchingSolution best;
  best.gamma = gamma;
  best.j_star = dual_objective(gamma, updates_retain, updates_forget, g_fl,
                               config);

  if (config.kappa_coeff() * norm(g_fl) == 0.0) {
    // Linear objective: the minimum sits on a vertex pair; enumerate them.
    for (std::size_t u = 0; u < updates_retain.size(); ++u) {
      for (std::size_t v = 0; v < updates_forget.size(); ++v) {
        GammaWeights vertex;
        vertex.retain.assign(updates_retain.size(), 0.0);
        vertex.forget.assign(updates_forget.size(), 0.0);
        vertex.retain[u] = 1.0;
        vertex.forget[v] = 1.0;
        const double j = dual_objective(vertex, updates_retain,
                                        updates_forget, g_fl, config);
        if (j < best.j_star) {
          best.j_star = j;
          best.gamma = vertex;
        }
      }
    }
    return finish(best);
  }

  double scale = norm(g_fl);
  for (const auto& list : {updates_retain, updates_forget}) {
    for (const auto& g : list) scale = std::max(scale, norm(g));
  }
  const auto normalized = [&](const std::vector<GradView>& list) {
    std::vector<std::vector<double>> out;
    out.reserve(list.size());
    for (const auto& g : list) {
      std::vector<double> v(g.begin(), g.end());
      scale_inplace(v, 1.0 / scale);
      out.push_back(std::move(v));
    }
    return out;
  };
  const std::vector<std::vector<double>> scaled_r = normalized(updates_retain);
  const std::vector<std::vector<double>> scaled_f = normalized(updates_forget);
  std::vector<double> scaled_fl(g_fl.begin(), g_fl.end());
  scale_inplace(scaled_fl, 1.0 / scale);
  const std::vector<GradView> r_views(scaled_r.begin(), scaled_r.end());
  const std::vector<GradView> f_views(scaled_f.begin(), scaled_f.end());

  const double kappa_term = config.kappa_coeff() * norm(scaled_fl);
  double best_scaled_j =
      dual_objective(gamma, r_views, f_views, scaled_fl, config);
  GammaWeights best_gamma = gamma;

  std::vector<double> grad_r(gamma.retain.size());
  std::vector<double> grad_f(gamma.forget.size());
  for (int step = 0; step < config.solver_steps; ++step) {
    const std::vector<double> g_r = combine_updates(gamma.retain, r_views);
    const std::vector<double> g_f = combine_updates(gamma.forget, f_views);
    std::vector<double> d = g_r;
    axpy(-config.beta, g_f, d);
    const double dnorm = norm(d);

    for (std::size_t u = 0; u < r_views.size(); ++u) {
      grad_r[u] = dot(r_views[u], scaled_fl);
      if (dnorm > config.degeneracy_eps) {
        grad_r[u] += kappa_term * dot(d, r_views[u]) / dnorm;
      }
    }
    for (std::size_t v = 0; v < f_views.size(); ++v) {
      grad_f[v] = -config.beta * dot(f_views[v], scaled_fl);
      if (dnorm > config.degeneracy_eps) {
        grad_f[v] -= config.beta * kappa_term * dot(d, f_views[v]) / dnorm;
      }
    }
    for (std::size_t u = 0; u < gamma.retain.size(); ++u) {
      gamma.retain[u] -= config.solver_rate * grad_r[u];
    }
    for (std::size_t v = 0; v < gamma.forget.size(); ++v) {
      gamma.forget[v] -= config.solver_rate * grad_f[v];
    }
    gamma.retain = project_to_simplex(gamma.retain);
    gamma.forget = project_to_simplex(gamma.forget);

    const double j = dual_objective(gamma, r_views, f_views, scaled_fl,
                                    config);
    if (j < best_scaled_j) {
      best_scaled_j = j;
      best_gamma = gamma;
    }
  }

  const double j_original = dual_objective(best_gamma, updates_retain,
                                           updates_forget, g_fl, config);
  if (j_original < best.j_star) {
    best.j_star = j_original;
    best.gamma = best_gamma;
  }
  return finish(best);
}

/// Theorem geometry: g_FOUL sits on the hypersphere of radius
/// kappa |g_FL| around g_FL, in the direction g_R - beta g_F. A vanishing
/// direction degrades to plain FedAvg (flagged, not an error).
inline MatchingSolution compute_foul_gradient(
    std::span<const double> g_fl, std::span<const double> g_gamma_retain,
    std::span<const double> g_gamma_forget, const MatchConfig& config) {
  if (g_gamma_retain.size() != g_fl.size() ||
      g_gamma_forget.size() != g_fl.size()) {
    throw ShapeError("compute_foul_gradient: length mismatch");
  }
  MatchingSolution sol;
  sol.g_gamma_retain.assign(g_gamma_retain.begin(), g_gamma_retain.end());
  sol.g_gamma_forget.assign(g_gamma_forget.begin(), g_gamma_forget.end());
  std::vector<double> d(g_fl.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = g_gamma_retain[i] - config.beta * g_gamma_forget[i];
  }
  const double dnorm = norm(d);
  sol.g_foul.assign(g_fl.begin(), g_fl.end());
  if (dnorm < config.degeneracy_eps) {
    sol.degenerate = true;
    return sol;
  }
  axpy(config.kappa * norm(g_fl) / dnorm, d, sol.g_foul);
  return sol;
}

/// theta_V' = theta_V - eta_g * g_FOUL
inline std::vector<double> apply_unlearn_update(
    std::span<const double> theta_v, std::span<const double> g_foul,
    double eta_g) {
  if (theta_v.size() != g_foul.size()) {
    throw ShapeError("apply_unlearn_update: length mismatch");
  }
  std::vector<double> out(theta_v.begin(), theta_v.end());
  axpy(-eta_g, g_foul, out);
  return out;
}

struct ClientUpdateView {
  int client_id = 0;
  ClientRole role = ClientRole::retain;
  GradView values;
};

struct AngleStats {
  double retain_mean = std::numeric_limits<double>::quiet_NaN();
  double forget_mean = std::numeric_limits<double>::quiet_NaN();
  int retain_count = 0;
  int forget_count = 0;
  int excluded_zero = 0;
  bool degenerate = false;
};

/// Mean cosine between the global direction and each role's updates.
/// Zero-norm updates are excluded (counted); if nothing remains the stats
/// are flagged degenerate.
inline AngleStats gradient_angle_stats(std::span<const double> g_global,
                                       std::vector<ClientUpdateView> updates) {
  std::sort(updates.begin(), updates.end(),
            [](const ClientUpdateView& a, const ClientUpdateView& b) {
              return a.client_id < b.client_id;
            });
  AngleStats stats;
  if (norm(g_global) == 0.0) {
    stats.excluded_zero = static_cast<int>(updates.size());
    stats.degenerate = true;
    return stats;
  }
  double retain_sum = 0.0;
  double forget_sum = 0.0;
  for (const auto& u : updates) {
    if (norm(u.values) == 0.0) {
      ++stats.excluded_zero;
      continue;
    }
    const double c = cosine_similarity(g_global, u.values);
    if (u.role == ClientRole::retain) {
      retain_sum += c;
      ++stats.retain_count;
    } else {
      forget_sum += c;
      ++stats.forget_count;
    }
  }
  if (stats.retain_count > 0) stats.retain_mean = retain_sum / stats.retain_count;
  if (stats.forget_count > 0) stats.forget_mean = forget_sum / stats.forget_count;
  if (stats.retain_count == 0 && stats.forget_count == 0) {
    stats.degenerate = true;
  }
  return stats;
}

}  // namespace foul
