#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "foul/errors.hpp"
#include "foul/geometry.hpp"

namespace foul {

/// Per-class batch means of causal representations.
struct Prototypes {
  std::vector<std::vector<double>> mean;  // C vectors
  std::vector<int> count;                 // per class
  std::vector<bool> present;

  int present_count() const {
    int n = 0;
    for (const bool p : present) n += p ? 1 : 0;
    return n;
  }
};

inline Prototypes compute_prototypes(
    const std::vector<std::vector<double>>& z_batch,
    std::span<const int> labels, int num_classes) {
  if (z_batch.empty()) {
    throw DegenerateBatchError("compute_prototypes: empty batch");
  }
  if (z_batch.size() != labels.size()) {
    throw ShapeError("compute_prototypes: labels/batch length mismatch");
  }
  const std::size_t dim = z_batch.front().size();
  Prototypes p;
  p.mean.assign(static_cast<std::size_t>(num_classes),
                std::vector<double>(dim, 0.0));
  p.count.assign(static_cast<std::size_t>(num_classes), 0);
  p.present.assign(static_cast<std::size_t>(num_classes), false);
  for (std::size_t i = 0; i < z_batch.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= num_classes) {
      throw DataError("compute_prototypes: label out of range");
    }
    auto& m = p.mean[static_cast<std::size_t>(y)];
    for (std::size_t j = 0; j < dim; ++j) m[j] += z_batch[i][j];
    ++p.count[static_cast<std::size_t>(y)];
  }
  for (int c = 0; c < num_classes; ++c) {
    const auto cs = static_cast<std::size_t>(c);
    if (p.count[cs] > 0) {
      p.present[cs] = true;
      for (double& v : p.mean[cs]) v /= p.count[cs];
    }
  }
  return p;
}

/// Scalar loss plus its gradient with respect to each batch element.
struct BatchLossGrad {
  double value = 0.0;
  std::vector<std::vector<double>> grads;
};

namespace detail {

// d cos(z, p) / dz with p held constant.
inline void add_cosine_grad(std::span<const double> z,
                            std::span<const double> p, double coeff,
                            std::span<double> out) {
  const double nz = std::max(norm(z), 1e-12);
  const double np = std::max(norm(p), 1e-12);
  const double zp = dot(z, p);
  const double c = zp / (nz * np);
  for (std::size_t j = 0; j < z.size(); ++j) {
    out[j] += coeff * (p[j] / (nz * np) - c * z[j] / (nz * nz));
  }
}

inline double stable_cos(std::span<const double> a,
                         std::span<const double> b) {
  const double na = std::max(norm(a), 1e-12);
  const double nb = std::max(norm(b), 1e-12);
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

}  // namespace detail

/// Prototypical causal loss: per-sample cross-entropy over cosine
/// similarity logits against the batch prototypes, averaged over the batch.
/// Prototypes are treated as constants by the gradient.
///
/// include_target_in_denominator=false selects the literal variant whose
/// softmax denominator skips the target class.
inline BatchLossGrad loss_causal(const std::vector<std::vector<double>>& z,
                                 std::span<const int> labels,
                                 const Prototypes& prototypes,
                                 bool include_target_in_denominator = true) {
  if (z.empty()) throw DegenerateBatchError("loss_causal: empty batch");
  if (z.size() != labels.size()) {
    throw ShapeError("loss_causal: labels/batch length mismatch");
  }
  std::vector<int> classes;
  for (std::size_t c = 0; c < prototypes.present.size(); ++c) {
    if (prototypes.present[c]) classes.push_back(static_cast<int>(c));
  }
  if (classes.size() < 2) {
    throw DegenerateBatchError("loss_causal: fewer than 2 classes in batch");
  }
  const std::size_t dim = z.front().size();
  BatchLossGrad out;
  out.grads.assign(z.size(), std::vector<double>(dim, 0.0));
  const double inv_b = 1.0 / static_cast<double>(z.size());

  for (std::size_t i = 0; i < z.size(); ++i) {
    const int y = labels[i];
    std::vector<double> sims(classes.size());
    double max_sim = -2.0;
    for (std::size_t k = 0; k < classes.size(); ++k) {
      sims[k] = detail::stable_cos(
          z[i], prototypes.mean[static_cast<std::size_t>(classes[k])]);
      if (include_target_in_denominator || classes[k] != y) {
        max_sim = std::max(max_sim, sims[k]);
      }
    }
    double denom = 0.0;
    double target_sim = 0.0;
    bool target_found = false;
    for (std::size_t k = 0; k < classes.size(); ++k) {
      if (classes[k] == y) {
        target_sim = sims[k];
        target_found = true;
      }
      if (include_target_in_denominator || classes[k] != y) {
        denom += std::exp(sims[k] - max_sim);
      }
    }
    if (!target_found) {
      throw DegenerateBatchError(
          "loss_causal: sample label has no prototype");
    }
    const double log_denom = std::log(denom) + max_sim;
    out.value += inv_b * (log_denom - target_sim);

    // d/ds_k of (-s_y + logsumexp over denominator set)
    for (std::size_t k = 0; k < classes.size(); ++k) {
      double ds = 0.0;
      if (include_target_in_denominator || classes[k] != y) {
        ds += std::exp(sims[k] - max_sim) / denom;
      }
      if (classes[k] == y) ds -= 1.0;
      if (ds != 0.0) {
        detail::add_cosine_grad(
            z[i], prototypes.mean[static_cast<std::size_t>(classes[k])],
            inv_b * ds, out.grads[i]);
      }
    }
  }
  return out;
}

/// Hinge-variance non-causal loss:
/// (1/C') sum_c max(0, 1 - sqrt(Var(Z_V^c) + eps)) over classes with at
/// least two samples, Var being the mean squared distance to the class mean.
inline BatchLossGrad loss_noncausal(const std::vector<std::vector<double>>& z,
                                    std::span<const int> labels,
                                    int num_classes, double epsilon) {
  if (z.empty()) throw DegenerateBatchError("loss_noncausal: empty batch");
  if (z.size() != labels.size()) {
    throw ShapeError("loss_noncausal: labels/batch length mismatch");
  }
  const std::size_t dim = z.front().size();
  BatchLossGrad out;
  out.grads.assign(z.size(), std::vector<double>(dim, 0.0));

  std::vector<std::vector<std::size_t>> members(
      static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < z.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= num_classes) {
      throw DataError("loss_noncausal: label out of range");
    }
    members[static_cast<std::size_t>(y)].push_back(i);
  }
  int eligible = 0;
  for (const auto& m : members) eligible += (m.size() >= 2) ? 1 : 0;
  if (eligible == 0) {
    throw DegenerateBatchError("loss_noncausal: no class with >= 2 samples");
  }
  const double inv_c = 1.0 / static_cast<double>(eligible);

  for (const auto& m : members) {
    if (m.size() < 2) continue;
    std::vector<double> mean(dim, 0.0);
    for (const std::size_t i : m) {
      for (std::size_t j = 0; j < dim; ++j) mean[j] += z[i][j];
    }
    for (double& v : mean) v /= static_cast<double>(m.size());
    double var = 0.0;
    for (const std::size_t i : m) {
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = z[i][j] - mean[j];
        var += d * d;
      }
    }
    var /= static_cast<double>(m.size());
    const double spread = std::sqrt(var + epsilon);
    const double hinge = 1.0 - spread;
    if (hinge > 0.0) {
      out.value += inv_c * hinge;
      if (spread > 1e-12) {
        // d hinge / dz_i = -(z_i - mean) / (n * spread)
        const double coeff =
            -inv_c / (static_cast<double>(m.size()) * spread);
        for (const std::size_t i : m) {
          for (std::size_t j = 0; j < dim; ++j) {
            out.grads[i][j] += coeff * (z[i][j] - mean[j]);
          }
        }
      }
    }
  }
  return out;
}

/// Mean softmax cross-entropy over a batch of logits; gradient is
/// (softmax - one_hot) / batch.
inline BatchLossGrad loss_classification(
    const std::vector<std::vector<double>>& logits,
    std::span<const int> labels) {
  if (logits.empty()) {
    throw DegenerateBatchError("loss_classification: empty batch");
  }
  if (logits.size() != labels.size()) {
    throw ShapeError("loss_classification: labels/batch length mismatch");
  }
  const std::size_t c = logits.front().size();
  BatchLossGrad out;
  out.grads.assign(logits.size(), std::vector<double>(c, 0.0));
  const double inv_b = 1.0 / static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw DataError("loss_classification: label out of range");
    }
    const double max_l = *std::max_element(logits[i].begin(), logits[i].end());
    double denom = 0.0;
    for (const double l : logits[i]) denom += std::exp(l - max_l);
    const double log_denom = std::log(denom) + max_l;
    out.value += inv_b * (log_denom - logits[i][static_cast<std::size_t>(y)]);
    for (std::size_t k = 0; k < c; ++k) {
      const double softmax = std::exp(logits[i][k] - max_l) / denom;
      out.grads[i][k] =
          inv_b * (softmax - (static_cast<std::size_t>(y) == k ? 1.0 : 0.0));
    }
  }
  return out;
}

/// Per-sample reconstruction loss pieces: mean squared error over the input
/// dimension plus the closed-form Gaussian KL to N(0, I) over the supplied
/// latent blocks (means/logvars concatenated across blocks).
struct ReconLossGrad {
  double mse = 0.0;
  double kl = 0.0;
  std::vector<double> d_reconstruction;  // of mse only
  std::vector<double> d_mean;            // of kl only
  std::vector<double> d_logvar;          // of kl only
};

inline ReconLossGrad loss_reconstruction(std::span<const double> x,
                                         std::span<const double> x_hat,
                                         std::span<const double> mean,
                                         std::span<const double> logvar) {
  if (x.size() != x_hat.size()) {
    throw ShapeError("loss_reconstruction: x/x_hat length mismatch");
  }
  if (mean.size() != logvar.size()) {
    throw ShapeError("loss_reconstruction: mean/logvar length mismatch");
  }
  if (!all_finite(logvar)) {
    throw NumericError("loss_reconstruction: non-finite logvar");
  }
  ReconLossGrad out;
  out.d_reconstruction.assign(x.size(), 0.0);
  out.d_mean.assign(mean.size(), 0.0);
  out.d_logvar.assign(mean.size(), 0.0);
  const double inv_dim = 1.0 / static_cast<double>(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double d = x_hat[j] - x[j];
    out.mse += inv_dim * d * d;
    out.d_reconstruction[j] = 2.0 * inv_dim * d;
  }
  for (std::size_t j = 0; j < mean.size(); ++j) {
    const double var = std::exp(logvar[j]);
    out.kl += 0.5 * (mean[j] * mean[j] + var - 1.0 - logvar[j]);
    out.d_mean[j] = mean[j];
    out.d_logvar[j] = 0.5 * (var - 1.0);
  }
  return out;
}

/// Reporting record for one optimization step.
struct LossBreakdown {
  double l_k = 0.0;
  double l_v = 0.0;
  double l_gtc = 0.0;
  double l_mse = 0.0;
  double l_kl = 0.0;
  double weighted_total = 0.0;
  double alpha_k = 1.0;
  double alpha_v = 1.0;
  double alpha_gtc = 1.0;
  double beta_kl = 0.1;
};

}  // namespace foul
