#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "foul/datagen.hpp"
#include "foul/errors.hpp"
#include "foul/losses.hpp"
#include "foul/model.hpp"
#include "foul/param_vector.hpp"
#include "foul/rng.hpp"

namespace foul {

/// Weights of the composite local objective
///   rec * (MSE + sign * beta_kl * KL) + iv * L_K + v * L_V + gtc * L_gtc.
/// A weight of zero removes the component (and its preconditions).
struct CompositeWeights {
  double rec = 1.0;
  double iv = 1.0;
  double v = 1.0;
  double gtc = 1.0;
  double beta_kl = 0.1;
  bool kl_positive = true;  // false selects the literal MSE - KL sign
  double hinge_epsilon = 1e-4;
  bool proto_include_target = true;

  double kl_sign() const { return kl_positive ? 1.0 : -1.0; }
};

struct CompositeResult {
  LossBreakdown breakdown;
  ParamVector grads;
  Prototypes prototypes;
  std::vector<DisentangledModel::Noise> noises;  // one per sample
};

namespace detail {

inline void check_batch_supports(const CompositeWeights& w,
                                 std::span<const int> labels,
                                 int num_classes) {
  if (w.iv != 0.0) {
    std::vector<bool> seen(static_cast<std::size_t>(num_classes), false);
    int distinct = 0;
    for (const int y : labels) {
      if (!seen[static_cast<std::size_t>(y)]) {
        seen[static_cast<std::size_t>(y)] = true;
        ++distinct;
      }
    }
    if (distinct < 2) {
      throw DegenerateBatchError("composite: L_K needs >= 2 classes in batch");
    }
  }
  if (w.v != 0.0) {
    std::vector<int> count(static_cast<std::size_t>(num_classes), 0);
    bool ok = false;
    for (const int y : labels) {
      if (++count[static_cast<std::size_t>(y)] >= 2) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw DegenerateBatchError(
          "composite: L_V needs a class with >= 2 samples");
    }
  }
}

struct BatchForward {
  std::vector<ForwardTrace> traces;
  std::vector<LatentOutputs> outs;
  std::vector<std::vector<double>> z_k_means, z_v_means, logits;
  std::vector<int> labels;
  std::vector<DisentangledModel::Noise> noises;
};

inline BatchForward forward_batch(
    const DisentangledModel& model, const LabeledDataset& data,
    std::span<const std::size_t> indices, bool stochastic, RngStream* rng,
    const std::vector<DisentangledModel::Noise>* fixed_noises,
    bool want_traces) {
  if (fixed_noises != nullptr && fixed_noises->size() != indices.size()) {
    throw ShapeError("forward_batch: fixed noise count mismatch");
  }
  BatchForward b;
  b.traces.resize(want_traces ? indices.size() : 0);
  b.outs.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    DisentangledModel::Noise noise;
    const DisentangledModel::Noise* noise_ptr = nullptr;
    if (fixed_noises != nullptr) {
      noise_ptr = &(*fixed_noises)[i];
    } else if (stochastic) {
      if (rng == nullptr) {
        throw NumericError("forward_batch: stochastic pass needs a stream");
      }
      noise = model.draw_noise(*rng);
      noise_ptr = &noise;
    }
    LatentOutputs out =
        model.forward(data.inputs[indices[i]],
                      want_traces ? &b.traces[i] : nullptr, noise_ptr);
    b.noises.push_back(noise_ptr != nullptr
                           ? *noise_ptr
                           : DisentangledModel::Noise{
                                 std::vector<double>(out.eps_k.size(), 0.0),
                                 std::vector<double>(out.eps_v.size(), 0.0)});
    b.z_k_means.push_back(out.z_k_mean);
    b.z_v_means.push_back(out.z_v_mean);
    b.logits.push_back(out.logits);
    b.labels.push_back(data.labels[indices[i]]);
    b.outs.push_back(std::move(out));
  }
  return b;
}

}  // namespace detail

/// Evaluates the composite loss and its full parameter gradient on one
/// mini-batch. Prototypes are estimated from the batch (or taken from
/// fixed_prototypes) and treated as constants by the gradient; reparameterized
/// noise comes from rng when stochastic (or from fixed_noises).
inline CompositeResult compute_composite_gradient(
    const DisentangledModel& model, const LabeledDataset& data,
    std::span<const std::size_t> indices, const CompositeWeights& w,
    bool stochastic = false, RngStream* rng = nullptr,
    const std::vector<DisentangledModel::Noise>* fixed_noises = nullptr,
    const Prototypes* fixed_prototypes = nullptr) {
  if (indices.empty()) {
    throw DegenerateBatchError("compute_composite_gradient: empty batch");
  }
  detail::BatchForward batch = detail::forward_batch(
      model, data, indices, stochastic, rng, fixed_noises, true);
  detail::check_batch_supports(w, batch.labels, data.num_classes);

  const std::size_t n = indices.size();
  const std::size_t dk = model.dims().causal_latent;
  const std::size_t dv = model.dims().noncausal_latent;
  const double inv_n = 1.0 / static_cast<double>(n);

  CompositeResult result;
  result.grads = model.zero_grads();
  result.noises = batch.noises;
  result.breakdown.alpha_k = w.iv;
  result.breakdown.alpha_v = w.v;
  result.breakdown.alpha_gtc = w.gtc;
  result.breakdown.beta_kl = w.beta_kl;

  std::vector<LatentGrads> latent(n);

  if (w.iv != 0.0) {
    result.prototypes =
        fixed_prototypes != nullptr
            ? *fixed_prototypes
            : compute_prototypes(batch.z_k_means, batch.labels,
                                 data.num_classes);
    BatchLossGrad lk = loss_causal(batch.z_k_means, batch.labels,
                                   result.prototypes,
                                   w.proto_include_target);
    result.breakdown.l_k = lk.value;
    for (std::size_t i = 0; i < n; ++i) {
      latent[i].d_z_k_mean.assign(dk, 0.0);
      axpy(w.iv, lk.grads[i], latent[i].d_z_k_mean);
    }
  }

  if (w.v != 0.0) {
    BatchLossGrad lv = loss_noncausal(batch.z_v_means, batch.labels,
                                      data.num_classes, w.hinge_epsilon);
    result.breakdown.l_v = lv.value;
    for (std::size_t i = 0; i < n; ++i) {
      if (latent[i].d_z_v_mean.empty()) latent[i].d_z_v_mean.assign(dv, 0.0);
      axpy(w.v, lv.grads[i], latent[i].d_z_v_mean);
    }
  }

  if (w.gtc != 0.0) {
    BatchLossGrad lg = loss_classification(batch.logits, batch.labels);
    result.breakdown.l_gtc = lg.value;
    for (std::size_t i = 0; i < n; ++i) {
      latent[i].d_logits.assign(lg.grads[i].size(), 0.0);
      axpy(w.gtc, lg.grads[i], latent[i].d_logits);
    }
  }

  if (w.rec != 0.0) {
    const double kl_coeff = w.rec * w.beta_kl * w.kl_sign() * inv_n;
    for (std::size_t i = 0; i < n; ++i) {
      const LatentOutputs& out = batch.outs[i];
      std::vector<double> mean = out.z_k_mean;
      mean.insert(mean.end(), out.z_v_mean.begin(), out.z_v_mean.end());
      std::vector<double> logvar = out.z_k_logvar;
      logvar.insert(logvar.end(), out.z_v_logvar.begin(),
                    out.z_v_logvar.end());
      ReconLossGrad rec = loss_reconstruction(
          data.inputs[indices[i]], out.reconstruction, mean, logvar);
      result.breakdown.l_mse += inv_n * rec.mse;
      result.breakdown.l_kl += inv_n * rec.kl;

      latent[i].d_reconstruction.assign(rec.d_reconstruction.size(), 0.0);
      axpy(w.rec * inv_n, rec.d_reconstruction, latent[i].d_reconstruction);
      if (latent[i].d_z_k_mean.empty()) latent[i].d_z_k_mean.assign(dk, 0.0);
      if (latent[i].d_z_v_mean.empty()) latent[i].d_z_v_mean.assign(dv, 0.0);
      latent[i].d_z_k_logvar.assign(dk, 0.0);
      latent[i].d_z_v_logvar.assign(dv, 0.0);
      for (std::size_t j = 0; j < dk; ++j) {
        latent[i].d_z_k_mean[j] += kl_coeff * rec.d_mean[j];
        latent[i].d_z_k_logvar[j] += kl_coeff * rec.d_logvar[j];
      }
      for (std::size_t j = 0; j < dv; ++j) {
        latent[i].d_z_v_mean[j] += kl_coeff * rec.d_mean[dk + j];
        latent[i].d_z_v_logvar[j] += kl_coeff * rec.d_logvar[dk + j];
      }
    }
  }

  result.breakdown.weighted_total =
      w.rec * (result.breakdown.l_mse +
               w.kl_sign() * w.beta_kl * result.breakdown.l_kl) +
      w.iv * result.breakdown.l_k + w.v * result.breakdown.l_v +
      w.gtc * result.breakdown.l_gtc;

  for (std::size_t i = 0; i < n; ++i) {
    model.backward(batch.traces[i], batch.outs[i], latent[i], result.grads);
  }
  return result;
}

/// Value-only twin of compute_composite_gradient with prototypes and noise
/// pinned, so central differences probe exactly the function whose gradient
/// the step uses.
inline double compute_composite_loss(
    const DisentangledModel& model, const LabeledDataset& data,
    std::span<const std::size_t> indices, const CompositeWeights& w,
    const std::vector<DisentangledModel::Noise>& fixed_noises,
    const Prototypes& fixed_prototypes) {
  detail::BatchForward batch = detail::forward_batch(
      model, data, indices, true, nullptr, &fixed_noises, false);
  const std::size_t n = indices.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  if (w.iv != 0.0) {
    total += w.iv * loss_causal(batch.z_k_means, batch.labels,
                                fixed_prototypes, w.proto_include_target)
                        .value;
  }
  if (w.v != 0.0) {
    total += w.v * loss_noncausal(batch.z_v_means, batch.labels,
                                  data.num_classes, w.hinge_epsilon)
                       .value;
  }
  if (w.gtc != 0.0) {
    total += w.gtc * loss_classification(batch.logits, batch.labels).value;
  }
  if (w.rec != 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      const LatentOutputs& out = batch.outs[i];
      std::vector<double> mean = out.z_k_mean;
      mean.insert(mean.end(), out.z_v_mean.begin(), out.z_v_mean.end());
      std::vector<double> logvar = out.z_k_logvar;
      logvar.insert(logvar.end(), out.z_v_logvar.begin(),
                    out.z_v_logvar.end());
      const ReconLossGrad rec = loss_reconstruction(
          data.inputs[indices[i]], out.reconstruction, mean, logvar);
      total += w.rec * inv_n *
               (rec.mse + w.kl_sign() * w.beta_kl * rec.kl);
    }
  }
  return total;
}

}  // namespace foul
