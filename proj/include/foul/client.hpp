#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "foul/datagen.hpp"
#include "foul/errors.hpp"
#include "foul/model.hpp"
#include "foul/param_vector.hpp"
#include "foul/rng.hpp"
#include "foul/training.hpp"

namespace foul {

/// Hyperparameters of the two-phase L2U local training round:
/// i_l2u generator iterations followed by i_mid discriminator iterations.
struct L2UConfig {
  int i_l2u = 3;
  int i_mid = 2;
  double eta_l2u = 1e-2;
  double eta_mid = 1e-2;
  std::size_t batch_size = 64;
  double alpha_rec = 1.0;
  double alpha_iv = 1.0;
  double alpha_v = 1.0;
  double alpha_gtc = 1.0;
  double beta_kl = 0.1;
  bool kl_positive = true;
  double hinge_epsilon = 1e-4;
  bool proto_include_target = true;
  bool stochastic_reconstruction = true;

  void validate() const {
    if (i_l2u < 0 || i_mid < 0 || i_l2u + i_mid < 1) {
      throw ConfigError("L2UConfig: need at least one local iteration");
    }
    if (eta_l2u <= 0.0 || eta_mid <= 0.0) {
      throw ConfigError("L2UConfig: learning rates must be > 0");
    }
    if (batch_size < 1) throw ConfigError("L2UConfig: batch size must be >= 1");
  }

  CompositeWeights generator_weights() const {
    CompositeWeights w;
    w.rec = alpha_rec;
    w.iv = alpha_iv;
    w.v = alpha_v;
    w.gtc = 0.0;
    w.beta_kl = beta_kl;
    w.kl_positive = kl_positive;
    w.hinge_epsilon = hinge_epsilon;
    w.proto_include_target = proto_include_target;
    return w;
  }

  CompositeWeights mid_weights() const {
    CompositeWeights w;
    w.rec = 0.0;
    w.iv = alpha_iv;
    w.v = 0.0;
    w.gtc = alpha_gtc;
    w.beta_kl = beta_kl;
    w.kl_positive = kl_positive;
    w.hinge_epsilon = hinge_epsilon;
    w.proto_include_target = proto_include_target;
    return w;
  }
};

enum class UnlearnLossKind { classification, reconstruction_variance };

struct UnlearnConfig {
  int epochs = 1;
  double eta = 1e-2;
  std::size_t batch_size = 64;
  UnlearnLossKind loss = UnlearnLossKind::classification;
  double beta_kl = 0.1;
  bool kl_positive = true;
  double hinge_epsilon = 1e-4;
  bool stochastic_reconstruction = true;
};

/// One client of the simulated federation. Streams are derived per
/// (client id, round, purpose), so clients can run in any order or in
/// parallel without changing results.
struct ClientState {
  int id = 0;
  int domain_id = 0;
  ClientRole role = ClientRole::retain;
  LabeledDataset train;
  LabeledDataset validation;
  DisentangledModel model;
  std::uint64_t seed = 0;

  /// Counts mini-batch draws from the training shard made by the training
  /// paths; evaluation does not touch it.
  mutable std::uint64_t train_reads = 0;

  RngStream stream(std::uint64_t round, std::string_view purpose) const {
    return RngStream(seed, static_cast<std::uint64_t>(id), round, purpose);
  }

  /// Uniform draw with replacement; a batch covering the shard degenerates
  /// to the full shard in order (fixed full-batch semantics).
  std::vector<std::size_t> sample_batch(RngStream& rng,
                                        std::size_t batch_size) const {
    ++train_reads;
    if (batch_size >= train.size()) {
      std::vector<std::size_t> idx(train.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      return idx;
    }
    std::vector<std::size_t> idx(batch_size);
    for (auto& i : idx) i = rng.next_below(train.size());
    return idx;
  }
};

struct PhaseLossEntry {
  char phase = 'G';  // 'G' generator, 'M' MID
  LossBreakdown breakdown;
  std::size_t samples = 0;
  bool skipped = false;
};

struct LocalTrainTrace {
  std::vector<PhaseLossEntry> entries;
  int degenerate_skips = 0;
  std::size_t generator_samples = 0;
  std::size_t mid_samples = 0;
};

namespace detail {

inline bool batch_supports(const CompositeWeights& w,
                           const LabeledDataset& data,
                           std::span<const std::size_t> idx) {
  std::vector<int> labels;
  labels.reserve(idx.size());
  for (const std::size_t i : idx) labels.push_back(data.labels[i]);
  try {
    check_batch_supports(w, labels, data.num_classes);
  } catch (const DegenerateBatchError&) {
    return false;
  }
  return true;
}

}  // namespace detail

/// One local round of learning-to-unlearn training. The client receives the
/// global model, runs i_l2u generator iterations (reconstruction +
/// disentanglement, updating E/K/V/D) followed by i_mid discriminator
/// iterations (causal prototype + classification, updating E/C).
///
/// A batch that cannot support a required loss is resampled once and then
/// the iteration is skipped (counted in the trace).
inline LocalTrainTrace l2u_local_train(ClientState& state,
                                       const DisentangledModel& global_model,
                                       const L2UConfig& cfg,
                                       std::uint64_t round) {
  cfg.validate();
  if (global_model.dims().input_dim != state.train.feature_dim) {
    throw ShapeError("l2u_local_train: model/data dimension mismatch");
  }
  state.model = global_model;
  LocalTrainTrace trace;
  RngStream batch_rng = state.stream(round, "l2u_batch");
  RngStream noise_rng = state.stream(round, "l2u_noise");

  const auto run_phase = [&](char tag, int iterations,
                             const CompositeWeights& w, double eta,
                             const SegmentSet& trainable,
                             std::size_t& sample_counter) {
    for (int it = 0; it < iterations; ++it) {
      std::vector<std::size_t> idx =
          state.sample_batch(batch_rng, cfg.batch_size);
      if (!detail::batch_supports(w, state.train, idx)) {
        idx = state.sample_batch(batch_rng, cfg.batch_size);
        if (!detail::batch_supports(w, state.train, idx)) {
          PhaseLossEntry entry;
          entry.phase = tag;
          entry.skipped = true;
          trace.entries.push_back(entry);
          ++trace.degenerate_skips;
          continue;
        }
      }
      const bool stochastic = w.rec != 0.0 && cfg.stochastic_reconstruction;
      CompositeResult step = compute_composite_gradient(
          state.model, state.train, idx, w, stochastic,
          stochastic ? &noise_rng : nullptr);
      state.model.apply_update(step.grads, eta, trainable);
      PhaseLossEntry entry;
      entry.phase = tag;
      entry.breakdown = step.breakdown;
      entry.samples = idx.size();
      trace.entries.push_back(entry);
      sample_counter += idx.size();
    }
  };

  run_phase('G', cfg.i_l2u, cfg.generator_weights(), cfg.eta_l2u,
            SegmentSet::generator_phase(), trace.generator_samples);
  run_phase('M', cfg.i_mid, cfg.mid_weights(), cfg.eta_mid,
            SegmentSet::mid_phase(), trace.mid_samples);
  return trace;
}

/// Client id plus the theta_V pseudo-gradient it uploads.
struct LocalUpdate {
  int client_id = 0;
  ParamVector pseudo_gradient;  // single segment "V"
  std::size_t sample_count = 0;
  std::vector<double> loss_trace;
};

/// Unlearning-stage local update: merge the global non-causal encoder, run
/// `epochs` epochs of mini-batch descent on the selected loss with respect
/// to theta_V only, and report g_u = theta_V(before) - theta_V(after),
/// which is aligned with the loss gradient.
inline LocalUpdate unlearn_local_update(ClientState& state,
                                        std::span<const double> global_theta_v,
                                        int epochs, double eta,
                                        const UnlearnConfig& cfg,
                                        std::uint64_t round) {
  if (epochs < 0) throw ConfigError("unlearn_local_update: epochs must be >= 0");
  state.model.insert_subnet("V", global_theta_v);

  CompositeWeights w;
  if (cfg.loss == UnlearnLossKind::classification) {
    if (state.model.dims().mode == ClassifierInputMode::causal_only) {
      throw ConfigError(
          "unlearn_local_update: classification loss has no theta_V gradient "
          "in causal_only mode; use reconstruction_variance");
    }
    w.rec = 0.0;
    w.iv = 0.0;
    w.v = 0.0;
    w.gtc = 1.0;
  } else {
    w.rec = 1.0;
    w.iv = 0.0;
    w.v = 1.0;
    w.gtc = 0.0;
    w.beta_kl = cfg.beta_kl;
    w.kl_positive = cfg.kl_positive;
    w.hinge_epsilon = cfg.hinge_epsilon;
  }

  const std::vector<double> before(global_theta_v.begin(),
                                   global_theta_v.end());
  LocalUpdate update;
  update.client_id = state.id;

  RngStream order_rng = state.stream(round, "unlearn_order");
  RngStream noise_rng = state.stream(round, "unlearn_noise");
  for (int e = 0; e < epochs; ++e) {
    std::vector<std::size_t> order(state.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.shuffle(order.begin(), order.end());
    ++state.train_reads;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start,
                                             end - start);
      if (!detail::batch_supports(w, state.train, idx)) {
        continue;  // cannot happen with sane shards; skip deterministically
      }
      const bool stochastic = w.rec != 0.0 && cfg.stochastic_reconstruction;
      CompositeResult step = compute_composite_gradient(
          state.model, state.train, idx, w, stochastic,
          stochastic ? &noise_rng : nullptr);
      state.model.apply_update(step.grads, eta,
                               SegmentSet::noncausal_only());
      update.loss_trace.push_back(step.breakdown.weighted_total);
      update.sample_count += idx.size();
    }
  }

  const ParamVector after = state.model.extract_subnet("V");
  std::vector<double> g(before.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = before[i] - after.values()[i];
  }
  update.pseudo_gradient = ParamVector::flat("V", std::move(g));
  return update;
}

}  // namespace foul
