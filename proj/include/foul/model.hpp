#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "foul/dense.hpp"
#include "foul/errors.hpp"
#include "foul/param_vector.hpp"
#include "foul/rng.hpp"

namespace foul {

enum class ClassifierInputMode { causal_only, concat };

inline const char* to_string(ClassifierInputMode m) {
  return m == ClassifierInputMode::causal_only ? "causal_only" : "concat";
}

struct ModelDims {
  std::size_t input_dim = 8;
  std::size_t hidden_dim = 32;
  std::size_t causal_latent = 16;     // d_K
  std::size_t noncausal_latent = 8;   // d_V
  int num_classes = 4;
  ClassifierInputMode mode = ClassifierInputMode::concat;

  std::size_t classifier_input_dim() const {
    return mode == ClassifierInputMode::causal_only
               ? causal_latent
               : causal_latent + noncausal_latent;
  }

  void validate() const {
    if (input_dim < 1 || hidden_dim < 1 || causal_latent < 1 ||
        noncausal_latent < 1 || num_classes < 2) {
      throw ConfigError("ModelDims: invalid dimensions");
    }
  }
};

/// Everything one forward pass produces at the latent level. The recorded
/// noise makes a stochastic pass exactly reproducible.
struct LatentOutputs {
  std::vector<double> z_k_mean, z_k_logvar;
  std::vector<double> z_v_mean, z_v_logvar;
  std::vector<double> z_k_sample, z_v_sample;
  std::vector<double> reconstruction;
  std::vector<double> logits;
  std::vector<double> eps_k, eps_v;
};

/// Layer caches plus log-variance clamp masks; consumed by backward().
struct ForwardTrace {
  std::vector<DenseCache> extractor, causal, noncausal, decoder, classifier;
  std::vector<double> k_logvar_mask, v_logvar_mask;
};

/// Gradients of a scalar loss with respect to the latent-level outputs.
/// Empty vectors mean zero.
struct LatentGrads {
  std::vector<double> d_logits;
  std::vector<double> d_z_k_mean, d_z_k_logvar;
  std::vector<double> d_z_v_mean, d_z_v_logvar;
  std::vector<double> d_reconstruction;
};

struct SegmentSet {
  bool extractor = false;
  bool causal = false;
  bool noncausal = false;
  bool decoder = false;
  bool classifier = false;

  static SegmentSet all() { return {true, true, true, true, true}; }
  static SegmentSet generator_phase() { return {true, true, true, true, false}; }
  static SegmentSet mid_phase() { return {true, false, false, false, true}; }
  static SegmentSet noncausal_only() { return {false, false, true, false, false}; }
};

/// Five-part disentangled model: shallow extractor (E), causal featurizer
/// (K), non-causal featurizer (V), decoder (D) and classifier (C). Both
/// featurizers emit a Gaussian (mean, log-variance) over their latent block.
class DisentangledModel {
 public:
  static constexpr double kLogVarBound = 8.0;
  static constexpr const char* kSegmentNames[5] = {"E", "K", "V", "D", "C"};

  DisentangledModel() = default;

  explicit DisentangledModel(const ModelDims& dims) : dims_(dims) {
    dims.validate();
    extractor_ = {DenseLayer(dims.input_dim, dims.hidden_dim,
                             Activation::tanh)};
    causal_ = {DenseLayer(dims.hidden_dim, 2 * dims.causal_latent,
                          Activation::identity)};
    noncausal_ = {DenseLayer(dims.hidden_dim, 2 * dims.noncausal_latent,
                             Activation::identity)};
    decoder_ = {DenseLayer(dims.causal_latent + dims.noncausal_latent,
                           dims.hidden_dim, Activation::tanh),
                DenseLayer(dims.hidden_dim, dims.input_dim,
                           Activation::identity)};
    classifier_ = {DenseLayer(dims.classifier_input_dim(),
                              static_cast<std::size_t>(dims.num_classes),
                              Activation::identity)};
  }

  static DisentangledModel random_init(const ModelDims& dims,
                                       RngStream& rng) {
    DisentangledModel m(dims);
    for (auto* stack : m.stacks()) {
      for (auto& layer : *stack) layer.init_xavier(rng);
    }
    return m;
  }

  const ModelDims& dims() const { return dims_; }

  struct Noise {
    std::vector<double> eps_k, eps_v;
  };

  Noise draw_noise(RngStream& rng) const {
    Noise n;
    n.eps_k.resize(dims_.causal_latent);
    n.eps_v.resize(dims_.noncausal_latent);
    for (double& e : n.eps_k) e = rng.next_normal();
    for (double& e : n.eps_v) e = rng.next_normal();
    return n;
  }

  /// Forward pass. noise == nullptr takes the deterministic path (samples
  /// equal means). A trace is only filled when requested.
  LatentOutputs forward(std::span<const double> x, ForwardTrace* trace,
                        const Noise* noise = nullptr) const {
    if (x.size() != dims_.input_dim) {
      throw ShapeError("DisentangledModel::forward: input length mismatch");
    }
    LatentOutputs out;
    const std::vector<double> h =
        run_stack(extractor_, x, trace ? &trace->extractor : nullptr);

    const std::vector<double> k_raw =
        run_stack(causal_, h, trace ? &trace->causal : nullptr);
    split_gaussian(k_raw, dims_.causal_latent, out.z_k_mean, out.z_k_logvar,
                   trace ? &trace->k_logvar_mask : nullptr);
    const std::vector<double> v_raw =
        run_stack(noncausal_, h, trace ? &trace->noncausal : nullptr);
    split_gaussian(v_raw, dims_.noncausal_latent, out.z_v_mean,
                   out.z_v_logvar, trace ? &trace->v_logvar_mask : nullptr);

    out.eps_k.assign(dims_.causal_latent, 0.0);
    out.eps_v.assign(dims_.noncausal_latent, 0.0);
    if (noise != nullptr) {
      if (noise->eps_k.size() != dims_.causal_latent ||
          noise->eps_v.size() != dims_.noncausal_latent) {
        throw ShapeError("DisentangledModel::forward: noise length mismatch");
      }
      out.eps_k = noise->eps_k;
      out.eps_v = noise->eps_v;
    }
    out.z_k_sample = reparameterize(out.z_k_mean, out.z_k_logvar, out.eps_k);
    out.z_v_sample = reparameterize(out.z_v_mean, out.z_v_logvar, out.eps_v);

    std::vector<double> dec_in = out.z_k_sample;
    dec_in.insert(dec_in.end(), out.z_v_sample.begin(), out.z_v_sample.end());
    out.reconstruction =
        run_stack(decoder_, dec_in, trace ? &trace->decoder : nullptr);

    std::vector<double> clf_in = out.z_k_mean;
    if (dims_.mode == ClassifierInputMode::concat) {
      clf_in.insert(clf_in.end(), out.z_v_mean.begin(), out.z_v_mean.end());
    }
    out.logits =
        run_stack(classifier_, clf_in, trace ? &trace->classifier : nullptr);
    return out;
  }

  /// Accumulates parameter gradients of a scalar loss into `grads`
  /// (layout of to_params()), given the loss gradients at the latent level.
  void backward(const ForwardTrace& trace, const LatentOutputs& outputs,
                const LatentGrads& latent, ParamVector& grads) const {
    const std::size_t dk = dims_.causal_latent;
    const std::size_t dv = dims_.noncausal_latent;
    std::vector<double> d_k_mean = sized_or_zero(latent.d_z_k_mean, dk);
    std::vector<double> d_k_logvar = sized_or_zero(latent.d_z_k_logvar, dk);
    std::vector<double> d_v_mean = sized_or_zero(latent.d_z_v_mean, dv);
    std::vector<double> d_v_logvar = sized_or_zero(latent.d_z_v_logvar, dv);

    // Decoder path: reconstruction -> (z samples) -> means/logvars.
    if (!latent.d_reconstruction.empty()) {
      const std::vector<double> d_dec_in = backward_stack(
          decoder_, trace.decoder, latent.d_reconstruction,
          grads.segment("D"));
      for (std::size_t j = 0; j < dk; ++j) {
        d_k_mean[j] += d_dec_in[j];
        d_k_logvar[j] += d_dec_in[j] * 0.5 *
                         std::exp(0.5 * outputs.z_k_logvar[j]) *
                         outputs.eps_k[j];
      }
      for (std::size_t j = 0; j < dv; ++j) {
        d_v_mean[j] += d_dec_in[dk + j];
        d_v_logvar[j] += d_dec_in[dk + j] * 0.5 *
                         std::exp(0.5 * outputs.z_v_logvar[j]) *
                         outputs.eps_v[j];
      }
    }

    // Classifier path feeds the latent means.
    if (!latent.d_logits.empty()) {
      const std::vector<double> d_clf_in = backward_stack(
          classifier_, trace.classifier, latent.d_logits, grads.segment("C"));
      for (std::size_t j = 0; j < dk; ++j) d_k_mean[j] += d_clf_in[j];
      if (dims_.mode == ClassifierInputMode::concat) {
        for (std::size_t j = 0; j < dv; ++j) {
          d_v_mean[j] += d_clf_in[dk + j];
        }
      }
    }

    // Featurizers; log-variance gradients pass through the clamp mask.
    std::vector<double> d_k_raw(2 * dk);
    for (std::size_t j = 0; j < dk; ++j) {
      d_k_raw[j] = d_k_mean[j];
      d_k_raw[dk + j] = d_k_logvar[j] * trace.k_logvar_mask[j];
    }
    std::vector<double> d_h =
        backward_stack(causal_, trace.causal, d_k_raw, grads.segment("K"));

    std::vector<double> d_v_raw(2 * dv);
    for (std::size_t j = 0; j < dv; ++j) {
      d_v_raw[j] = d_v_mean[j];
      d_v_raw[dv + j] = d_v_logvar[j] * trace.v_logvar_mask[j];
    }
    const std::vector<double> d_h_v = backward_stack(
        noncausal_, trace.noncausal, d_v_raw, grads.segment("V"));
    for (std::size_t j = 0; j < d_h.size(); ++j) d_h[j] += d_h_v[j];

    backward_stack(extractor_, trace.extractor, d_h, grads.segment("E"));
  }

  ParamVector to_params() const {
    ParamVector p;
    for (std::size_t s = 0; s < 5; ++s) {
      std::vector<double> vals;
      for (const auto& layer : *stacks()[s]) {
        vals.insert(vals.end(), layer.weights.begin(), layer.weights.end());
        vals.insert(vals.end(), layer.bias.begin(), layer.bias.end());
      }
      p.append_segment(kSegmentNames[s], std::move(vals));
    }
    return p;
  }

  void from_params(const ParamVector& p) {
    for (std::size_t s = 0; s < 5; ++s) {
      insert_subnet(kSegmentNames[s], p.segment(kSegmentNames[s]));
    }
  }

  ParamVector zero_grads() const { return to_params().zeros_like(); }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto* stack : stacks()) {
      for (const auto& layer : *stack) n += layer.param_count();
    }
    return n;
  }

  std::size_t segment_size(std::string_view name) const {
    std::size_t n = 0;
    for (const auto& layer : stack_for(name)) n += layer.param_count();
    return n;
  }

  /// Flat copy of one sub-network's parameters.
  ParamVector extract_subnet(std::string_view name) const {
    std::vector<double> vals;
    for (const auto& layer : stack_for(name)) {
      vals.insert(vals.end(), layer.weights.begin(), layer.weights.end());
      vals.insert(vals.end(), layer.bias.begin(), layer.bias.end());
    }
    return ParamVector::flat(std::string(name), std::move(vals));
  }

  /// Overwrites one sub-network's parameters; nothing else changes.
  void insert_subnet(std::string_view name, std::span<const double> values) {
    auto& stack = stack_for(name);
    std::size_t expected = 0;
    for (const auto& layer : stack) expected += layer.param_count();
    if (values.size() != expected) {
      throw ShapeError("insert_subnet: segment '" + std::string(name) +
                       "' expects " + std::to_string(expected) + " values");
    }
    std::size_t cursor = 0;
    for (auto& layer : stack) {
      for (double& w : layer.weights) w = values[cursor++];
      for (double& b : layer.bias) b = values[cursor++];
    }
  }

  void insert_subnet(std::string_view name, const ParamVector& params) {
    insert_subnet(name, params.span());
  }

  /// theta_seg -= lr * grad_seg for every selected segment.
  void apply_update(const ParamVector& grads, double lr,
                    const SegmentSet& which) {
    const bool sel[5] = {which.extractor, which.causal, which.noncausal,
                         which.decoder, which.classifier};
    for (std::size_t s = 0; s < 5; ++s) {
      if (!sel[s]) continue;
      const auto g = grads.segment(kSegmentNames[s]);
      std::size_t cursor = 0;
      for (auto& layer : *stacks()[s]) {
        for (double& w : layer.weights) w -= lr * g[cursor++];
        for (double& b : layer.bias) b -= lr * g[cursor++];
      }
    }
  }

  const std::vector<DenseLayer>& stack(std::string_view name) const {
    return stack_for(name);
  }

 private:
  std::array<const std::vector<DenseLayer>*, 5> stacks() const {
    return {&extractor_, &causal_, &noncausal_, &decoder_, &classifier_};
  }
  std::array<std::vector<DenseLayer>*, 5> stacks() {
    return {&extractor_, &causal_, &noncausal_, &decoder_, &classifier_};
  }

  const std::vector<DenseLayer>& stack_for(std::string_view name) const {
    if (name == "E") return extractor_;
    if (name == "K") return causal_;
    if (name == "V") return noncausal_;
    if (name == "D") return decoder_;
    if (name == "C") return classifier_;
    throw LookupError("DisentangledModel: unknown segment '" +
                      std::string(name) + "'");
  }
  std::vector<DenseLayer>& stack_for(std::string_view name) {
    return const_cast<std::vector<DenseLayer>&>(
        static_cast<const DisentangledModel*>(this)->stack_for(name));
  }

  static std::vector<double> run_stack(const std::vector<DenseLayer>& stack,
                                       std::span<const double> x,
                                       std::vector<DenseCache>* caches) {
    std::vector<double> cur(x.begin(), x.end());
    if (caches != nullptr) caches->resize(stack.size());
    for (std::size_t i = 0; i < stack.size(); ++i) {
      cur = dense_forward(stack[i], cur,
                          caches ? &(*caches)[i] : nullptr);
    }
    return cur;
  }

  /// Walks the stack in reverse, adding parameter gradients into the
  /// segment span (layer order: weights then bias), returns d_input.
  static std::vector<double> backward_stack(
      const std::vector<DenseLayer>& stack,
      const std::vector<DenseCache>& caches, std::span<const double> upstream,
      std::span<double> grad_segment) {
    if (caches.size() != stack.size()) {
      throw ShapeError("backward_stack: trace does not match stack");
    }
    std::vector<std::size_t> offsets(stack.size());
    std::size_t total = 0;
    for (std::size_t i = 0; i < stack.size(); ++i) {
      offsets[i] = total;
      total += stack[i].param_count();
    }
    if (grad_segment.size() != total) {
      throw ShapeError("backward_stack: gradient segment length mismatch");
    }
    std::vector<double> d(upstream.begin(), upstream.end());
    for (std::size_t i = stack.size(); i-- > 0;) {
      DenseGrads g = dense_backward(stack[i], caches[i], d);
      double* out = grad_segment.data() + offsets[i];
      for (std::size_t j = 0; j < g.weights.size(); ++j) out[j] += g.weights[j];
      out += g.weights.size();
      for (std::size_t j = 0; j < g.bias.size(); ++j) out[j] += g.bias[j];
      d = std::move(g.input);
    }
    return d;
  }

  static void split_gaussian(const std::vector<double>& raw, std::size_t dim,
                             std::vector<double>& mean,
                             std::vector<double>& logvar,
                             std::vector<double>* mask) {
    mean.assign(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(dim));
    logvar.resize(dim);
    if (mask != nullptr) mask->assign(dim, 1.0);
    for (std::size_t j = 0; j < dim; ++j) {
      const double raw_lv = raw[dim + j];
      if (raw_lv > kLogVarBound) {
        logvar[j] = kLogVarBound;
        if (mask != nullptr) (*mask)[j] = 0.0;
      } else if (raw_lv < -kLogVarBound) {
        logvar[j] = -kLogVarBound;
        if (mask != nullptr) (*mask)[j] = 0.0;
      } else {
        logvar[j] = raw_lv;
      }
    }
  }

  static std::vector<double> reparameterize(const std::vector<double>& mean,
                                            const std::vector<double>& logvar,
                                            const std::vector<double>& eps) {
    std::vector<double> z(mean.size());
    for (std::size_t j = 0; j < mean.size(); ++j) {
      z[j] = mean[j] + std::exp(0.5 * logvar[j]) * eps[j];
    }
    return z;
  }

  static std::vector<double> sized_or_zero(const std::vector<double>& v,
                                           std::size_t n) {
    if (v.empty()) return std::vector<double>(n, 0.0);
    if (v.size() != n) throw ShapeError("latent gradient length mismatch");
    return v;
  }

  ModelDims dims_;
  std::vector<DenseLayer> extractor_, causal_, noncausal_, decoder_,
      classifier_;
};

}  // namespace foul
