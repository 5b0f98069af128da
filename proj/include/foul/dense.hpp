#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "foul/errors.hpp"
#include "foul/rng.hpp"

namespace foul {

enum class Activation { identity, tanh, relu, softplus };

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::identity:
      return x;
    case Activation::tanh:
      return std::tanh(x);
    case Activation::relu:
      return x > 0.0 ? x : 0.0;
    case Activation::softplus:
      return x > 30.0 ? x : std::log1p(std::exp(x));
  }
  return x;
}

inline double activate_derivative(Activation a, double x) {
  switch (a) {
    case Activation::identity:
      return 1.0;
    case Activation::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::relu:
      return x > 0.0 ? 1.0 : 0.0;
    case Activation::softplus:
      return 1.0 / (1.0 + std::exp(-x));
  }
  return 1.0;
}

/// Fully connected layer, weights stored row-major (out x in).
struct DenseLayer {
  std::size_t in_size = 0;
  std::size_t out_size = 0;
  std::vector<double> weights;  // out * in
  std::vector<double> bias;     // out
  Activation activation = Activation::identity;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out, Activation act)
      : in_size(in),
        out_size(out),
        weights(in * out, 0.0),
        bias(out, 0.0),
        activation(act) {}

  std::size_t param_count() const { return weights.size() + bias.size(); }

  void init_xavier(RngStream& rng) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(in_size + out_size));
    for (double& w : weights) w = (2.0 * rng.next_double() - 1.0) * bound;
    for (double& b : bias) b = 0.0;
  }
};

/// Activation cache for one forward pass; sufficient for backward.
struct DenseCache {
  std::vector<double> input;
  std::vector<double> preactivation;
};

struct DenseGrads {
  std::vector<double> weights;
  std::vector<double> bias;
  std::vector<double> input;
};

inline std::vector<double> dense_forward(const DenseLayer& layer,
                                         std::span<const double> input,
                                         DenseCache* cache = nullptr) {
  if (input.size() != layer.in_size) {
    throw ShapeError("dense_forward: input length " +
                     std::to_string(input.size()) + " != in size " +
                     std::to_string(layer.in_size));
  }
  std::vector<double> pre(layer.out_size);
  for (std::size_t o = 0; o < layer.out_size; ++o) {
    double s = layer.bias[o];
    const double* row = layer.weights.data() + o * layer.in_size;
    for (std::size_t i = 0; i < layer.in_size; ++i) s += row[i] * input[i];
    pre[o] = s;
  }
  std::vector<double> out(layer.out_size);
  for (std::size_t o = 0; o < layer.out_size; ++o) {
    out[o] = activate(layer.activation, pre[o]);
  }
  if (cache != nullptr) {
    cache->input.assign(input.begin(), input.end());
    cache->preactivation = std::move(pre);
  }
  return out;
}

/// Gradients of <output, upstream> with respect to weights, bias and input.
inline DenseGrads dense_backward(const DenseLayer& layer,
                                 const DenseCache& cache,
                                 std::span<const double> upstream) {
  if (cache.input.size() != layer.in_size ||
      cache.preactivation.size() != layer.out_size) {
    throw ShapeError("dense_backward: cache does not match layer");
  }
  if (upstream.size() != layer.out_size) {
    throw ShapeError("dense_backward: upstream length mismatch");
  }
  DenseGrads g;
  g.weights.assign(layer.weights.size(), 0.0);
  g.bias.assign(layer.out_size, 0.0);
  g.input.assign(layer.in_size, 0.0);
  for (std::size_t o = 0; o < layer.out_size; ++o) {
    const double delta =
        upstream[o] * activate_derivative(layer.activation,
                                          cache.preactivation[o]);
    g.bias[o] = delta;
    double* wrow = g.weights.data() + o * layer.in_size;
    const double* row = layer.weights.data() + o * layer.in_size;
    for (std::size_t i = 0; i < layer.in_size; ++i) {
      wrow[i] = delta * cache.input[i];
      g.input[i] += delta * row[i];
    }
  }
  return g;
}

}  // namespace foul
