// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "losparse/errors.hpp"
#include "losparse/factorized.hpp"
#include "losparse/matrix.hpp"
#include "losparse/rng.hpp"

namespace losparse {

enum class LayerKind { kDense, kFactorized };

// One linear layer of the toy model, either a plain dense matrix (baseline
// modes) or a factorized low-rank-plus-sparse stack. Dense layers carry a
// live-column mask so the iterative-pruning baseline can do the same
// bookkeeping the factorized path gets from its sparse matrix.
struct ModelLayer {
  LayerKind kind = LayerKind::kDense;
  DenseMatrix weight;                       // dense layers
  std::vector<std::uint8_t> weight_live;    // dense live flags, d2 entries
  FactorizedLayer factors;                  // factorized layers
  std::vector<double> bias;                 // d2 entries

  std::size_t in_dim() const {
    return kind == LayerKind::kDense ? weight.rows() : factors.d1();
  }
  std::size_t out_dim() const {
    return kind == LayerKind::kDense ? weight.cols() : factors.d2();
  }
  std::size_t live_count() const {
    if (kind == LayerKind::kFactorized) return factors.live_count();
    std::size_t n = 0;
    for (std::uint8_t f : weight_live) n += (f != 0);
    return n;
  }
};

// Feed-forward stack with tanh between layers and a linear final layer;
// mildly nonconvex so pruning decisions actually matter, small enough that
// whole training runs live in a unit test.
struct ToyModel {
  std::vector<ModelLayer> layers;

  std::size_t d_in() const { return layers.front().in_dim(); }
  std::size_t d_out() const { return layers.back().out_dim(); }
};

struct ForwardCache {
  std::vector<DenseMatrix> inputs;  // activation entering each layer
  DenseMatrix output;
};

struct LayerGradients {
  DenseMatrix dW;            // dense layers
  FactorizedGradients fg;    // factorized layers
  std::vector<double> dbias;
};

// Fresh dense model: weights at 1/sqrt(fan-in) scale, zero biases. The dims
// chain lists layer interface widths, so {64, 32, 8} is two layers.
inline ToyModel random_dense_model(const std::vector<std::size_t>& dims,
                                   Rng& rng) {
  if (dims.size() < 2) {
    throw ConfigError("random_dense_model: dims chain needs at least two entries");
  }
  ToyModel m;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    if (dims[l] == 0 || dims[l + 1] == 0) {
      throw ConfigError("random_dense_model: zero width in dims chain");
    }
    ModelLayer layer;
    layer.kind = LayerKind::kDense;
    layer.weight = DenseMatrix(dims[l], dims[l + 1]);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    for (std::size_t i = 0; i < layer.weight.size(); ++i)
      layer.weight.data()[i] = scale * rng.gaussian();
    layer.weight_live.assign(dims[l + 1], 1);
    layer.bias.assign(dims[l + 1], 0.0);
    m.layers.push_back(std::move(layer));
  }
  return m;
}

namespace detail {

inline DenseMatrix layer_affine(const ModelLayer& layer, const DenseMatrix& x) {
  DenseMatrix z = layer.kind == LayerKind::kDense ? matmul(x, layer.weight)
                                                  : forward(layer.factors, x);
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) += layer.bias[j];
  return z;
}

}  // namespace detail

inline DenseMatrix forward_model(const ToyModel& model, const DenseMatrix& x,
                                 ForwardCache* cache = nullptr) {
  if (model.layers.empty()) {
    throw EmptyInputError("forward_model: model has no layers");
  }
  if (cache) {
    cache->inputs.clear();
    cache->inputs.reserve(model.layers.size());
  }
  DenseMatrix a = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    if (cache) cache->inputs.push_back(a);
    DenseMatrix z = detail::layer_affine(model.layers[l], a);
    if (l + 1 < model.layers.size()) {
      for (std::size_t i = 0; i < z.size(); ++i)
        z.data()[i] = std::tanh(z.data()[i]);
    }
    a = std::move(z);
  }
  if (cache) cache->output = a;
  return a;
}

// Reverse sweep for upstream gradient dY at the (linear) output. Uses the
// cached layer inputs; tanh' is recovered from the activations themselves
// (dtanh = 1 - a^2).
inline std::vector<LayerGradients> backward_model(const ToyModel& model,
                                                  const ForwardCache& cache,
                                                  const DenseMatrix& dy) {
  const std::size_t depth = model.layers.size();
  if (cache.inputs.size() != depth) {
    throw ShapeError("backward_model: cache depth " +
                     std::to_string(cache.inputs.size()) + " vs model depth " +
                     std::to_string(depth));
  }
  std::vector<LayerGradients> grads(depth);
  DenseMatrix dz = dy;
  for (std::size_t l = depth; l-- > 0;) {
    const ModelLayer& layer = model.layers[l];
    const DenseMatrix& x = cache.inputs[l];

    grads[l].dbias.assign(layer.out_dim(), 0.0);
    for (std::size_t i = 0; i < dz.rows(); ++i)
      for (std::size_t j = 0; j < dz.cols(); ++j)
        grads[l].dbias[j] += dz(i, j);

    DenseMatrix dx;
    if (layer.kind == LayerKind::kDense) {
      grads[l].dW = matmul(transpose(x), dz);
      dx = matmul(dz, transpose(layer.weight));
    } else {
      grads[l].fg = backward(layer.factors, x, dz);
      dx = std::move(grads[l].fg.dX);
    }

    if (l > 0) {
      // x is the tanh output of the previous layer.
      dz = std::move(dx);
      for (std::size_t i = 0; i < dz.size(); ++i)
        dz.data()[i] *= 1.0 - x.data()[i] * x.data()[i];
    }
  }
  return grads;
}

// Kept weight parameters over original weight parameters (biases excluded):
// factorized layers keep r*(d1+d2) plus d1 per live column, dense layers
// keep d1 per live column.
inline double model_remaining_ratio(const ToyModel& model) {
  if (model.layers.empty()) {
    throw EmptyInputError("model_remaining_ratio: model has no layers");
  }
  double kept = 0.0, original = 0.0;
  for (const ModelLayer& layer : model.layers) {
    const double d1 = static_cast<double>(layer.in_dim());
    const double d2 = static_cast<double>(layer.out_dim());
    original += d1 * d2;
    if (layer.kind == LayerKind::kFactorized)
      kept += static_cast<double>(layer.factors.rank) * (d1 + d2);
    kept += d1 * static_cast<double>(layer.live_count());
  }
  return kept / original;
}

inline std::vector<std::size_t> live_column_counts(const ToyModel& model) {
  std::vector<std::size_t> counts;
  counts.reserve(model.layers.size());
  for (const ModelLayer& layer : model.layers) counts.push_back(layer.live_count());
  return counts;
}

}  // namespace losparse
