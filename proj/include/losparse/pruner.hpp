// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "losparse/errors.hpp"
#include "losparse/factorized.hpp"
#include "losparse/matrix.hpp"

namespace losparse {

// One output neuron (a column of one tracked matrix) with its score.
struct NeuronRef {
  std::size_t layer_index = 0;
  std::size_t column_index = 0;
  double score = 0.0;
};

// A canonical retained set: (layer, column) pairs in ascending order.
using RetainedSet = std::vector<std::pair<std::size_t, std::size_t>>;

// Global top-p selection over every tracked neuron at once. Keeps
// k = ceil(p * N) neurons, at least one whenever p > 0. Ties at the cutoff
// are broken toward ascending (layer, column), so selection is a pure
// function of its inputs.
inline RetainedSet select_retained(const std::vector<NeuronRef>& neurons,
                                   double p) {
  if (neurons.empty()) {
    throw EmptyInputError("select_retained: no neurons to rank");
  }
  if (!(p > 0.0) || p > 1.0) {
    throw RangeError("select_retained: fraction must lie in (0, 1], got " +
                     std::to_string(p));
  }
  const double n = static_cast<double>(neurons.size());
  // The tiny slack keeps k = ceil(p*N) faithful to real arithmetic when the
  // double product overshoots an exact integer by rounding.
  double target = std::ceil(p * n - 1e-9 * std::max(1.0, p * n));
  std::size_t k = static_cast<std::size_t>(target);
  if (k < 1) k = 1;
  if (k > neurons.size()) k = neurons.size();

  std::vector<std::size_t> order(neurons.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&neurons](std::size_t a, std::size_t b) {
    const NeuronRef& x = neurons[a];
    const NeuronRef& y = neurons[b];
    if (x.score != y.score) return x.score > y.score;
    if (x.layer_index != y.layer_index) return x.layer_index < y.layer_index;
    return x.column_index < y.column_index;
  });

  RetainedSet kept;
  kept.reserve(k);
  for (std::size_t i = 0; i < k; ++i)
    kept.emplace_back(neurons[order[i]].layer_index,
                      neurons[order[i]].column_index);
  std::sort(kept.begin(), kept.end());
  return kept;
}

// Rewrite one matrix against a retained set: columns whose (position, j)
// pair is in the set stay live with their current values, the rest are
// zeroed exactly and flagged dead in the mask.
inline void enforce_retained_columns(DenseMatrix& m,
                                     std::vector<std::uint8_t>& mask,
                                     const RetainedSet& retained,
                                     std::size_t position) {
  mask.assign(m.cols(), 0);
  for (const auto& [layer, column] : retained)
    if (layer == position) mask[column] = 1;
  for (std::size_t j = 0; j < m.cols(); ++j) {
    if (mask[j]) continue;
    for (std::size_t i = 0; i < m.rows(); ++i) m(i, j) = 0.0;
  }
}

// Enforce a retained set on a stack of factorized layers: retained columns
// stay live with their current values, everything else is zeroed exactly and
// flagged dead. A column absent from the set earlier and present now simply
// comes back (revival is allowed; its entries are whatever the optimizer
// last wrote).
inline void apply_prune(std::vector<FactorizedLayer>& layers,
                        const RetainedSet& retained) {
  for (const auto& [layer, column] : retained) {
    if (layer >= layers.size() || column >= layers[layer].d2()) {
      throw IndexError("apply_prune: reference (" + std::to_string(layer) +
                       ", " + std::to_string(column) + ") out of range");
    }
  }
  for (std::size_t l = 0; l < layers.size(); ++l)
    enforce_retained_columns(layers[l].S, layers[l].live_columns, retained, l);
}

// Dense-baseline pruning step: zero the columns of W outside the top-p set
// of its scores. Selection semantics are exactly select_retained's; returns
// the live-column mask for bookkeeping.
inline std::vector<std::uint8_t> itp_step(DenseMatrix& w,
                                          const std::vector<double>& scores,
                                          double p) {
  if (scores.size() != w.cols()) {
    throw ShapeError("itp_step: " + std::to_string(scores.size()) +
                     " scores for matrix " + w.shape_string());
  }
  std::vector<NeuronRef> neurons(scores.size());
  for (std::size_t j = 0; j < scores.size(); ++j)
    neurons[j] = NeuronRef{0, j, scores[j]};
  const RetainedSet kept = select_retained(neurons, p);
  std::vector<std::uint8_t> mask;
  enforce_retained_columns(w, mask, kept, 0);
  return mask;
}

}  // namespace losparse
