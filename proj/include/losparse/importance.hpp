// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "losparse/errors.hpp"
#include "losparse/matrix.hpp"

namespace losparse {

// Exponentially smoothed sensitivity for one tracked matrix. Entries mirror
// the matrix shape; step_count distinguishes the cold start from a running
// average.
struct ImportanceState {
  DenseMatrix smoothed;
  std::size_t step_count = 0;
};

// Instant sensitivity |w * dL/dw|: the first-order loss change from zeroing
// each entry on its own.
inline DenseMatrix instant_sensitivity(const DenseMatrix& weights,
                                       const DenseMatrix& grads) {
  if (weights.rows() != grads.rows() || weights.cols() != grads.cols()) {
    throw ShapeError("instant_sensitivity: weights " + weights.shape_string() +
                     " vs grads " + grads.shape_string());
  }
  DenseMatrix s(weights.rows(), weights.cols());
  for (std::size_t i = 0; i < s.size(); ++i)
    s.data()[i] = std::fabs(weights.data()[i] * grads.data()[i]);
  return s;
}

// smoothed <- beta * smoothed + (1 - beta) * instant. The first observation
// seeds the average directly, so early scores are not biased toward zero.
inline void ema_update(ImportanceState& state, const DenseMatrix& instant,
                       double beta) {
  if (!(beta >= 0.0) || beta >= 1.0) {
    throw RangeError("ema_update: beta must lie in [0, 1), got " +
                     std::to_string(beta));
  }
  if (state.step_count == 0) {
    state.smoothed = instant;
    state.step_count = 1;
    return;
  }
  if (state.smoothed.rows() != instant.rows() ||
      state.smoothed.cols() != instant.cols()) {
    throw ShapeError("ema_update: state " + state.smoothed.shape_string() +
                     " vs instant " + instant.shape_string());
  }
  for (std::size_t i = 0; i < instant.size(); ++i)
    state.smoothed.data()[i] =
        beta * state.smoothed.data()[i] + (1.0 - beta) * instant.data()[i];
  ++state.step_count;
}

// Column means of the smoothed sensitivity: one score per output neuron.
inline std::vector<double> neuron_scores(const DenseMatrix& smoothed) {
  if (smoothed.size() == 0) {
    throw EmptyInputError("neuron_scores: empty sensitivity matrix");
  }
  std::vector<double> scores(smoothed.cols(), 0.0);
  for (std::size_t i = 0; i < smoothed.rows(); ++i)
    for (std::size_t j = 0; j < smoothed.cols(); ++j)
      scores[j] += smoothed(i, j);
  const double inv = 1.0 / static_cast<double>(smoothed.rows());
  for (double& s : scores) s *= inv;
  return scores;
}

struct HistogramBin {
  double low = 0.0;
  double high = 0.0;
  std::size_t count = 0;
};

// Uniform bins over [min, max]; every bin is right-open except the last,
// which is closed so the maximum lands inside. All-equal inputs collapse to
// a single degenerate bin.
inline std::vector<HistogramBin> export_histogram(
    const std::vector<double>& scores, std::size_t bin_count) {
  if (scores.empty()) {
    throw EmptyInputError("export_histogram: no scores");
  }
  if (bin_count == 0) {
    throw RangeError("export_histogram: bin_count must be positive");
  }
  double lo = scores[0], hi = scores[0];
  for (double s : scores) {
    if (s < lo) lo = s;
    if (s > hi) hi = s;
  }
  if (lo == hi) {
    return {HistogramBin{lo, hi, scores.size()}};
  }
  std::vector<HistogramBin> bins(bin_count);
  const double width = (hi - lo) / static_cast<double>(bin_count);
  for (std::size_t b = 0; b < bin_count; ++b) {
    bins[b].low = lo + width * static_cast<double>(b);
    bins[b].high = lo + width * static_cast<double>(b + 1);
  }
  bins.back().high = hi;
  for (double s : scores) {
    std::size_t b = static_cast<std::size_t>((s - lo) / width);
    if (b >= bin_count) b = bin_count - 1;
    ++bins[b].count;
  }
  return bins;
}

}  // namespace losparse
