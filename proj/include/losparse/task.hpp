// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "losparse/errors.hpp"
#include "losparse/matrix.hpp"
#include "losparse/rng.hpp"

namespace losparse {

// Entry scale of the planted sparse columns. Deliberately larger than the
// unit-variance low-rank part so the planted columns are incoherent,
// high-energy directions a column pruner ought to find.
inline constexpr double kSparseColumnScale = 3.0;

// A regression task with planted structure: targets are generated by a
// low-rank map plus a column-sparse map plus Gaussian noise,
//   y = x * (planted_lowrank + planted_sparse) + noise.
struct SyntheticTask {
  std::uint64_t seed = 0;
  std::size_t d_in = 0, d_out = 0;
  std::size_t planted_rank = 0;   // rank of the low-rank part
  std::size_t planted_cols = 0;   // nonzero columns of the sparse part
  double noise_std = 0.0;
  DenseMatrix planted_lowrank;    // d_in x d_out
  DenseMatrix planted_sparse;     // d_in x d_out, planted_cols live columns
};

struct Dataset {
  DenseMatrix inputs;   // n x d_in
  DenseMatrix targets;  // n x d_out

  std::size_t size() const { return inputs.rows(); }
};

struct GeneratedTask {
  SyntheticTask task;
  Dataset train;
  Dataset val;
};

namespace detail {

inline DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols,
                                   double scale, Rng& rng) {
  DenseMatrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.gaussian();
  return m;
}

inline Dataset sample_dataset(const SyntheticTask& task, std::size_t n,
                              Rng& rng) {
  Dataset d;
  d.inputs = gaussian_matrix(n, task.d_in, 1.0, rng);
  d.targets = matmul(d.inputs, add(task.planted_lowrank, task.planted_sparse));
  for (std::size_t i = 0; i < d.targets.size(); ++i)
    d.targets.data()[i] += task.noise_std * rng.gaussian();
  return d;
}

}  // namespace detail

// Build a task and matching train/val splits. Every draw comes from one
// seeded stream in a fixed order (low-rank factors, sparse column choice,
// sparse entries, train inputs, train noise, val inputs, val noise), so the
// same seed regenerates everything bit for bit.
inline GeneratedTask generate_task(std::uint64_t seed, std::size_t d_in,
                                   std::size_t d_out, std::size_t planted_rank,
                                   std::size_t planted_cols, double noise_std,
                                   std::size_t n_train, std::size_t n_val) {
  if (d_in == 0 || d_out == 0) {
    throw ConfigError("generate_task: dimensions must be positive");
  }
  if (planted_rank > std::min(d_in, d_out)) {
    throw ConfigError("generate_task: planted rank " +
                      std::to_string(planted_rank) + " exceeds min dimension " +
                      std::to_string(std::min(d_in, d_out)));
  }
  if (planted_cols > d_out) {
    throw ConfigError("generate_task: planted columns " +
                      std::to_string(planted_cols) + " exceed d_out " +
                      std::to_string(d_out));
  }
  if (noise_std < 0.0) {
    throw ConfigError("generate_task: noise_std must be non-negative");
  }
  if (n_train == 0 || n_val == 0) {
    throw ConfigError("generate_task: dataset sizes must be positive");
  }

  GeneratedTask g;
  g.task.seed = seed;
  g.task.d_in = d_in;
  g.task.d_out = d_out;
  g.task.planted_rank = planted_rank;
  g.task.planted_cols = planted_cols;
  g.task.noise_std = noise_std;

  Rng rng(seed);

  // Product of two Gaussian factors; the rank^(-1/4) scale on each factor
  // keeps the product's entries at unit variance regardless of rank.
  if (planted_rank > 0) {
    const double fscale =
        1.0 / std::pow(static_cast<double>(planted_rank), 0.25);
    const DenseMatrix g1 = detail::gaussian_matrix(d_in, planted_rank, fscale, rng);
    const DenseMatrix g2 = detail::gaussian_matrix(planted_rank, d_out, fscale, rng);
    g.task.planted_lowrank = matmul(g1, g2);
  } else {
    g.task.planted_lowrank = DenseMatrix(d_in, d_out);
  }

  // Partial Fisher-Yates draw of the live column set, filled in ascending
  // column order.
  g.task.planted_sparse = DenseMatrix(d_in, d_out);
  std::vector<std::size_t> pool(d_out);
  for (std::size_t j = 0; j < d_out; ++j) pool[j] = j;
  std::vector<std::size_t> chosen;
  for (std::size_t pick = 0; pick < planted_cols; ++pick) {
    const std::size_t at = pick + rng.below(d_out - pick);
    std::swap(pool[pick], pool[at]);
    chosen.push_back(pool[pick]);
  }
  std::sort(chosen.begin(), chosen.end());
  for (std::size_t j : chosen)
    for (std::size_t i = 0; i < d_in; ++i)
      g.task.planted_sparse(i, j) = kSparseColumnScale * rng.gaussian();

  g.train = detail::sample_dataset(g.task, n_train, rng);
  g.val = detail::sample_dataset(g.task, n_val, rng);
  return g;
}

}  // namespace losparse
