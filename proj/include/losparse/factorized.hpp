// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "losparse/errors.hpp"
#include "losparse/matrix.hpp"
#include "losparse/svd.hpp"

namespace losparse {

// A weight matrix W (d1 x d2) held as a low-rank pair plus a column-sparse
// residual: W ~ U * V + S. Columns of S whose flag is 0 are dead and their
// entries are exactly zero; only live columns carry information (and only
// they are stored in checkpoints).
struct FactorizedLayer {
  DenseMatrix U;  // d1 x r
  DenseMatrix V;  // r x d2
  DenseMatrix S;  // d1 x d2
  std::size_t rank = 0;
  std::vector<std::uint8_t> live_columns;  // d2 flags, 1 = live

  std::size_t d1() const { return S.rows(); }
  std::size_t d2() const { return S.cols(); }

  std::size_t live_count() const {
    std::size_t n = 0;
    for (std::uint8_t f : live_columns) n += (f != 0);
    return n;
  }
};

struct CompressionBudget {
  double total_ratio = 0.0;    // kept parameters / original parameters
  double lowrank_ratio = 0.0;  // low-rank factor parameters / original
};

// Training-path budget domain: some sparse budget must remain. A zero
// low-rank share is legal only for the dense iterative-pruning baseline,
// which has no factors at all; callers assert that separately.
inline void validate_budget(const CompressionBudget& b) {
  if (!(b.total_ratio > 0.0) || b.total_ratio > 1.0) {
    throw BudgetError("budget: total_ratio must lie in (0, 1], got " +
                      std::to_string(b.total_ratio));
  }
  if (b.lowrank_ratio < 0.0 || b.lowrank_ratio >= b.total_ratio) {
    throw BudgetError("budget: lowrank_ratio must lie in [0, total_ratio), got " +
                      std::to_string(b.lowrank_ratio));
  }
}

// Largest rank whose factor parameters r*(d1+d2) fit the given fraction of
// the dense parameter count, never below 1 and never above min(d1, d2).
// Fractions above 1 are meaningful only for auditing full-rank
// factorizations (full-rank factors always cost more than the dense matrix),
// hence the (0, 2] domain.
inline std::size_t rank_from_budget(std::size_t d1, std::size_t d2,
                                    double lowrank_fraction) {
  if (d1 == 0 || d2 == 0) {
    throw EmptyInputError("rank_from_budget: empty matrix shape");
  }
  if (!(lowrank_fraction > 0.0) || lowrank_fraction > 2.0) {
    throw BudgetError("rank_from_budget: fraction must lie in (0, 2], got " +
                      std::to_string(lowrank_fraction));
  }
  const double raw = lowrank_fraction * static_cast<double>(d1) *
                     static_cast<double>(d2) /
                     static_cast<double>(d1 + d2);
  std::size_t r = static_cast<std::size_t>(raw);  // floor; raw >= 0
  if (r < 1) r = 1;
  const std::size_t cap = d1 < d2 ? d1 : d2;
  if (r > cap) r = cap;
  return r;
}

// Split a pretrained matrix into factors plus residual. The factors absorb
// the top r singular directions with the balanced sqrt(sigma) scaling
//   U = [sqrt(s1) u1, ..., sqrt(sr) ur],  V = [sqrt(s1) v1; ...; sqrt(sr) vr],
// and the residual S = W - U*V makes the split exact at initialization.
inline FactorizedLayer init_from_pretrained(const DenseMatrix& w,
                                            std::size_t rank) {
  const std::size_t cap = w.rows() < w.cols() ? w.rows() : w.cols();
  if (rank == 0 || rank > cap) {
    throw BudgetError("init_from_pretrained: rank " + std::to_string(rank) +
                      " out of range for " + w.shape_string());
  }
  const SvdResult sv = svd(w);
  FactorizedLayer f;
  f.rank = rank;
  f.U = DenseMatrix(w.rows(), rank);
  f.V = DenseMatrix(rank, w.cols());
  for (std::size_t j = 0; j < rank; ++j) {
    const double root = std::sqrt(sv.singular_values[j]);
    for (std::size_t i = 0; i < w.rows(); ++i)
      f.U(i, j) = root * sv.left_vectors(i, j);
    for (std::size_t l = 0; l < w.cols(); ++l)
      f.V(j, l) = root * sv.right_vectors(l, j);
  }
  f.S = subtract(w, matmul(f.U, f.V));
  f.live_columns.assign(w.cols(), 1);
  return f;
}

// Y = (X*U)*V + X*S, associated exactly in that order so the low-rank path
// never materializes a d1 x d2 product.
inline DenseMatrix forward(const FactorizedLayer& f, const DenseMatrix& x) {
  if (x.cols() != f.d1()) {
    throw ShapeError("forward: input " + x.shape_string() +
                     " does not match layer " + f.S.shape_string());
  }
  return add(matmul(matmul(x, f.U), f.V), matmul(x, f.S));
}

struct FactorizedGradients {
  DenseMatrix dU, dV, dS, dX;
};

// Reverse-mode gradients of the factorized forward for upstream dY:
//   dU = X^T (dY V^T),  dV = (X U)^T dY,  dS = X^T dY,
//   dX = dY V^T U^T + dY S^T.
inline FactorizedGradients backward(const FactorizedLayer& f,
                                    const DenseMatrix& x,
                                    const DenseMatrix& dy) {
  if (x.cols() != f.d1() || dy.cols() != f.d2() || dy.rows() != x.rows()) {
    throw ShapeError("backward: got input " + x.shape_string() +
                     ", upstream " + dy.shape_string() + " for layer " +
                     f.S.shape_string());
  }
  FactorizedGradients g;
  const DenseMatrix xt = transpose(x);
  const DenseMatrix dy_vt = matmul(dy, transpose(f.V));
  g.dU = matmul(xt, dy_vt);
  g.dV = matmul(transpose(matmul(x, f.U)), dy);
  g.dS = matmul(xt, dy);
  g.dX = add(matmul(dy_vt, transpose(f.U)), matmul(dy, transpose(f.S)));
  return g;
}

inline DenseMatrix reconstruct(const FactorizedLayer& f) {
  return add(matmul(f.U, f.V), f.S);
}

// Kept parameters over original parameters across a set of layers: each
// layer keeps r*(d1+d2) factor entries plus d1 entries per live column.
// Values above 1 are possible right after initialization, when every column
// is still live and the factors are pure overhead.
inline double remaining_ratio(const std::vector<FactorizedLayer>& layers) {
  if (layers.empty()) {
    throw EmptyInputError("remaining_ratio: no layers");
  }
  double kept = 0.0, original = 0.0;
  for (const FactorizedLayer& f : layers) {
    kept += static_cast<double>(f.rank) * static_cast<double>(f.d1() + f.d2());
    kept += static_cast<double>(f.d1()) * static_cast<double>(f.live_count());
    original += static_cast<double>(f.d1()) * static_cast<double>(f.d2());
  }
  return kept / original;
}

}  // namespace losparse
