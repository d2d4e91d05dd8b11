// SPDX-License-Identifier: Apache-2.0
#pragma once

//
// Singular value decomposition via one-sided Jacobi rotations.
//
// The working matrix starts as a copy of the input (transposed when the
// input is wide, so the working shape is always tall). Plane rotations are
// applied on column pairs until every pair is numerically orthogonal:
// |a_p . a_q| <= 1e-12 * sqrt(|a_p|^2 |a_q|^2). Column norms of the rotated
// matrix are the singular values, the normalized columns are the left
// vectors, and the accumulated rotations give the right vectors.
//
// Properties the rest of the library relies on:
//   - singular values are returned in descending order,
//   - equal singular values keep the order the sweep produced (stable sort),
//   - each left vector's largest-magnitude entry is positive, with the sign
//     flip pushed into the matching right vector,
//   - zero columns (rank-deficient or all-zero inputs) are replaced by an
//     orthonormal completion so the factor matrices always have orthonormal
//     columns.
//
// A hard cap of 60 sweeps guards against pathological non-convergence; the
// cap firing is reported as a numeric error carrying the matrix norm.
//

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "losparse/errors.hpp"
#include "losparse/matrix.hpp"

namespace losparse {

struct SvdResult {
  DenseMatrix left_vectors;           // d1 x k, orthonormal columns
  std::vector<double> singular_values;  // k values, descending
  DenseMatrix right_vectors;          // d2 x k, orthonormal columns
};

namespace detail {

// Core one-sided Jacobi on a tall matrix (rows >= cols), column-major
// working storage so rotations touch contiguous memory.
inline SvdResult svd_tall(const DenseMatrix& w) {
  const std::size_t m = w.rows(), n = w.cols();
  std::vector<double> b(m * n);  // column j at b[j*m .. j*m+m)
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) b[j * m + i] = w(i, j);
  std::vector<double> v(n * n, 0.0);  // rotations, column-major
  for (std::size_t j = 0; j < n; ++j) v[j * n + j] = 1.0;

  const double frob = frobenius_norm(w);
  constexpr double kTol = 1e-12;
  constexpr int kMaxSweeps = 60;

  std::vector<double> col_sq(n);
  bool converged = (frob == 0.0);
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      const double* cj = &b[j * m];
      for (std::size_t i = 0; i < m; ++i) s += cj[i] * cj[i];
      col_sq[j] = s;
    }
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double* cp = &b[p * m];
        double* cq = &b[q * m];
        double apq = 0.0;
        for (std::size_t i = 0; i < m; ++i) apq += cp[i] * cq[i];
        const double app = col_sq[p], aqq = col_sq[q];
        if (std::fabs(apq) <= kTol * std::sqrt(app * aqq)) continue;
        rotated = true;
        const double tau = (aqq - app) / (2.0 * apq);
        const double t =
            (tau >= 0.0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t i = 0; i < m; ++i) {
          const double bp = cp[i], bq = cq[i];
          cp[i] = c * bp - s * bq;
          cq[i] = s * bp + c * bq;
        }
        double* vp = &v[p * n];
        double* vq = &v[q * n];
        for (std::size_t i = 0; i < n; ++i) {
          const double xp = vp[i], xq = vq[i];
          vp[i] = c * xp - s * xq;
          vq[i] = s * xp + c * xq;
        }
        col_sq[p] = app - t * apq;
        col_sq[q] = aqq + t * apq;
      }
    }
    if (!rotated) converged = true;
  }
  if (!converged) {
    throw NumericError("svd: one-sided Jacobi did not converge within 60 sweeps"
                       " (matrix norm " + std::to_string(frob) + ")");
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    const double* cj = &b[j * m];
    for (std::size_t i = 0; i < m; ++i) s += cj[i] * cj[i];
    sigma[j] = std::sqrt(s);
  }

  // Descending order; the stable sort keeps equal values in sweep order.
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < n; ++j) order[j] = j;
  std::stable_sort(order.begin(), order.end(), [&sigma](std::size_t x, std::size_t y) {
    return sigma[x] > sigma[y];
  });

  SvdResult out;
  out.singular_values.resize(n);
  out.left_vectors = DenseMatrix(m, n);
  out.right_vectors = DenseMatrix(n, n);

  const double sigma_max = sigma[order[0]];
  const double tiny =
      static_cast<double>(m > n ? m : n) * std::numeric_limits<double>::epsilon() * sigma_max;

  std::vector<std::size_t> built;
  built.reserve(n);
  std::vector<std::size_t> pending;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.singular_values[j] = sigma[src];
    for (std::size_t i = 0; i < n; ++i) out.right_vectors(i, j) = v[src * n + i];
    if (sigma[src] > tiny && sigma[src] > 0.0) {
      const double inv = 1.0 / sigma[src];
      for (std::size_t i = 0; i < m; ++i)
        out.left_vectors(i, j) = b[src * m + i] * inv;
      built.push_back(j);
    } else {
      pending.push_back(j);
    }
  }

  // Orthonormal completion for (numerically) zero singular values: seed with
  // canonical basis vectors, project out the built columns twice, accept the
  // first candidate that keeps a healthy norm.
  for (std::size_t j : pending) {
    bool placed = false;
    for (std::size_t cand = 0; cand < m && !placed; ++cand) {
      std::vector<double> col(m, 0.0);
      col[cand] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t c : built) {
          double proj = 0.0;
          for (std::size_t i = 0; i < m; ++i)
            proj += col[i] * out.left_vectors(i, c);
          for (std::size_t i = 0; i < m; ++i)
            col[i] -= proj * out.left_vectors(i, c);
        }
      }
      double norm_sq = 0.0;
      for (std::size_t i = 0; i < m; ++i) norm_sq += col[i] * col[i];
      if (norm_sq > 0.25) {
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (std::size_t i = 0; i < m; ++i)
          out.left_vectors(i, j) = col[i] * inv;
        placed = true;
      }
    }
    if (!placed) {
      throw NumericError("svd: failed to complete an orthonormal basis"
                         " (matrix norm " + std::to_string(frob) + ")");
    }
    built.push_back(j);
  }
  return out;
}

}  // namespace detail

// Full SVD of w: w = left * diag(singular_values) * right^T with
// k = min(rows, cols) triples.
inline SvdResult svd(const DenseMatrix& w) {
  if (w.rows() == 0 || w.cols() == 0) {
    throw EmptyInputError("svd: matrix has no entries (" + w.shape_string() + ")");
  }
  SvdResult r;
  if (w.rows() >= w.cols()) {
    r = detail::svd_tall(w);
  } else {
    SvdResult t = detail::svd_tall(transpose(w));
    r.left_vectors = std::move(t.right_vectors);
    r.singular_values = std::move(t.singular_values);
    r.right_vectors = std::move(t.left_vectors);
  }
  // Sign convention: the largest-magnitude entry of each left vector is
  // positive; the compensating flip lands on the right vector so the
  // product is unchanged.
  const std::size_t k = r.singular_values.size();
  for (std::size_t j = 0; j < k; ++j) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < r.left_vectors.rows(); ++i) {
      const double a = std::fabs(r.left_vectors(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (r.left_vectors(arg, j) < 0.0) {
      for (std::size_t i = 0; i < r.left_vectors.rows(); ++i)
        r.left_vectors(i, j) = -r.left_vectors(i, j);
      for (std::size_t i = 0; i < r.right_vectors.rows(); ++i)
        r.right_vectors(i, j) = -r.right_vectors(i, j);
    }
  }
  return r;
}

}  // namespace losparse
