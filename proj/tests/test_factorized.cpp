// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>

#include "helpers.hpp"
#include "losparse/factorized.hpp"
#include "losparse/matrix.hpp"
#include "losparse/rng.hpp"
#include "losparse/svd.hpp"

using losparse::DenseMatrix;
using losparse::FactorizedLayer;
using losparse::Rng;

namespace {

// Central finite differences through an arbitrary scalar functional of the
// layer output; the oracle for every analytic gradient below.
template <typename Loss>
double fd_partial(double* slot, const FactorizedLayer& layer,
                  const DenseMatrix& x, Loss loss, double h = 1e-5) {
  const double saved = *slot;
  *slot = saved + h;
  const double up = loss(forward(layer, x));
  *slot = saved - h;
  const double down = loss(forward(layer, x));
  *slot = saved;
  return (up - down) / (2.0 * h);
}

bool close_grad(double analytic, double numeric) {
  const double tol = std::max(1e-8, 1e-5 * std::fabs(numeric));
  return std::fabs(analytic - numeric) <= tol;
}

}  // namespace

TEST_CASE("initialization splits W exactly into U*V + S", "[factorized]") {
  Rng rng(211);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t d1 = 3 + rng.below(20);
    const std::size_t d2 = 3 + rng.below(20);
    const std::size_t cap = std::min(d1, d2);
    const DenseMatrix w = testutil::random_matrix(d1, d2, rng);
    for (std::size_t r : {std::size_t{1}, cap / 2, cap}) {
      if (r == 0) continue;
      const FactorizedLayer f = init_from_pretrained(w, r);
      const double rel =
          frobenius_norm(subtract(w, reconstruct(f))) / frobenius_norm(w);
      REQUIRE(rel <= 1e-9);
      REQUIRE(f.live_count() == d2);
      REQUIRE(f.rank == r);
    }
  }
}

TEST_CASE("low-rank residual energy equals the spectral tail", "[factorized]") {
  Rng rng(223);
  const DenseMatrix w = testutil::random_matrix(17, 13, rng);
  const auto sv = losparse::svd(w);
  for (std::size_t r : {std::size_t{1}, std::size_t{4}, std::size_t{9}}) {
    const FactorizedLayer f = init_from_pretrained(w, r);
    const DenseMatrix residual = subtract(w, matmul(f.U, f.V));
    const double err_sq = frobenius_norm(residual) * frobenius_norm(residual);
    double tail = 0.0;
    for (std::size_t j = r; j < sv.singular_values.size(); ++j)
      tail += sv.singular_values[j] * sv.singular_values[j];
    REQUIRE(std::fabs(err_sq - tail) <= 1e-8 * tail);
  }
}

TEST_CASE("factor columns and rows carry sqrt(sigma) norms", "[factorized]") {
  Rng rng(227);
  const DenseMatrix w = testutil::random_matrix(12, 16, rng);
  const auto sv = losparse::svd(w);
  const FactorizedLayer f = init_from_pretrained(w, 5);
  for (std::size_t j = 0; j < 5; ++j) {
    double ucol = 0.0, vrow = 0.0;
    for (std::size_t i = 0; i < f.U.rows(); ++i) ucol += f.U(i, j) * f.U(i, j);
    for (std::size_t l = 0; l < f.V.cols(); ++l) vrow += f.V(j, l) * f.V(j, l);
    REQUIRE(std::fabs(std::sqrt(ucol) - std::sqrt(sv.singular_values[j])) <=
            1e-10 * std::sqrt(sv.singular_values[0]));
    REQUIRE(std::fabs(std::sqrt(vrow) - std::sqrt(sv.singular_values[j])) <=
            1e-10 * std::sqrt(sv.singular_values[0]));
  }
}

TEST_CASE("rank requests outside the matrix shape are rejected", "[factorized]") {
  Rng rng(229);
  const DenseMatrix w = testutil::random_matrix(6, 9, rng);
  REQUIRE_THROWS_AS(init_from_pretrained(w, 0), losparse::BudgetError);
  REQUIRE_THROWS_AS(init_from_pretrained(w, 7), losparse::BudgetError);
}

TEST_CASE("forward equals multiplication by the reconstruction", "[factorized]") {
  Rng rng(233);
  const DenseMatrix w = testutil::random_matrix(10, 8, rng);
  const FactorizedLayer f = init_from_pretrained(w, 3);
  const DenseMatrix x = testutil::random_matrix(5, 10, rng);
  const DenseMatrix direct = forward(f, x);
  const DenseMatrix via_w = matmul(x, reconstruct(f));
  REQUIRE(testutil::max_abs_diff(direct, via_w) <= 1e-10);
}

TEST_CASE("analytic gradients match central finite differences", "[factorized]") {
  Rng rng(239);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t d1 = 3 + rng.below(8);
    const std::size_t d2 = 3 + rng.below(8);
    const std::size_t n = 2 + rng.below(4);
    const std::size_t r = 1 + rng.below(std::min(d1, d2));
    FactorizedLayer f =
        init_from_pretrained(testutil::random_matrix(d1, d2, rng), r);
    DenseMatrix x = testutil::random_matrix(n, d1, rng);
    const DenseMatrix target = testutil::random_matrix(n, d2, rng);

    // Halved squared error against a fixed target; dL/dY = Y - target.
    const auto loss = [&target](const DenseMatrix& y) {
      double acc = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = y.data()[i] - target.data()[i];
        acc += 0.5 * e * e;
      }
      return acc;
    };
    const DenseMatrix y = forward(f, x);
    const DenseMatrix dy = subtract(y, target);
    const auto grads = backward(f, x, dy);

    for (std::size_t i = 0; i < f.U.size(); ++i)
      REQUIRE(close_grad(grads.dU.data()[i],
                         fd_partial(f.U.data() + i, f, x, loss)));
    for (std::size_t i = 0; i < f.V.size(); ++i)
      REQUIRE(close_grad(grads.dV.data()[i],
                         fd_partial(f.V.data() + i, f, x, loss)));
    for (std::size_t i = 0; i < f.S.size(); ++i)
      REQUIRE(close_grad(grads.dS.data()[i],
                         fd_partial(f.S.data() + i, f, x, loss)));
    for (std::size_t i = 0; i < x.size(); ++i)
      REQUIRE(close_grad(grads.dX.data()[i],
                         fd_partial(x.data() + i, f, x, loss)));
  }
}

TEST_CASE("rank_from_budget arithmetic", "[factorized]") {
  REQUIRE(losparse::rank_from_budget(100, 100, 0.05) == 2);
  REQUIRE(losparse::rank_from_budget(64, 64, 0.05) == 1);
  REQUIRE(losparse::rank_from_budget(8, 8, 0.001) == 1);  // floor clamps up
  REQUIRE(losparse::rank_from_budget(100, 100, 2.0) == 100);  // full rank
  REQUIRE_THROWS_AS(losparse::rank_from_budget(10, 10, 0.0),
                    losparse::BudgetError);
  REQUIRE_THROWS_AS(losparse::rank_from_budget(10, 10, 2.5),
                    losparse::BudgetError);
}

TEST_CASE("rank_from_budget stays within budget unless clamped to 1",
          "[factorized]") {
  for (std::size_t d1 : {2, 5, 16, 33, 100}) {
    for (std::size_t d2 : {2, 7, 24, 51, 128}) {
      for (double f : {0.01, 0.05, 0.1, 0.2, 0.5, 0.9}) {
        const std::size_t r = losparse::rank_from_budget(d1, d2, f);
        const bool within =
            static_cast<double>(r * (d1 + d2)) <=
            f * static_cast<double>(d1) * static_cast<double>(d2);
        REQUIRE((within || r == 1));
      }
    }
  }
}

TEST_CASE("remaining_ratio counts factors plus live columns", "[factorized]") {
  FactorizedLayer f;
  f.rank = 5;
  f.U = DenseMatrix(100, 5);
  f.V = DenseMatrix(5, 100);
  f.S = DenseMatrix(100, 100);
  f.live_columns.assign(100, 1);
  REQUIRE(losparse::remaining_ratio({f}) == 1.1);

  for (std::size_t j = 50; j < 100; ++j) f.live_columns[j] = 0;
  REQUIRE(losparse::remaining_ratio({f}) == 0.6);

  REQUIRE_THROWS_AS(losparse::remaining_ratio({}), losparse::EmptyInputError);
}

TEST_CASE("budget validation bounds", "[factorized]") {
  losparse::CompressionBudget ok{0.2, 0.05};
  REQUIRE_NOTHROW(losparse::validate_budget(ok));
  REQUIRE_NOTHROW(losparse::validate_budget({1.0, 0.0}));
  REQUIRE_THROWS_AS(losparse::validate_budget({0.0, 0.0}),
                    losparse::BudgetError);
  REQUIRE_THROWS_AS(losparse::validate_budget({1.2, 0.1}),
                    losparse::BudgetError);
  REQUIRE_THROWS_AS(losparse::validate_budget({0.2, 0.2}),
                    losparse::BudgetError);
  REQUIRE_THROWS_AS(losparse::validate_budget({0.2, -0.01}),
                    losparse::BudgetError);
}
