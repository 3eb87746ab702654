#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "repobs/bounds.hpp"
#include "repobs/transform.hpp"

using namespace repobs;
using testing_support::random_matrix;
using testing_support::random_spd;
using testing_support::random_vector;

namespace {

/// S_B from M random means, so rank(S_B) = M - 1.
Matrix random_between(std::size_t d, std::size_t M, std::uint64_t seed) {
  std::vector<Vector> means;
  for (std::size_t j = 0; j < M; ++j) means.push_back(random_vector(d, seed * 31 + j));
  std::vector<Matrix> covs(M, Matrix::identity(d));
  return scatter_matrices(means, covs).S_B;
}

}  // namespace

TEST(Transform, ScatterMatricesByHand) {
  const ScatterSet s = scatter_matrices({Vector{1.0, 0.0}, Vector{-1.0, 0.0}}, {Matrix::identity(2), Matrix::identity(2)});
  EXPECT_LT((s.S_W - Matrix::identity(2) * 2.0).max_abs(), 1e-15);
  EXPECT_LT((s.S_B - Matrix{{2.0, 0.0}, {0.0, 0.0}}).max_abs(), 1e-15);
  EXPECT_LT((s.S_C - Matrix{{2.0, 0.0}, {0.0, 0.0}}).max_abs(), 1e-15);
  EXPECT_NEAR(norm(s.x_bar), 0.0, 1e-15);
  EXPECT_FALSE(s.degenerate);
  const ScatterSet same = scatter_matrices({Vector{1.0, 2.0}, Vector{1.0, 2.0}}, {Matrix::identity(2), Matrix::identity(2)});
  EXPECT_TRUE(same.degenerate);
  EXPECT_THROW(trace_ratio_optimize(same.S_B, same.S_W, 1), Error);
}

TEST(Transform, ScatterRequiresSpdWithinScatterUnlessRegularized) {
  const Matrix singular{{1.0, 0.0}, {0.0, 0.0}};
  EXPECT_THROW(scatter_matrices({Vector{1.0, 0.0}, Vector{0.0, 1.0}}, {singular, singular}), Error);
  const ScatterSet s = scatter_matrices({Vector{1.0, 0.0}, Vector{0.0, 1.0}}, {singular, singular}, 1e-3);
  EXPECT_NEAR(s.S_W(1, 1), 1e-3, 1e-15);
}

TEST(Transform, TraceRatioDiagonalOptimum) {
  const TraceRatioResult r = trace_ratio_optimize(Matrix::diagonal(Vector{5.0, 3.0, 1.0}), Matrix::identity(3), 2);
  EXPECT_NEAR(r.rho_star, 4.0, 1e-8);
  EXPECT_TRUE(r.converged);
  EXPECT_LT((r.A.transpose() * r.A - Matrix::identity(2)).max_abs(), 1e-8);
  EXPECT_NEAR(std::abs(r.A(2, 0)) + std::abs(r.A(2, 1)), 0.0, 1e-8);
  EXPECT_NEAR(sigma1(r.A, Matrix::diagonal(Vector{5.0, 3.0, 1.0}), Matrix::identity(3)), 0.25, 1e-8);
}

TEST(Transform, TraceRatioPencilIdentity) {
  const Matrix s = random_spd(4, 3);
  const TraceRatioResult r = trace_ratio_optimize(s, s, 2);
  EXPECT_NEAR(r.rho_star, 1.0, 1e-12);
}

TEST(Transform, TraceRatioMonotoneStationaryAndGeometricRate) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t d = 3 + seed % 5, M = 1 + seed % 3;
    const Matrix sw = random_spd(d, 1000 + seed);
    const Matrix sb = random_between(d, M + 1, seed);
    const TraceRatioResult r = trace_ratio_optimize(sb, sw, M);
    for (std::size_t k = 1; k < r.rho_history.size(); ++k) EXPECT_GE(r.rho_history[k], r.rho_history[k - 1]);
    for (std::size_t k = 0; k + 1 < r.rho_history.size(); ++k)
      EXPECT_LE(r.rho_star - r.rho_history[k + 1], (1 - r.gamma) * (r.rho_star - r.rho_history[k]) + 1e-12);
    const EigenDecomposition e = sym_eig(sb - sw * r.rho_star);
    double top = 0.0;
    for (std::size_t i = 0; i < M; ++i) top += e.values[i];
    EXPECT_NEAR(top, 0.0, 1e-6);
  }
}

TEST(Transform, TraceRatioMultiStartAgrees) {
  const Matrix sw = random_spd(6, 21), sb = random_spd(6, 22, 0.0);
  const double base = trace_ratio_optimize(sb, sw, 2).rho_star;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const TraceRatioResult r = trace_ratio_optimize(sb, sw, 2, 1e-12, 500, random_orthonormal(6, 2, s));
    EXPECT_NEAR(r.rho_star, base, 1e-8);
  }
  const TraceRatioResult one = trace_ratio_multistart(sb, sw, 2, 5, 7, 1);
  const TraceRatioResult many = trace_ratio_multistart(sb, sw, 2, 5, 7, 4);
  EXPECT_EQ(one.rho_history, many.rho_history);
}

TEST(Transform, Sigma1PermutationInvariant) {
  const Matrix sw = random_spd(4, 5), sb = random_spd(4, 6, 0.0);
  const Matrix a = random_matrix(4, 3, 7);
  const Matrix p = Matrix::from_columns({a.column(2), a.column(0), a.column(1)});
  EXPECT_NEAR(sigma1(a, sb, sw), sigma1(p, sb, sw), 1e-13);
  EXPECT_NEAR(sigma1(a, sw, sw), 1.0, 1e-13);
}

TEST(Transform, Sigma2DiagonalCase) {
  const Sigma2Result r = sigma2_optimize(Matrix::identity(3), Matrix::diagonal(Vector{4.0, 1.0, 0.25}), 2);
  EXPECT_NEAR(r.objective, 1.25, 1e-10);
  EXPECT_NEAR(r.lambdas[0], 4.0, 1e-12);
  EXPECT_NEAR(r.lambdas[1], 1.0, 1e-12);
  EXPECT_NEAR(std::abs(r.A(0, 0)), 0.5, 1e-12);
  EXPECT_NEAR(std::abs(r.A(1, 1)), 1.0, 1e-12);
  EXPECT_LE((congruence(r.A, Matrix::diagonal(Vector{4.0, 1.0, 0.25})) - Matrix::identity(2)).max_abs(), 1e-8);
}

TEST(Transform, Sigma2RankError) {
  try {
    sigma2_optimize(Matrix::identity(3), Matrix::diagonal(Vector{1.0, 0.0, 0.0}), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::rank);
  }
}

TEST(Transform, Sigma2BeatsRandomFeasible) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const std::size_t d = 5, M = 2;
    const Matrix sw = random_spd(d, 40 + seed), sc = random_spd(d, 50 + seed, 0.1);
    const Sigma2Result best = sigma2_optimize(sw, sc, M);
    EXPECT_NEAR(best.objective, trace_congruence(best.A, sw), 1e-8);
    // Feasible A = B Λ^{-1/2} Q for orthonormal-column Q in the simultaneous basis.
    const EigenDecomposition e = gen_eig_spd(sc, sw);
    for (std::uint64_t k = 0; k < 100; ++k) {
      const Matrix q = random_orthonormal(d, M, 1000 * seed + k);
      Matrix a(d, M);
      for (std::size_t c = 0; c < M; ++c) {
        Vector col(d);
        for (std::size_t i = 0; i < d; ++i) col += e.vectors.column(i) * (q(i, c) / std::sqrt(e.values[i]));
        a.set_column(c, col);
      }
      ASSERT_LT((congruence(a, sc) - Matrix::identity(M)).max_abs(), 1e-8);
      EXPECT_LE(best.objective, trace_congruence(a, sw) + 1e-10);
    }
  }
}

TEST(Transform, LdaIdentityCase) {
  for (std::size_t d : {2u, 8u, 32u}) {
    const LdaScaling r = lda_scaling(Matrix::identity(d), Matrix::identity(d));
    for (std::size_t i = 0; i < d; ++i) EXPECT_NEAR(r.a_star[i], 1.0, 1e-12);
    EXPECT_NEAR(r.sigma_tilde_sq, 1.0 / (2.0 * d), 1e-12);
  }
  EXPECT_NEAR(sigma_tilde(Vector::ones(4), Matrix::identity(4), Matrix::identity(4), Vector::ones(4) * 2.0), 0.125,
              1e-15);
}

TEST(Transform, LdaOptimalClosedFormAndScaleInvariant) {
  const Matrix cp = random_spd(5, 61), cm = random_spd(5, 62);
  const LdaScaling r = lda_scaling(cp, cm);
  const Vector ones = Vector::ones(5);
  EXPECT_NEAR(r.sigma_tilde_sq, 1.0 / (4.0 * dot(solve_spd(cp + cm, ones), ones)), 1e-10);
  const Vector gap = ones * 2.0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    const Vector a = random_vector(5, 700 + k);
    EXPECT_LE(r.sigma_tilde_sq, sigma_tilde(a, cp, cm, gap) * (1 + 1e-12));
    const double base = sigma_tilde(a, cp, cm, gap);
    EXPECT_NEAR(sigma_tilde(a * 3.5, cp, cm, gap), base, 1e-12 * base);
  }
  const auto [sm, sp] = linear_score_variances(cm, cp);
  EXPECT_NEAR(sigma_tilde(ones, cp, cm, gap), (sm + sp) / 4.0, 1e-12);
}
