#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"
#include "repobs/bounds.hpp"

using namespace repobs;

TEST(Bounds, MajorityBoundSymmetricBinary) {
  const ConfusionMatrix p = ConfusionMatrix::symmetric_binary(0.8);
  EXPECT_NEAR(theorem1_bound(p, 1), 0.8, 1e-15);
  EXPECT_NEAR(theorem1_bound(p, 10), 0.1073741824, 1e-12);
  EXPECT_NEAR(theorem1_bound(p, 20), 0.011529215046068475, 1e-14);
  EXPECT_NEAR(sanov_exponent(p), std::log(0.8), 1e-15);
}

TEST(Bounds, BinaryFormEqualsMajorityBound) {
  for (double p = 0.55; p < 0.951; p += 0.05)
    for (int t = 1; t <= 30; ++t)
      EXPECT_NEAR(binary_bound(p, t), theorem1_bound(ConfusionMatrix::symmetric_binary(p), t), 1e-12);
}

TEST(Bounds, MajorityBoundBelowSanovEnvelope) {
  const ConfusionMatrix p({{0.7, 0.2, 0.1}, {0.1, 0.6, 0.3}, {0.05, 0.15, 0.8}});
  for (int t = 1; t <= 40; ++t) {
    EXPECT_LE(theorem1_bound(p, t), 2.0 * std::exp(t * sanov_exponent(p)) * (1 + 1e-12));
    EXPECT_LE(theorem1_bound(p, t + 1), theorem1_bound(p, t));
  }
}

TEST(Bounds, MarginViolationNamesPair) {
  const ConfusionMatrix p({{0.5, 0.5}, {0.2, 0.8}});
  try {
    theorem1_bound(p, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::margin);
    EXPECT_NE(std::string(e.what()).find("j=1, l=2"), std::string::npos);
  }
  EXPECT_THROW(binary_bound(0.5, 3), Error);
}

TEST(Bounds, CltMajority) {
  EXPECT_NEAR(clt_majority(0.8, 0.2, 4), 0.066807201268858071, 1e-12);
  EXPECT_NEAR(vote_difference_variance(0.8, 0.2), 0.64, 1e-15);
}

TEST(Bounds, HoeffdingIndicatorExponentIsWeakerThanMajority) {
  for (double a = 0.05; a <= 1.0; a += 0.05)
    for (double b = 0.0; b < a && a + b <= 1.0 + 1e-12; b += 0.05) {
      const double r = std::sqrt(a) - std::sqrt(b);
      EXPECT_GE(-std::log(1 - r * r), 0.5 * (a - b) * (a - b));
    }
  const UtilityMoments m = UtilityMoments::from_confusion(ConfusionMatrix::symmetric_binary(0.8));
  const ExponentialBound h = hoeffding_bound(m, 10);
  EXPECT_NEAR(h.exponent, 0.18, 1e-15);
  EXPECT_NEAR(h.value, std::exp(-1.8), 1e-15);
}

TEST(Bounds, MomentChain) {
  const MomentBound edge = moment_exponents(2.0, 1.0);
  const double r = 1.0 / 6.0, s = 1 - 2 * std::sqrt(r);
  EXPECT_NEAR(edge.middle, s * s / (2 * r), 1e-15);
  EXPECT_NEAR(edge.neg_log_rho, 0.10649, 5e-5);
  EXPECT_NEAR(edge.floor, 0.1, 1e-15);
  for (double c1 = 0.25; c1 <= 4.0; c1 *= 2)
    for (double f = 0.05; f <= 1.0; f += 0.05) {
      const MomentBound b = moment_exponents(2 * c1 * f, c1);
      EXPECT_GE(b.neg_log_rho, b.middle);
      EXPECT_GE(b.middle, b.floor);
    }
  try {
    moment_exponents(2.5, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::out_of_regime);
  }
  EXPECT_LT(moment_exponents(1e-6, 1.0).neg_log_rho, 1e-10);
}

TEST(Bounds, PrototypeUtilityMoments) {
  const UtilityMoments m =
      UtilityMoments::prototype({Vector{-1.0}, Vector{1.0}}, {Matrix{{1.0}}, Matrix{{1.0}}}, {Vector{-1.0}, Vector{1.0}});
  EXPECT_NEAR(m.q[0][0] - m.q[0][1], 4.0, 1e-15);
  EXPECT_NEAR(m.variances[0][1], 16.0, 1e-15);
  EXPECT_NEAR(clt_utility(m, 0, 1, 4), 0.022750131948179209, 1e-12);
  UtilityMoments flat = m;
  flat.q[0][1] = flat.q[0][0];
  EXPECT_NEAR(clt_utility(flat, 0, 1, 4), 0.5, 1e-15);
}

TEST(Bounds, MlBoundFromBhattacharyya) {
  const std::vector<ClassModel> f = {GaussianClass::isotropic(Vector{-1.0}), GaussianClass::isotropic(Vector{1.0})};
  const ExponentialBound b = ml_bound(f, 3);
  EXPECT_NEAR(b.exponent, 0.5, 1e-14);
  EXPECT_NEAR(b.value, std::exp(-1.5), 1e-14);
}

TEST(Bounds, Dgl) {
  EXPECT_NEAR(dgl_bound(0.3, 2, 100), 4 * std::exp(-4.5), 1e-15);
  EXPECT_NEAR(dgl_bound(0.3, 2, 100), 0.044436, 1e-6);
  EXPECT_NEAR(dgl_bound(0.15, 3, 400), dgl_bound(0.3, 3, 100), 1e-15);
}

TEST(Bounds, PrototypeForms) {
  const PrototypeBound b = prototype_bound(Vector{2.0, 0.0, 0.0}, Vector{0.0, 0.0, 0.0}, Matrix::identity(3), 6);
  EXPECT_NEAR(b.tight, std::exp(-3.0), 1e-15);
  EXPECT_NEAR(b.trace, std::exp(-1.0), 1e-15);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Matrix c = testing_support::random_spd(4, 500 + s);
    const Vector x = testing_support::random_vector(4, 600 + s);
    const PrototypeBound r = prototype_bound(x, Vector(4), c, 5);
    EXPECT_LE(r.tight, r.trace * (1 + 1e-12));
  }
  EXPECT_THROW(prototype_bound(Vector{1.0}, Vector{1.0}, Matrix{{1.0}}, 1), Error);
}

TEST(Bounds, TransformedForms) {
  const Matrix c = testing_support::random_spd(3, 77);
  const Vector xj = testing_support::random_vector(3, 78), xl = testing_support::random_vector(3, 79);
  const PrototypeBound id = transformed_bound(Matrix::identity(3), xj, xl, c, 4);
  const PrototypeBound direct = prototype_bound(xj, xl, c, 4);
  EXPECT_NEAR(id.tight, direct.tight, 1e-14);
  EXPECT_NEAR(id.trace, direct.trace, 1e-14);
  const Matrix a = testing_support::random_matrix(3, 2, 80);
  const PrototypeBound a1 = transformed_bound(a, xj, xl, c, 4), a3 = transformed_bound(a * 3.0, xj, xl, c, 4);
  EXPECT_NEAR(a1.tight, a3.tight, 1e-13);
  EXPECT_NEAR(a1.trace, a3.trace, 1e-13);
}

TEST(Bounds, SigmaOfA) {
  for (std::size_t d : {1u, 3u, 8u}) {
    Vector x(d);
    x[0] = 2.0;
    const double s = sigma_of_A(Matrix::identity(d), {Matrix::identity(d), Matrix::identity(d)}, {x, Vector(d)});
    EXPECT_NEAR(s, d / 4.0, 1e-14);
  }
  const std::vector<Matrix> covs = {testing_support::random_spd(3, 1), testing_support::random_spd(3, 2),
                                    testing_support::random_spd(3, 3)};
  const std::vector<Vector> xs = {testing_support::random_vector(3, 4), testing_support::random_vector(3, 5),
                                  testing_support::random_vector(3, 6)};
  const Matrix a = testing_support::random_matrix(3, 2, 7);
  const double s = sigma_of_A(a, covs, xs);
  EXPECT_NEAR(sigma_of_A(a * 0.1, covs, xs), s, 1e-12);
  EXPECT_NEAR(sigma_of_A(a, {covs[2], covs[0], covs[1]}, {xs[2], xs[0], xs[1]}), s, 1e-15);
}

TEST(Bounds, LinearForms) {
  const double c = 1.5;
  for (double d : {1.0, 4.0, 16.0}) {
    const ExponentialBound b = linear_bound(c / d, c / d, 3);
    EXPECT_NEAR(b.value, 2 * std::exp(-d * 3 / (2 * c)), 1e-15);
  }
  EXPECT_DOUBLE_EQ(linear_bound(0.2, 0.3, 0).value, 2.0);
  EXPECT_TRUE(std::isinf(linear_bound(0.0, 0.0, 1).exponent));
  const auto [sm, sp] = linear_score_variances(Matrix::identity(4), Matrix::identity(4) * 2.0);
  EXPECT_NEAR(sm, 0.25, 1e-15);
  EXPECT_NEAR(sp, 0.5, 1e-15);
  // σ²(𝟏) = max{σ²₋, σ²₊}/4
  const double s1 = sigma_sq_of_scaling(Vector::ones(4), Matrix::identity(4) * 2.0, Matrix::identity(4),
                                        Vector::ones(4) * 2.0);
  EXPECT_NEAR(s1, std::max(sm, sp) / 4, 1e-15);
}
