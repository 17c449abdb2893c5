#include <gtest/gtest.h>

#include "oracles.hpp"
#include "signfac/models.hpp"
#include "signfac/stats.hpp"

using namespace signfac;

TEST(Permeance, Examples) {
  Matrix h(4, 2);
  h << 1, 1, 1, -1, -1, 1, -1, -1;
  EXPECT_NEAR(permeance(SignMatrix(h)), 1.0, 1e-12);
  EXPECT_NEAR(permeance(SignMatrix(Matrix::Ones(5, 1))), 1.0, 1e-12);
  Matrix dup(3, 2);
  dup << 1, 1, -1, -1, 1, 1;
  EXPECT_NEAR(permeance(SignMatrix(dup)), 0.0, 1e-12);
}

TEST(Incoherence, Identity) {
  // U V^t = I, so the third parameter is (n^2 / n) * 1 = n.
  const IncoherenceReport r = incoherence(Matrix::Identity(5, 5));
  EXPECT_NEAR(r.mu_left, 1.0, 1e-12);
  EXPECT_NEAR(r.mu_right, 1.0, 1e-12);
  EXPECT_NEAR(r.mu_tilde, 5.0, 1e-12);
  EXPECT_NEAR(r.mu, 5.0, 1e-12);
  EXPECT_THROW(incoherence(Matrix::Zero(3, 3)), PreconditionError);
}

TEST(Incoherence, GlmSamples) {
  const SignMatrix s = random_schur_sign(20, 3, 7);
  const double nu = permeance(s);
  const double mu_s = incoherence(s.dense()).mu_left;
  for (std::uint64_t k = 0; k < 200; ++k) {
    const GlmInstance g = sample_glm(s, 10, k);
    const IncoherenceReport r = incoherence(g.l0);
    EXPECT_LE(r.mu_left, 1.0 / nu + 1e-9);
    EXPECT_NEAR(r.mu_left, mu_s, 1e-9);
    EXPECT_GE(r.mu_left, 1.0 - 1e-12);
    EXPECT_GE(r.mu_right, 1.0 - 1e-12);
    EXPECT_DOUBLE_EQ(r.mu, std::max({r.mu_left, r.mu_right, r.mu_tilde}));
  }
}

TEST(PermeanceStatistic, SingleColumn) {
  Vector l(4);
  l << 3, 0, -4, 0;
  const PermeanceBracket b = permeance_statistic(l);
  EXPECT_TRUE(b.exact);
  EXPECT_NEAR(b.upper, 5.0, 1e-12);
  EXPECT_NEAR(b.lower, 5.0, 1e-12);
}

TEST(PermeanceStatistic, RankOneMultipleColumns) {
  Vector u(3);
  u << 1, 2, 2;
  Vector c(4);
  c << 1, -2, 0.5, 3;
  const PermeanceBracket b = permeance_statistic(u * c.transpose());
  EXPECT_NEAR(b.upper, 3.0 * c.cwiseAbs().sum(), 1e-10);
}

TEST(PermeanceStatistic, RankTwoAgainstGrid) {
  Rng rng(3);
  for (int t = 0; t < 5; ++t) {
    const Matrix l0 = rng.normal_matrix(6, 2) * rng.normal_matrix(2, 9);
    const auto grid = oracle::grid_permeance_rank2(l0);
    const PermeanceBracket exact = permeance_statistic(l0);
    ASSERT_TRUE(exact.exact);
    EXPECT_LE(exact.upper, grid.value + 1e-9);
    EXPECT_GE(exact.upper, grid.value - grid.gap - 1e-9);

    PermeanceStatisticOptions sub;
    sub.max_vertices = 0.0;
    const PermeanceBracket approx = permeance_statistic(l0, {}, sub);
    EXPECT_FALSE(approx.exact);
    EXPECT_LE(approx.lower, exact.upper + 1e-9);
    EXPECT_NEAR(approx.upper, exact.upper, 1e-3 * exact.upper);
  }
}

TEST(PermeanceStatistic, SymmetricConfiguration) {
  // Columns at angles k pi / 4 in the plane: the infimum sits between two columns.
  const double pi = std::acos(-1.0);
  Matrix l0(2, 4);
  for (int k = 0; k < 4; ++k) {
    l0(0, k) = std::cos(k * pi / 4.0);
    l0(1, k) = std::sin(k * pi / 4.0);
  }
  const auto grid = oracle::grid_permeance_rank2(l0);
  const PermeanceBracket b = permeance_statistic(l0);
  EXPECT_NEAR(b.upper, grid.value, 1e-3);
  EXPECT_NEAR(b.upper, 1.0 + std::sqrt(2.0), 1e-9);
}

TEST(SphericalStat, Examples) {
  const SymmetricMatrix p = SymmetricMatrix::identity(4);
  EXPECT_EQ(spherical_stat(p, Matrix::Zero(4, 3)), 0.0);
  Vector w(4);
  w << 1, -2, 0, 3;
  EXPECT_NEAR(spherical_stat(p, w), 1.0, 1e-12);
  Matrix two(4, 2);
  two << 1, 0, 0, 0, 0, 1, 0, 0;
  EXPECT_NEAR(spherical_stat(p, two), 1.0, 1e-12);
  two.col(1) = two.col(0) * 7.0;
  EXPECT_NEAR(spherical_stat(p, two), std::sqrt(2.0), 1e-12);

  Matrix half = Matrix::Identity(4, 4);
  half(0, 0) = 0.0;
  Vector e0 = Vector::Zero(4);
  e0(0) = 5.0;
  EXPECT_EQ(spherical_stat(SymmetricMatrix::from_dense(half), e0), 0.0);
  EXPECT_THROW(spherical_stat(SymmetricMatrix::from_dense(0.5 * Matrix::Identity(4, 4)), e0), PreconditionError);
}

TEST(Harness, TailBoundExamples) {
  const TailCheck big = verify_tail_bound(1, 50, 20.0, 2000, 1);
  EXPECT_EQ(big.events, 0);
  EXPECT_TRUE(big.pass.value());
  // r = m: the squared norm is always 1 > 4t.
  const TailCheck full = verify_tail_bound(5, 5, 0.2, 100, 2);
  EXPECT_EQ(full.events, 100);
  const TailCheck one = verify_tail_bound(2, 10, 1.0, 1, 3);
  EXPECT_FALSE(one.pass.has_value());
  EXPECT_THROW(verify_tail_bound(2, 10, 1.0, 0, 3), PreconditionError);
}

TEST(Harness, TailBoundHolds) {
  for (double t : {1.0, 3.0}) {
    const TailCheck c = verify_tail_bound(3, 40, t, 20000, 5);
    EXPECT_TRUE(c.pass.value()) << t << " " << c.frequency;
  }
}

TEST(Harness, CoherenceBounds) {
  const SignMatrix s = random_schur_sign(15, 3, 9);
  const CoherenceReport c = verify_coherence_bounds(s, 12, 1.0, 500, 10);
  EXPECT_EQ(c.mu_left_violations, 0);
  EXPECT_LE(c.max_mu_left, 1.0 / c.nu + 1e-9);
  const CoherenceReport one = verify_coherence_bounds(s, 12, 1.0, 1, 10);
  EXPECT_TRUE(one.single_draw.has_value());
}

TEST(Harness, GaussianNorm) {
  const TailCheck c = verify_gaussian_norm(10, 8, 2.0, 2000, 11);
  EXPECT_TRUE(c.pass.value()) << c.frequency;
}

TEST(Harness, EmpiricalWidth) {
  const SignMatrix s = random_schur_sign(16, 3, 12);
  const WidthCheck w = verify_empirical_width(s, 20, 500, 13);
  EXPECT_TRUE(w.pass.value()) << w.mean;
  EXPECT_DOUBLE_EQ(w.bound, 4.0);
}

TEST(Harness, MarginalTail) {
  const SignMatrix s = random_schur_sign(16, 3, 14);
  const MarginalTailCheck m = verify_marginal_tail(s, 5, 2000, 15);
  EXPECT_EQ(m.frequencies.size(), 5u);
  EXPECT_TRUE(m.pass.value()) << m.min_frequency;
}

TEST(Harness, SphericalBound) {
  const TailCheck c = verify_spherical_bound(20, 3, 10, 2.0, 2000, 16);
  EXPECT_TRUE(c.pass.value()) << c.frequency;
}

TEST(Harness, PermeanceBound) {
  const SignMatrix s = random_schur_sign(10, 2, 17);
  const PermeanceBoundCheck p = verify_permeance_bound(s, 30, 2.0, 20, 18);
  EXPECT_TRUE(p.check.pass.value());
  EXPECT_TRUE(p.trivial);
}

TEST(BinomialSlack, Definition) {
  EXPECT_DOUBLE_EQ(binomial_slack(0.5, 100), 3.0 * 0.05);
  EXPECT_DOUBLE_EQ(binomial_slack(0.0, 100), 0.0);
}
