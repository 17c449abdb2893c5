#include <set>

#include <gtest/gtest.h>

#include "signfac/matching.hpp"
#include "signfac/models.hpp"
#include "signfac/robust.hpp"
#include "signfac/stats.hpp"

using namespace signfac;

namespace {

SignMatrix permeant_sign(int n, int r, std::uint64_t seed, double nu = 0.5) {
  for (std::uint64_t k = 0;; ++k) {
    SignMatrix s = random_schur_sign(n, r, seed + k);
    if (permeance(s) >= nu) return s;
  }
}

}  // namespace

TEST(DefaultPcpLambda, Examples) {
  EXPECT_DOUBLE_EQ(default_pcp_lambda(100, 50), 0.1);
  EXPECT_DOUBLE_EQ(default_pcp_lambda(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(default_pcp_lambda(4, 9), 1.0 / 3.0);
  EXPECT_THROW(default_pcp_lambda(0, 3), PreconditionError);
}

TEST(Pcp, ZeroInput) {
  const PcpResult r = pcp_denoise(Matrix::Zero(4, 5));
  EXPECT_TRUE(r.converged);
  EXPECT_TRUE(r.l.isZero());
  EXPECT_TRUE(r.omega.isZero());
}

TEST(Pcp, CleanRankOne) {
  Rng rng(1);
  const Vector u = rng.normal_vector(20);
  const Vector v = rng.normal_vector(15);
  const Matrix b = u * v.transpose();
  const PcpResult r = pcp_denoise(b);
  ASSERT_TRUE(r.converged);
  EXPECT_LE((r.l - b).norm(), 1e-6 * b.norm());
  EXPECT_LE(r.omega.norm(), 1e-6 * b.norm());
  EXPECT_LE(pcp_objective(b, Matrix::Zero(20, 15), r.lambda), r.objective + 1e-6 * b.norm());
}

TEST(Pcp, SparseGlmInstance) {
  const SignMatrix s = permeant_sign(40, 2, 10);
  const CorruptionInstance inst = sample_sparse_instance(s, 40, 80, 5.0, 11);
  const PcpResult r = pcp_denoise(inst.b);
  ASSERT_TRUE(r.converged);
  EXPECT_LE((r.l - inst.l0).norm(), 1e-4 * inst.l0.norm());
  EXPECT_LE((inst.b - r.l - r.omega).norm(), 1e-7 * (1.0 + inst.b.norm()));
  const double witness = pcp_objective(inst.l0, inst.omega0, r.lambda);
  EXPECT_LE(r.objective, witness + 1e-6 * witness);
}

TEST(Pcp, IterationBudgetReportsNonConvergence) {
  const SignMatrix s = permeant_sign(40, 2, 10);
  const CorruptionInstance inst = sample_sparse_instance(s, 40, 80, 5.0, 12);
  PcpOptions opts;
  opts.max_iter = 2;
  const PcpResult r = pcp_denoise(inst.b, opts);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 2);
}

TEST(Reaper, CleanSubspace) {
  Rng rng(2);
  const Matrix basis = orth_basis(rng.normal_matrix(8, 2));
  const Matrix b = basis * rng.normal_matrix(2, 30);
  const ReaperResult r = reaper(b, 2);
  EXPECT_LE((r.p - basis * basis.transpose()).norm(), 1e-8);
  EXPECT_LE(r.objective, 1e-8 * b.norm());
}

TEST(Reaper, SingleColumnFullRank) {
  Vector b(4);
  b << 1, 2, -1, 0.5;
  const ReaperResult r = reaper(b, 3);
  EXPECT_LE(r.objective, 1e-12);
  EXPECT_LE(r.trace_residual, 1e-8);
  EXPECT_GE(r.min_eig_p, -1e-8);
  EXPECT_GE(r.min_eig_complement, -1e-8);
}

TEST(Reaper, OutlierInstance) {
  const SignMatrix s = random_schur_sign(30, 3, 20);
  const CorruptionInstance inst = sample_inlier_outlier(s, 200, 30, 21);
  const ReaperResult r = reaper(inst.b, 3);
  const Matrix p0 = range_projector(inst.l0);
  EXPECT_LE(spectral_norm(r.p - p0), 1e-3);
  EXPECT_LE(r.objective, reaper_objective(inst.b, p0) + 1e-9 * inst.b.norm());
  for (std::size_t k = 1; k < r.history.size(); ++k) EXPECT_LE(r.history[k], r.history[k - 1] * (1.0 + 1e-12)) << k;
  EXPECT_EQ(select_inliers(inst.b, r.p), inst.inliers);
}

TEST(Reaper, RejectsBadRank) {
  EXPECT_THROW(reaper(Matrix::Ones(3, 4), 3), PreconditionError);
  EXPECT_THROW(reaper(Matrix::Ones(3, 4), 0), PreconditionError);
}

TEST(SelectInliers, Examples) {
  Matrix p = Matrix::Zero(3, 3);
  p(0, 0) = 1.0;
  Matrix b(3, 2);
  b << 2, 0, 0, 1, 0, 0;
  EXPECT_EQ(select_inliers(b, p), (std::vector<int>{0}));
  b(1, 1) = 0.0;
  b(0, 1) = -3.0;
  EXPECT_EQ(select_inliers(b, p), (std::vector<int>{0, 1}));
}

TEST(SparsePipeline, CleanInputMatchesAsymScd) {
  const SignMatrix s = random_schur_sign(40, 3, 30);
  Rng rng(31);
  const Matrix b = s.dense() * rng.normal_matrix(26, 3).transpose();
  const SparsePipelineResult p = denoise_factorize_sparse(b);
  ASSERT_TRUE(p.pcp.omega.isZero());
  const SignDecomposition d = asym_scd(b);
  EXPECT_EQ(p.decomposition.s, d.s);
  EXPECT_EQ(p.decomposition.w, d.w);
}

TEST(SparsePipeline, DeskInstance) {
  const SignMatrix s = permeant_sign(40, 2, 40);
  const CorruptionInstance inst = sample_sparse_instance(s, 40, 80, 5.0, 41);
  const SparsePipelineResult p = denoise_factorize_sparse(inst.b);
  EXPECT_TRUE(match_signed_permutation(s, p.decomposition.s));
}

TEST(SparsePipeline, OverwhelmingCorruptionIsAnError) {
  const SignMatrix s = permeant_sign(20, 2, 50);
  const CorruptionInstance inst = sample_sparse_instance(s, 20, 200, 50.0, 51);
  EXPECT_THROW(denoise_factorize_sparse(inst.b), Error);
}

TEST(OutlierPipeline, NoOutliersMatchesAsymScd) {
  const SignMatrix s = random_schur_sign(12, 3, 60);
  const CorruptionInstance inst = sample_inlier_outlier(s, 20, 0, 61);
  const OutlierPipelineResult p = denoise_factorize_outliers(inst.b, 3);
  EXPECT_EQ(p.inliers.size(), 20u);
  EXPECT_EQ(p.decomposition.s, asym_scd(inst.b).s);
}

TEST(OutlierPipeline, DeskInstance) {
  const SignMatrix s = random_schur_sign(30, 3, 70);
  const CorruptionInstance inst = sample_inlier_outlier(s, 200, 30, 71);
  const OutlierPipelineResult p = denoise_factorize_outliers(inst.b, 3);
  EXPECT_TRUE(match_signed_permutation(s, p.decomposition.s));
}

TEST(OutlierPipeline, AllOutliersIsAnError) {
  Rng rng(80);
  EXPECT_THROW(denoise_factorize_outliers(rng.normal_matrix(10, 30), 3), HypothesisViolation);
}

TEST(SampleGlm, Examples) {
  const SignMatrix s(Matrix::Ones(5, 1));
  const GlmInstance g = sample_glm(s, 4, 3);
  EXPECT_LE((g.l0 - s.dense() * g.g.transpose()).norm(), 1e-15);
  EXPECT_EQ(numerical_rank(g.l0), 1);
  EXPECT_EQ(sample_glm(s, 4, 3).l0, g.l0);
  EXPECT_THROW(sample_glm(random_schur_sign(8, 3, 1), 2, 0), PreconditionError);
  Matrix dup(4, 2);
  dup << 1, 1, -1, -1, 1, 1, 1, 1;
  EXPECT_THROW(sample_glm(SignMatrix(dup), 5, 0), PreconditionError);
}

TEST(SampleGlm, SecondMoment) {
  const SignMatrix s = random_schur_sign(8, 2, 90);
  const int m = 10;
  Matrix acc = Matrix::Zero(8, 8);
  const int draws = 2000;
  for (int k = 0; k < draws; ++k) {
    const Matrix l0 = sample_glm(s, m, 1000 + static_cast<std::uint64_t>(k)).l0;
    acc += l0 * l0.transpose();
  }
  acc /= draws;
  const Matrix expected = static_cast<double>(m) / 2.0 * s.dense() * s.dense().transpose();
  EXPECT_LE((acc - expected).norm(), 0.05 * expected.norm());
}

TEST(SampleSparseCorruption, Examples) {
  EXPECT_TRUE(sample_sparse_corruption(4, 5, 0, 3.0, 1).isZero());
  const Matrix dense = sample_sparse_corruption(4, 5, 20, 3.0, 1);
  EXPECT_TRUE((dense.array().abs() == 3.0).all());
  const Matrix some = sample_sparse_corruption(40, 40, 100, 5.0, 2);
  EXPECT_EQ((some.array() != 0.0).count(), 100);
  EXPECT_THROW(sample_sparse_corruption(2, 2, 5, 1.0, 0), PreconditionError);
}

TEST(SampleSparseCorruption, SupportIsUniform) {
  // Chi-square over cell hit counts: 4 x 5 grid, 5 cells per draw.
  const int cells = 20;
  const int draws = 4000;
  std::vector<double> hits(cells, 0.0);
  for (int k = 0; k < draws; ++k) {
    const Matrix m = sample_sparse_corruption(4, 5, 5, 1.0, 500 + static_cast<std::uint64_t>(k));
    for (Index j = 0; j < 5; ++j)
      for (Index i = 0; i < 4; ++i)
        if (m(i, j) != 0.0) hits[static_cast<std::size_t>(j * 4 + i)] += 1.0;
  }
  const double expected = draws * 5.0 / cells;
  double chi2 = 0.0;
  for (double h : hits) chi2 += (h - expected) * (h - expected) / expected;
  // 19 degrees of freedom; 0.999 quantile is about 43.8.
  EXPECT_LT(chi2, 43.8);
}

TEST(SampleInlierOutlier, Bookkeeping) {
  const SignMatrix s = random_schur_sign(10, 2, 3);
  const CorruptionInstance none = sample_inlier_outlier(s, 12, 0, 4);
  ASSERT_EQ(none.b.cols(), 12);
  for (int j = 0; j < 12; ++j) EXPECT_EQ(none.b.col(j), none.l0.col(none.perm[static_cast<std::size_t>(j)]));

  const CorruptionInstance inst = sample_inlier_outlier(s, 12, 7, 5);
  std::set<int> all(inst.inliers.begin(), inst.inliers.end());
  all.insert(inst.outliers.begin(), inst.outliers.end());
  EXPECT_EQ(inst.inliers.size(), 12u);
  EXPECT_EQ(all.size(), 19u);
  const Matrix p = range_projector(inst.l0);
  for (int j : inst.inliers) EXPECT_LE((inst.b.col(j) - p * inst.b.col(j)).norm(), 1e-10);
  for (int j : inst.outliers) EXPECT_GT((inst.b.col(j) - p * inst.b.col(j)).norm(), 1e-3);
}
