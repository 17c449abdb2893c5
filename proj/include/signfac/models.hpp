#pragma once

// Seeded generative models: Gaussian loadings, sparse gross corruption, and
// inlier/outlier column mixing.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "signfac/errors.hpp"
#include "signfac/linalg.hpp"
#include "signfac/rng.hpp"
#include "signfac/schur.hpp"

namespace signfac {

struct GlmInstance {
  SignMatrix s;
  Matrix l0;  ///< (1/sqrt r) S G^t
  Matrix g;   ///< m x r standard normal
  std::uint64_t seed = 0;
};

inline GlmInstance sample_glm(const SignMatrix& s, int m, std::uint64_t seed, bool check_schur = true) {
  const auto r = static_cast<int>(s.cols());
  if (r < 1) throw PreconditionError("sample_glm: sign matrix has no columns");
  if (m < r) throw PreconditionError("sample_glm: m = " + std::to_string(m) + " is smaller than r = " + std::to_string(r));
  if (check_schur && !is_schur_sign(s)) throw PreconditionError("sample_glm: sign matrix is not Schur independent");
  GlmInstance out;
  out.s = s;
  out.seed = seed;
  Rng rng(seed);
  out.g = rng.normal_matrix(m, r);
  out.l0 = s.dense() * out.g.transpose() / std::sqrt(static_cast<double>(r));
  if (check_schur && numerical_rank(out.l0) != r)
    throw HypothesisViolation("sample_glm: drawn loadings are rank deficient");
  return out;
}

/// n x m matrix with exactly omega nonzeros of value +-magnitude on a uniformly
/// random support.
inline Matrix sample_sparse_corruption(int n, int m, long long omega, double magnitude, std::uint64_t seed) {
  if (n < 1 || m < 1) throw PreconditionError("sample_sparse_corruption: dimensions must be positive");
  const long long total = static_cast<long long>(n) * m;
  if (omega < 0 || omega > total)
    throw PreconditionError("sample_sparse_corruption: omega = " + std::to_string(omega) + " outside [0, " +
                            std::to_string(total) + "]");
  if (!std::isfinite(magnitude)) throw PreconditionError("sample_sparse_corruption: magnitude must be finite");
  Rng rng(seed);
  std::vector<long long> cells(static_cast<std::size_t>(total));
  for (long long i = 0; i < total; ++i) cells[static_cast<std::size_t>(i)] = i;
  // Partial Fisher-Yates: the first omega cells form a uniform subset.
  for (long long i = 0; i < omega; ++i) {
    const auto j = i + static_cast<long long>(rng.uniform_index(static_cast<std::uint64_t>(total - i)));
    std::swap(cells[static_cast<std::size_t>(i)], cells[static_cast<std::size_t>(j)]);
  }
  Matrix out = Matrix::Zero(n, m);
  for (long long i = 0; i < omega; ++i) {
    const long long c = cells[static_cast<std::size_t>(i)];
    out(static_cast<Index>(c % n), static_cast<Index>(c / n)) = rng.sign() * magnitude;
  }
  return out;
}

enum class CorruptionModel { sparse, outlier };

struct CorruptionInstance {
  CorruptionModel model = CorruptionModel::sparse;
  Matrix b;
  SignMatrix s;
  Matrix l0;
  Matrix omega0;
  /// Outlier model: column j of B is column perm[j] of [L0 Omega0].
  std::vector<int> perm;
  std::vector<int> inliers;
  std::vector<int> outliers;
};

/// B = L0 + Omega0 with L0 ~ GLM(S, m) and omega sparse entries of size magnitude.
inline CorruptionInstance sample_sparse_instance(const SignMatrix& s, int m, long long omega, double magnitude,
                                                 std::uint64_t seed) {
  CorruptionInstance out;
  out.model = CorruptionModel::sparse;
  out.s = s;
  out.l0 = sample_glm(s, m, splitmix64(seed ^ 0x1ULL)).l0;
  out.omega0 = sample_sparse_corruption(static_cast<int>(s.rows()), m, omega, magnitude, splitmix64(seed ^ 0x2ULL));
  out.b = out.l0 + out.omega0;
  return out;
}

/// B = [L0 Omega0] Pi with L0 ~ GLM(S, m), standard normal Omega0 (n x m') and a
/// uniformly random column permutation Pi.
inline CorruptionInstance sample_inlier_outlier(const SignMatrix& s, int m, int m_prime, std::uint64_t seed) {
  if (m_prime < 0) throw PreconditionError("sample_inlier_outlier: m_prime must be nonnegative");
  const Index n = s.rows();
  CorruptionInstance out;
  out.model = CorruptionModel::outlier;
  out.s = s;
  out.l0 = sample_glm(s, m, splitmix64(seed ^ 0x1ULL)).l0;
  Rng noise(splitmix64(seed ^ 0x2ULL));
  out.omega0 = noise.normal_matrix(n, m_prime);
  Rng shuffle(splitmix64(seed ^ 0x3ULL));
  const int total = m + m_prime;
  out.perm = shuffle.permutation(total);
  out.b.resize(n, total);
  for (int j = 0; j < total; ++j) {
    const int src = out.perm[static_cast<std::size_t>(j)];
    if (src < m) {
      out.b.col(j) = out.l0.col(src);
      out.inliers.push_back(j);
    } else {
      out.b.col(j) = out.omega0.col(src - m);
      out.outliers.push_back(j);
    }
  }
  return out;
}

}  // namespace signfac
