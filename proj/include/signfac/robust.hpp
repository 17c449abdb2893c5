#pragma once

// Denoising front-ends: principal component pursuit for sparse gross errors,
// REAPER for column outliers, and the denoise-then-factorize pipelines.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "signfac/decompose.hpp"
#include "signfac/errors.hpp"
#include "signfac/linalg.hpp"

namespace signfac {

inline double default_pcp_lambda(Index n, Index m) {
  if (n < 1 || m < 1) throw PreconditionError("default_pcp_lambda: dimensions must be positive");
  return 1.0 / std::sqrt(static_cast<double>(std::max(n, m)));
}

struct PcpOptions {
  std::optional<double> lambda;  ///< defaults to 1/sqrt(max(n, m))
  double tol = 1e-7;
  int max_iter = 2000;
};

struct PcpResult {
  Matrix l;
  Matrix omega;
  double objective = 0.0;  ///< ||L||_S1 + lambda ||Omega||_l1
  double lambda = 0.0;
  int iterations = 0;
  double split_residual = 0.0;  ///< ||B - L - Omega||_F
  bool converged = false;
};

inline double pcp_objective(const Matrix& l, const Matrix& omega, double lambda) {
  return nuclear_norm(l) + lambda * omega.cwiseAbs().sum();
}

namespace detail {

inline Matrix soft_threshold(const Matrix& m, double t) {
  return m.unaryExpr([t](double v) { return v > t ? v - t : (v < -t ? v + t : 0.0); });
}

inline Matrix singular_value_threshold(const Matrix& m, double t) {
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  Index keep = 0;
  while (keep < sv.size() && sv(keep) > t) ++keep;
  if (keep == 0) return Matrix::Zero(m.rows(), m.cols());
  const Vector shrunk = (sv.head(keep).array() - t).matrix();
  return svd.matrixU().leftCols(keep) * shrunk.asDiagonal() * svd.matrixV().leftCols(keep).transpose();
}

}  // namespace detail

/// Principal component pursuit by the alternating direction method with
/// residual balancing of the penalty parameter.
inline PcpResult pcp_denoise(const Matrix& b, const PcpOptions& opts = {}) {
  require_finite(b, "pcp_denoise");
  if (!(opts.tol > 0.0)) throw PreconditionError("pcp_denoise: tol must be positive");
  if (opts.max_iter < 1) throw PreconditionError("pcp_denoise: max_iter must be positive");
  const Index n = b.rows();
  const Index m = b.cols();
  PcpResult out;
  out.lambda = opts.lambda.value_or(default_pcp_lambda(n, m));
  if (!(out.lambda > 0.0)) throw PreconditionError("pcp_denoise: lambda must be positive");
  out.l = Matrix::Zero(n, m);
  out.omega = Matrix::Zero(n, m);
  const double l1 = b.cwiseAbs().sum();
  if (l1 == 0.0) {
    out.converged = true;
    return out;
  }
  const double bnorm = b.norm();
  const double stop = opts.tol * (1.0 + bnorm);
  double mu = static_cast<double>(n * m) / (4.0 * l1);
  Matrix y = Matrix::Zero(n, m);
  for (int it = 1; it <= opts.max_iter; ++it) {
    out.l = detail::singular_value_threshold(b - out.omega + y / mu, 1.0 / mu);
    const Matrix prev = out.omega;
    out.omega = detail::soft_threshold(b - out.l + y / mu, out.lambda / mu);
    const Matrix split = b - out.l - out.omega;
    y += mu * split;
    const double primal = split.norm();
    const double dual = mu * (out.omega - prev).norm();
    out.iterations = it;
    out.split_residual = primal;
    if (primal <= stop && dual <= stop) {
      out.converged = true;
      break;
    }
    if (primal > 10.0 * dual) {
      mu *= 2.0;
    } else if (dual > 10.0 * primal) {
      mu /= 2.0;
    }
  }
  out.objective = pcp_objective(out.l, out.omega, out.lambda);
  return out;
}

struct ReaperOptions {
  double tol = 1e-9;
  int max_iter = 500;
  std::optional<double> delta;  ///< defaults to 1e-10 ||B||_F
};

struct ReaperResult {
  Matrix p;  ///< rounded rank-r orthogonal projector
  double objective = 0.0;  ///< sum_i ||(I - P) b_i||
  int iterations = 0;
  double trace_residual = 0.0;       ///< |trace P - r|
  double min_eig_p = 0.0;            ///< min eigenvalue of P
  double min_eig_complement = 0.0;   ///< min eigenvalue of I - P
  std::vector<double> history;       ///< objective after each iterate, starting from the PCA initializer
  bool converged = false;
};

inline double reaper_objective(const Matrix& b, const Matrix& p) {
  const Matrix resid = b - p * b;
  return resid.colwise().norm().sum();
}

namespace detail {

inline Matrix top_projector(const Matrix& c, int r) {
  const Matrix v = sym_eig(c).vectors.leftCols(r);
  return v * v.transpose();
}

}  // namespace detail

/// REAPER by iteratively reweighted least squares. Each weighted subproblem
/// over {trace P = r, 0 <= P <= I} is solved exactly by the top-r
/// eigenprojector of the weighted covariance.
inline ReaperResult reaper(const Matrix& b, int r, const ReaperOptions& opts = {}) {
  require_finite(b, "reaper");
  const Index n = b.rows();
  if (r < 1 || r >= n) throw PreconditionError("reaper: rank must satisfy 1 <= r < n");
  if (!(opts.tol > 0.0)) throw PreconditionError("reaper: tol must be positive");
  if (opts.max_iter < 1) throw PreconditionError("reaper: max_iter must be positive");
  const double bnorm = b.norm();
  const double delta0 = opts.delta.value_or(1e-10 * bnorm);
  if (opts.delta && !(*opts.delta > 0.0)) throw PreconditionError("reaper: delta must be positive");

  ReaperResult out;
  out.p = detail::top_projector(b * b.transpose(), r);
  double f = reaper_objective(b, out.p);
  out.history.push_back(f);
  double delta = delta0 > 0.0 ? delta0 : std::numeric_limits<double>::min();
  const double delta_floor = delta * 1e-6;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const Vector d = (b - out.p * b).colwise().norm().transpose();
    Vector beta(d.size());
    for (Index i = 0; i < d.size(); ++i) beta(i) = 1.0 / std::max(delta, d(i));
    const Matrix c = b * beta.asDiagonal() * b.transpose();
    const Matrix next = detail::top_projector(c, r);
    const double f_next = reaper_objective(b, next);
    out.p = next;
    out.history.push_back(f_next);
    out.iterations = it;
    const double decrease = f - f_next;
    f = f_next;
    if (decrease < opts.tol * (1.0 + f)) {
      out.converged = true;
      break;
    }
    delta = std::max(0.5 * delta, delta_floor);
  }
  out.p = detail::top_projector(out.p, r);
  out.objective = reaper_objective(b, out.p);
  const SymEig eig = sym_eig(out.p);
  out.trace_residual = std::abs(out.p.trace() - static_cast<double>(r));
  out.min_eig_p = eig.values(eig.values.size() - 1);
  out.min_eig_complement = 1.0 - eig.values(0);
  return out;
}

/// Columns fixed by the projector: ||(I - P) b_i|| <= tol (1 + ||b_i||).
inline std::vector<int> select_inliers(const Matrix& b, const Matrix& p, double tol = 1e-6) {
  if (p.rows() != p.cols() || p.rows() != b.rows())
    throw PreconditionError("select_inliers: projector side length must match the row count of B");
  std::vector<int> out;
  for (Index i = 0; i < b.cols(); ++i) {
    const double resid = (b.col(i) - p * b.col(i)).norm();
    if (resid <= tol * (1.0 + b.col(i).norm())) out.push_back(static_cast<int>(i));
  }
  return out;
}

struct SparsePipelineOptions {
  PcpOptions pcp;
  Tolerances tol;
  std::uint64_t seed = 0;
};

struct SparsePipelineResult {
  PcpResult pcp;
  SignDecomposition decomposition;
};

/// PCP, then asym_scd on the low-rank part. When PCP finds no corruption the
/// input itself is factorized.
inline SparsePipelineResult denoise_factorize_sparse(const Matrix& b, const SparsePipelineOptions& opts = {}) {
  SparsePipelineResult out;
  out.pcp = pcp_denoise(b, opts.pcp);
  if (!out.pcp.converged)
    throw NonConvergenceError("denoise_factorize_sparse: PCP did not converge in " +
                              std::to_string(out.pcp.iterations) + " iterations (split residual " +
                              std::to_string(out.pcp.split_residual) + ")");
  const bool clean = (out.pcp.omega.array() == 0.0).all();
  out.decomposition = asym_scd(clean ? b : out.pcp.l, opts.tol, opts.seed);
  return out;
}

struct OutlierPipelineOptions {
  ReaperOptions reaper;
  double inlier_tol = 1e-6;
  Tolerances tol;
  std::uint64_t seed = 0;
};

struct OutlierPipelineResult {
  ReaperResult reaper;
  std::vector<int> inliers;
  SignDecomposition decomposition;
};

/// REAPER, inlier selection, then asym_scd on the inlier columns.
inline OutlierPipelineResult denoise_factorize_outliers(const Matrix& b, int r, const OutlierPipelineOptions& opts = {}) {
  OutlierPipelineResult out;
  out.reaper = reaper(b, r, opts.reaper);
  out.inliers = select_inliers(b, out.reaper.p, opts.inlier_tol);
  if (static_cast<int>(out.inliers.size()) < r)
    throw HypothesisViolation("denoise_factorize_outliers: only " + std::to_string(out.inliers.size()) +
                              " inlier columns found, fewer than the rank " + std::to_string(r));
  Matrix sub(b.rows(), static_cast<Index>(out.inliers.size()));
  for (std::size_t k = 0; k < out.inliers.size(); ++k) sub.col(static_cast<Index>(k)) = b.col(out.inliers[k]);
  if (numerical_rank(sub, opts.tol) != r)
    throw HypothesisViolation("denoise_factorize_outliers: inlier columns do not have rank " + std::to_string(r));
  out.decomposition = asym_scd(sub, opts.tol, opts.seed);
  return out;
}

}  // namespace signfac
