#pragma once

// Builders for the block semidefinite programs used by the decomposition
// algorithms, and a solver for the factorization program on its minimal face.
//
// The feasible X of the factorization program is {S diag(tau) S^t}, which has
// rank r < n, so the program has no strictly feasible point in the full
// (n+m)-dimensional cone. solve_factorization_sdp therefore works in range
// coordinates, X = U Q U^t and Y = V R V^t, where the problem is strictly
// feasible and the interior-point method converges to full accuracy.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "signfac/errors.hpp"
#include "signfac/linalg.hpp"
#include "signfac/sdp.hpp"

namespace signfac {

/// min 1/2 (trace X + trace Y) s.t. [[X, B], [B^t, Y]] psd. Optimal value is
/// the nuclear norm of B.
inline LinearSdpProblem build_nuclear_norm_sdp(const Matrix& b) {
  require_finite(b, "build_nuclear_norm_sdp");
  const Index n = b.rows();
  const Index m = b.cols();
  LinearSdpProblem p;
  p.dim = n + m;
  p.sense = Sense::minimize;
  p.objective = SymmetricMatrix::from_dense(0.5 * Matrix::Identity(n + m, n + m));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) {
      SymmetricMatrix a(n + m);
      a.set(i, n + j, 0.5);
      p.constraints.push_back({a, b(i, j)});
    }
  return p;
}

/// The factorization program in its original form: min trace Y s.t.
/// trace(P X) = n, diag X = e, [[X, B], [B^t, Y]] psd, with P the projector
/// onto range(B). Variable side length is n + m.
inline LinearSdpProblem build_factorization_sdp(const Matrix& b, const Tolerances& tol = {}) {
  require_finite(b, "build_factorization_sdp");
  const Index n = b.rows();
  const Index m = b.cols();
  const Matrix proj = range_projector(b, tol);
  LinearSdpProblem p;
  p.dim = n + m;
  p.sense = Sense::minimize;
  Matrix c = Matrix::Zero(n + m, n + m);
  c.bottomRightCorner(m, m).setIdentity();
  p.objective = SymmetricMatrix::from_dense(c);
  Matrix pa = Matrix::Zero(n + m, n + m);
  pa.topLeftCorner(n, n) = proj;
  p.constraints.push_back({SymmetricMatrix::from_dense(pa), static_cast<double>(n)});
  for (Index i = 0; i < n; ++i) {
    SymmetricMatrix a(n + m);
    a.set(i, i, 1.0);
    p.constraints.push_back({a, 1.0});
  }
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) {
      SymmetricMatrix a(n + m);
      a.set(i, n + j, 0.5);
      p.constraints.push_back({a, b(i, j)});
    }
  return p;
}

/// Constraints on Q (r x r) expressing diag(U Q U^t) = e for a basis U whose
/// range is spanned by a Schur-independent family of r sign vectors. The map
/// Q -> diag(U Q U^t) then has rank 1 + r(r-1)/2, and its leading left
/// singular directions c_j give the constraints trace(U^t diag(c_j) U Q) = c_j^t e.
struct CorrelationFace {
  std::vector<SdpConstraint> constraints;
  /// ||e - C C^t e|| / sqrt(n): part of diag = e lost to the projection.
  double inconsistency = 0.0;
  /// sigma_{k+1} / sigma_1 of the diagonal map (0 when k equals its width).
  double spectral_gap = 0.0;
  /// Symmetric r x r matrices spanning the null space of the constraints.
  std::vector<Matrix> null_directions;
};

inline CorrelationFace correlation_face(const Matrix& u) {
  const Index n = u.rows();
  const Index r = u.cols();
  const Index width = r * (r + 1) / 2;
  const Index k = 1 + r * (r - 1) / 2;
  if (k > n)
    throw HypothesisViolation("range dimension " + std::to_string(r) + " exceeds the sign cardinality bound for n = " +
                              std::to_string(n));
  Matrix f(n, width);
  Index col = 0;
  for (Index a = 0; a < r; ++a)
    for (Index c = a; c < r; ++c, ++col)
      f.col(col) = a == c ? u.col(a).cwiseAbs2().eval()
                          : (std::sqrt(2.0) * u.col(a).cwiseProduct(u.col(c))).eval();
  Eigen::BDCSVD<Matrix> svd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  if (sv(k - 1) <= 1e-9 * sv(0))
    throw HypothesisViolation("range is not spanned by a Schur-independent sign family (diagonal map is degenerate)",
                              sv(k - 1) / sv(0));
  const Matrix lead = svd.matrixU().leftCols(k);
  const Vector e = Vector::Ones(n);
  CorrelationFace face;
  face.inconsistency = (e - lead * (lead.transpose() * e)).norm() / std::sqrt(static_cast<double>(n));
  face.spectral_gap = k < sv.size() ? sv(k) / sv(0) : 0.0;
  for (Index j = 0; j < k; ++j) {
    const Matrix a = u.transpose() * lead.col(j).asDiagonal() * u;
    face.constraints.push_back({SymmetricMatrix::from_dense(a), lead.col(j).sum()});
  }
  const Matrix& rv = svd.matrixV();
  for (Index j = k; j < width; ++j) {
    Matrix d = Matrix::Zero(r, r);
    Index idx = 0;
    for (Index a = 0; a < r; ++a)
      for (Index c = a; c < r; ++c, ++idx) {
        if (a == c) {
          d(a, a) = rv(idx, j);
        } else {
          d(a, c) = d(c, a) = rv(idx, j) / std::sqrt(2.0);
        }
      }
    face.null_directions.push_back(d);
  }
  return face;
}

namespace detail {

// Newton's method for min trace(Q^{-1} G) over Q = Q0 + sum_t theta_t N_t,
// Q positive definite. This is the factorization program after eliminating
// Y = K^t Q^{-1} K; it refines an interior-point solution to full precision.
inline int polish_face_minimizer(Matrix& q, const Matrix& g, const std::vector<Matrix>& dirs) {
  const auto d = static_cast<Index>(dirs.size());
  if (d == 0) return 0;
  auto value = [&](const Matrix& m, double& out) {
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) return false;
    out = llt.solve(g).trace();
    return std::isfinite(out);
  };
  double f;
  if (!value(q, f)) return 0;
  int steps = 0;
  for (; steps < 50; ++steps) {
    const Matrix qinv = Eigen::LLT<Matrix>(q).solve(Matrix::Identity(q.rows(), q.cols()));
    const Matrix qgq = qinv * g * qinv;
    std::vector<Matrix> qn(static_cast<std::size_t>(d));
    for (Index t = 0; t < d; ++t) qn[static_cast<std::size_t>(t)] = qinv * dirs[static_cast<std::size_t>(t)];
    Vector grad(d);
    Matrix hess(d, d);
    for (Index t = 0; t < d; ++t) {
      grad(t) = -(qgq.array() * dirs[static_cast<std::size_t>(t)].array()).sum();
      for (Index u = t; u < d; ++u)
        hess(t, u) = hess(u, t) =
            2.0 * (qn[static_cast<std::size_t>(t)] * qn[static_cast<std::size_t>(u)] * qinv * g).trace();
    }
    Eigen::LDLT<Matrix> ldlt(hess);
    const Vector step = -ldlt.solve(grad);
    const double decrement = -grad.dot(step);
    if (!step.allFinite() || !(decrement > 0.0) || decrement <= 1e-15 * std::abs(f)) break;
    double alpha = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
      Matrix trial = q;
      for (Index t = 0; t < d; ++t) trial += alpha * step(t) * dirs[static_cast<std::size_t>(t)];
      double ft;
      if (value(trial, ft) && ft <= f - 0.25 * alpha * decrement) {
        q = trial;
        f = ft;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return steps;
}

// Least-norm correction of Q onto the affine set of the face constraints.
inline void project_onto_face(Matrix& q, const std::vector<SdpConstraint>& cons) {
  const auto k = static_cast<Index>(cons.size());
  Matrix gram(k, k);
  Vector resid(k);
  std::vector<Matrix> dense(cons.size());
  for (Index j = 0; j < k; ++j) dense[static_cast<std::size_t>(j)] = cons[static_cast<std::size_t>(j)].a.dense();
  for (Index j = 0; j < k; ++j) {
    resid(j) = cons[static_cast<std::size_t>(j)].b - (dense[static_cast<std::size_t>(j)].array() * q.array()).sum();
    for (Index l = j; l < k; ++l)
      gram(j, l) = gram(l, j) = (dense[static_cast<std::size_t>(j)].array() * dense[static_cast<std::size_t>(l)].array()).sum();
  }
  const Vector coef = gram.ldlt().solve(resid);
  for (Index j = 0; j < k; ++j) q += coef(j) * dense[static_cast<std::size_t>(j)];
}

}  // namespace detail

struct FactorizationSdpResult {
  Matrix x;  ///< n x n block
  Matrix y;  ///< m x m block
  Matrix u;  ///< orthonormal basis of range(B)
  Matrix v;  ///< orthonormal basis of range(B^t)
  SdpSolution solution;  ///< solution of the reduced (2r-dimensional) program
  double face_inconsistency = 0.0;
  int polish_steps = 0;
};

/// Solves the factorization program on its minimal face. r = numerical rank of B.
/// With polish set, the interior-point solution is refined by Newton steps on
/// the same program with Y eliminated.
inline FactorizationSdpResult solve_factorization_sdp(const Matrix& b, const Tolerances& tol = {},
                                                      const SdpOptions& opts = {}, bool polish = true) {
  require_finite(b, "solve_factorization_sdp");
  Eigen::BDCSVD<Matrix> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const int r = rank_from_singular_values(svd.singularValues(), tol.rank_cutoff(b.rows(), b.cols()));
  if (r == 0) throw PreconditionError("solve_factorization_sdp: input matrix is zero");
  FactorizationSdpResult out;
  out.u = svd.matrixU().leftCols(r);
  out.v = svd.matrixV().leftCols(r);
  const CorrelationFace face = correlation_face(out.u);
  out.face_inconsistency = face.inconsistency;

  const Matrix coupling = out.u.transpose() * b * out.v;
  LinearSdpProblem p;
  p.dim = 2 * r;
  p.sense = Sense::minimize;
  Matrix c = Matrix::Zero(2 * r, 2 * r);
  c.bottomRightCorner(r, r).setIdentity();
  p.objective = SymmetricMatrix::from_dense(c);
  for (const auto& con : face.constraints) {
    SymmetricMatrix a(2 * r);
    for (Index j = 0; j < r; ++j)
      for (Index i = 0; i <= j; ++i) a.set(i, j, con.a(i, j));
    p.constraints.push_back({a, con.b});
  }
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < r; ++j) {
      SymmetricMatrix a(2 * r);
      a.set(i, r + j, 0.5);
      p.constraints.push_back({a, coupling(i, j)});
    }

  out.solution = solve_linear_sdp(p, opts);
  if (!out.solution.converged)
    throw NonConvergenceError("factorization SDP did not converge (" + out.solution.status + ", " +
                              std::to_string(out.solution.iterations) + " iterations)");
  const Matrix z = out.solution.x.dense();
  Matrix q = z.topLeftCorner(r, r);
  Matrix rblock = z.bottomRightCorner(r, r);
  if (polish) {
    Matrix refined = q;
    detail::project_onto_face(refined, face.constraints);
    out.polish_steps = detail::polish_face_minimizer(refined, coupling * coupling.transpose(), face.null_directions);
    Eigen::LLT<Matrix> llt(refined);
    if (llt.info() == Eigen::Success) {
      q = refined;
      rblock = coupling.transpose() * llt.solve(coupling);
    }
  }
  out.x = out.u * q * out.u.transpose();
  out.y = out.v * rblock * out.v.transpose();
  return out;
}

}  // namespace signfac
