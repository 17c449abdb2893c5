#pragma once

// Symmetric sign component decomposition of correlation matrices, asymmetric
// sign component decomposition, binary component decomposition, and the
// planted-basis solvers built on them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "signfac/errors.hpp"
#include "signfac/factorization_sdp.hpp"
#include "signfac/linalg.hpp"
#include "signfac/rng.hpp"
#include "signfac/schur.hpp"
#include "signfac/sdp.hpp"

namespace signfac {

struct SymScdResult {
  SignMatrix s;
  Vector tau;
  double residual = 0.0;  ///< ||A - S diag(tau) S^t||_F / ||A||_F
  int redraws = 0;        ///< Gaussian directions redrawn after failed extractions
  int sdp_iterations = 0;
  std::vector<double> zetas;
};

struct SignDecomposition {
  SignMatrix s;
  Matrix w;
  double residual = 0.0;  ///< ||B - S W^t||_F / ||B||_F
  int sdp_iterations = 0;
  int redraws = 0;
  double face_inconsistency = 0.0;
};

struct BinaryDecomposition {
  BinaryMatrix z;
  Matrix wplus;
  double residual = 0.0;  ///< ||C - Z Wplus^t||_F / ||C||_F
  double xi_residual = 0.0;
  int sdp_iterations = 0;
};

/// Threshold on the top eigenvalue of a rank-one candidate, relative to n.
inline constexpr double kRankOneEigenFraction = 1.0 - 1e-4;

/// Sign vector s with X = s s^t, read off the top eigenpair, or nullopt when X
/// is not numerically rank one with +-1 entries.
inline std::optional<Vector> extract_sign_vector(const Matrix& x, const Tolerances& tol, double* lambda = nullptr) {
  const auto n = static_cast<double>(x.rows());
  const SymEig eig = sym_eig(x);
  if (lambda != nullptr) *lambda = eig.values(0);
  if (!(eig.values(0) >= kRankOneEigenFraction * n)) return std::nullopt;
  const Vector v = std::sqrt(eig.values(0)) * eig.vectors.col(0);
  Vector s(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    s(i) = v(i) >= 0.0 ? 1.0 : -1.0;
    if (!(std::abs(v(i) - s(i)) <= tol.entry_round)) return std::nullopt;
  }
  return s;
}

namespace detail {

inline void validate_correlation(const Matrix& a, const Tolerances& tol) {
  require_finite(a, "sym_scd");
  if (a.rows() != a.cols()) throw PreconditionError("sym_scd: input must be square");
  for (Index i = 0; i < a.rows(); ++i)
    if (!(std::abs(a(i, i) - 1.0) <= tol.entry_round))
      throw PreconditionError("sym_scd: input is not a correlation matrix (diagonal entry " + std::to_string(i) +
                              " = " + std::to_string(a(i, i)) + ")");
  const double lmin = min_eigenvalue(a);
  if (lmin < -tol.psd_slack * std::max(1.0, a.norm()))
    throw PreconditionError("sym_scd: input is not positive semidefinite (min eigenvalue " + std::to_string(lmin) + ")");
}

// Algorithm core on a validated correlation matrix of known rank r.
inline SymScdResult sym_scd_core(const Matrix& a0, int r, const Tolerances& tol, std::uint64_t seed, int max_redraws,
                                 const SdpOptions& sdp) {
  const Index n = a0.rows();
  SymScdResult out;
  std::vector<Vector> found;

  // Deflation runs in range coordinates: a = U a_red U^t.
  Matrix u = sym_eig(a0).vectors.leftCols(r);
  Matrix a_red = u.transpose() * a0 * u;

  for (int step = 0; step + 1 < r; ++step) {
    const CorrelationFace face = correlation_face(u);
    std::optional<Vector> s;
    double best_lambda = 0.0;
    std::string last_status;
    for (int attempt = 0; attempt <= max_redraws && !s; ++attempt) {
      if (attempt > 0) ++out.redraws;
      Rng rng = Rng::substream(seed, (static_cast<std::uint64_t>(step) << 8) | static_cast<std::uint64_t>(attempt));
      const Vector h = u.transpose() * rng.normal_vector(n);
      LinearSdpProblem p;
      p.dim = u.cols();
      p.sense = Sense::maximize;
      p.objective = SymmetricMatrix::from_dense(h * h.transpose());
      p.constraints = face.constraints;
      SdpSolution sol;
      try {
        sol = solve_linear_sdp(p, sdp);
      } catch (const SdpInfeasible& e) {
        throw HypothesisViolation(std::string("sym_scd: inner SDP failed: ") + e.what());
      }
      out.sdp_iterations += sol.iterations;
      last_status = sol.status;
      if (!sol.converged) continue;
      double lambda = 0.0;
      s = extract_sign_vector(u * sol.x.dense() * u.transpose(), tol, &lambda);
      best_lambda = std::max(best_lambda, lambda);
    }
    if (!s) {
      std::ostringstream msg;
      msg << "sym_scd: inner SDP maximizer is not rank one with sign entries after " << max_redraws
          << " redraws (component " << step + 1 << " of " << r << ", top eigenvalue " << best_lambda << " vs n = " << n
          << ", last solver status " << last_status << ")";
      throw HypothesisViolation(msg.str(), 1.0 - best_lambda / static_cast<double>(n));
    }
    found.push_back(*s);

    const Vector xr = u.transpose() * *s;
    const Matrix x_red = xr * xr.transpose();
    double zeta;
    try {
      zeta = solve_pencil_max(a_red, x_red, tol.psd_slack);
    } catch (const SdpInfeasible&) {
      throw HypothesisViolation("sym_scd: deflation pencil is unbounded; extracted component is not a vertex");
    }
    out.zetas.push_back(zeta);
    const Matrix deflated = zeta * a_red + (1.0 - zeta) * x_red;
    const SymEig eig = sym_eig(deflated);
    const Index keep = u.cols() - 1;
    const Matrix rot = eig.vectors.leftCols(keep);
    a_red = eig.values.head(keep).asDiagonal();
    u = u * rot;
  }

  const Matrix last = u * a_red * u.transpose();
  double lambda = 0.0;
  const auto s_last = extract_sign_vector(last, tol, &lambda);
  if (!s_last) {
    std::ostringstream msg;
    msg << "sym_scd: deflated matrix is not rank one with sign entries (top eigenvalue " << lambda << " vs n = " << n
        << ")";
    throw HypothesisViolation(msg.str(), 1.0 - lambda / static_cast<double>(n));
  }
  found.push_back(*s_last);

  Matrix sm(n, r);
  for (int j = 0; j < r; ++j) sm.col(j) = found[static_cast<std::size_t>(j)];
  out.s = SignMatrix(sm);

  // Solve A = S diag(tau) S^t for tau, column-stacked.
  Matrix design(n * n, r);
  for (int j = 0; j < r; ++j) {
    const Matrix outer = sm.col(j) * sm.col(j).transpose();
    design.col(j) = Eigen::Map<const Vector>(outer.data(), n * n);
  }
  const Vector rhs = Eigen::Map<const Vector>(a0.data(), n * n);
  const LeastSquares ls = least_squares(design, rhs, tol);
  Vector tau = ls.x.col(0);
  const double total = tau.sum();
  if (tau.minCoeff() <= 0.0 || std::abs(total - 1.0) > 1e-6) {
    std::ostringstream msg;
    msg << "sym_scd: convex coefficients are not in the open simplex (min " << tau.minCoeff() << ", sum " << total
        << ")";
    throw HypothesisViolation(msg.str(), std::abs(total - 1.0));
  }
  tau /= total;
  out.tau = tau;
  out.residual = (a0 - sm * tau.asDiagonal() * sm.transpose()).norm() / a0.norm();
  if (!(out.residual <= tol.residual_rel))
    throw HypothesisViolation("sym_scd: reconstruction residual " + std::to_string(out.residual) +
                                  " exceeds tolerance; input likely lacks a Schur-independent decomposition",
                              out.residual);
  return out;
}

}  // namespace detail

/// A = S diag(tau) S^t for a correlation matrix A with a Schur-independent sign component.
inline SymScdResult sym_scd(const SymmetricMatrix& a, const Tolerances& tol = {}, std::uint64_t seed = 0,
                            int max_redraws = 5, const SdpOptions& sdp = {}) {
  tol.validate();
  if (max_redraws < 0) throw PreconditionError("sym_scd: max_redraws must be nonnegative");
  const Matrix dense = a.dense();
  detail::validate_correlation(dense, tol);
  const int r = numerical_rank(dense, tol);
  return detail::sym_scd_core(dense, r, tol, seed, max_redraws, sdp);
}

/// B = S W^t with S Schur independent and W of full column rank, r = rank(B).
inline SignDecomposition asym_scd(const Matrix& b, const Tolerances& tol = {}, std::uint64_t seed = 0,
                                  const SdpOptions& sdp = {}) {
  tol.validate();
  require_finite(b, "asym_scd");
  const double bnorm = b.norm();
  if (bnorm == 0.0) throw PreconditionError("asym_scd: input matrix is zero");

  const FactorizationSdpResult fs = solve_factorization_sdp(b, tol, sdp);
  const int r = static_cast<int>(fs.u.cols());
  for (Index i = 0; i < fs.x.rows(); ++i)
    if (!(std::abs(fs.x(i, i) - 1.0) <= tol.entry_round))
      throw HypothesisViolation("asym_scd: factorization SDP solution is not a correlation matrix (diagonal entry " +
                                    std::to_string(i) + " = " + std::to_string(fs.x(i, i)) + ")",
                                std::abs(fs.x(i, i) - 1.0));
  const SymScdResult sym = detail::sym_scd_core(fs.x, r, tol, seed, 5, sdp);

  SignDecomposition out;
  out.s = sym.s;
  out.sdp_iterations = fs.solution.iterations + sym.sdp_iterations;
  out.redraws = sym.redraws;
  out.face_inconsistency = fs.face_inconsistency;
  if (!is_schur_sign(out.s)) throw HypothesisViolation("asym_scd: recovered sign factor is not Schur independent");
  const LeastSquares ls = least_squares(out.s.dense(), b, tol);
  out.w = ls.x.transpose();
  out.residual = (b - out.s.dense() * out.w.transpose()).norm() / bnorm;
  if (!(out.residual <= tol.residual_rel))
    throw HypothesisViolation("asym_scd: reconstruction residual " + std::to_string(out.residual) +
                                  " exceeds tolerance; hypotheses likely violated",
                              out.residual);
  if (numerical_rank(out.w, tol) != r)
    throw HypothesisViolation("asym_scd: recovered weight matrix is rank deficient");
  return out;
}

/// C = Z W^t with Z Schur independent (binary sense) and W of full column rank.
inline BinaryDecomposition bcd(const Matrix& c, const Tolerances& tol = {}, std::uint64_t seed = 0,
                               const SdpOptions& sdp = {}) {
  tol.validate();
  require_finite(c, "bcd");
  const double cnorm = c.norm();
  if (cnorm == 0.0) throw PreconditionError("bcd: input matrix is zero");
  const Index n = c.rows();
  const Index m = c.cols();
  const Matrix b = 2.0 * c - Matrix::Ones(n, m);
  if (b.norm() == 0.0) throw HypothesisViolation("bcd: 2C - E vanishes; C = E/2 has no Schur-independent binary factor");
  const int rank_c = numerical_rank(c, tol);

  const SignDecomposition sd = asym_scd(b, tol, seed, sdp);
  const auto inner = static_cast<int>(sd.s.cols());
  if (inner != rank_c + 1)
    throw HypothesisViolation("bcd: sign decomposition of 2C - E has inner dimension " + std::to_string(inner) +
                              ", expected rank(C) + 1 = " + std::to_string(rank_c + 1));

  Matrix s = sd.s.dense();
  Matrix w = sd.w;
  Index idx = 0;
  s.colwise().mean().cwiseAbs().maxCoeff(&idx);
  const double phi = s(0, idx) >= 0.0 ? 1.0 : -1.0;
  for (Index i = 0; i < n; ++i)
    if (!(std::abs(s(i, idx) - phi) <= tol.entry_round))
      throw HypothesisViolation("bcd: no column of the sign factor equals +-e");
  const Index r = inner - 1;
  if (idx != r) {
    s.col(idx).swap(s.col(r));
    w.col(idx).swap(w.col(r));
  }
  s.col(r) *= phi;
  w.col(r) *= phi;

  const Vector rhs = w.col(r) + Vector::Ones(m);
  const LeastSquares ls = least_squares(w.leftCols(r), rhs, tol);
  BinaryDecomposition out;
  out.xi_residual = ls.residual;
  if (!(ls.residual <= tol.residual_rel * (1.0 + rhs.norm())))
    throw HypothesisViolation("bcd: sign system for xi is inconsistent (residual " + std::to_string(ls.residual) + ")",
                              ls.residual);
  Vector xi = ls.x.col(0);
  for (Index i = 0; i < r; ++i) {
    const double rounded = xi(i) >= 0.0 ? 1.0 : -1.0;
    if (!(std::abs(xi(i) - rounded) <= tol.entry_round))
      throw HypothesisViolation("bcd: sign resolution failed (xi_" + std::to_string(i) + " = " + std::to_string(xi(i)) +
                                    ")",
                                std::abs(xi(i) - rounded));
    xi(i) = rounded;
  }

  Matrix z(n, r);
  Matrix wplus(m, r);
  for (Index i = 0; i < r; ++i) {
    z.col(i) = 0.5 * (xi(i) * s.col(i) + Vector::Ones(n));
    wplus.col(i) = xi(i) * w.col(i);
  }
  out.z = BinaryMatrix(z);
  out.wplus = wplus;
  out.sdp_iterations = sd.sdp_iterations;
  if (!is_schur_binary(out.z)) throw HypothesisViolation("bcd: recovered binary factor is not Schur independent");
  out.residual = (c - z * wplus.transpose()).norm() / cnorm;
  if (!(out.residual <= tol.residual_rel))
    throw HypothesisViolation("bcd: reconstruction residual " + std::to_string(out.residual) + " exceeds tolerance",
                              out.residual);
  return out;
}

/// Sign vectors spanning range(B), determined up to order and sign.
inline SignMatrix planted_sign_basis(const Matrix& b, const Tolerances& tol = {}, std::uint64_t seed = 0) {
  return asym_scd(b, tol, seed).s;
}

/// Binary vectors spanning range(B), determined up to order.
inline BinaryMatrix planted_binary_basis(const Matrix& b, const Tolerances& tol = {}, std::uint64_t seed = 0) {
  return bcd(b, tol, seed).z;
}

}  // namespace signfac
