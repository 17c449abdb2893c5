#pragma once

// Dense linear-algebra kernels shared by every other module. All SVDs go
// through Eigen::BDCSVD and all symmetric eigenproblems through
// Eigen::SelfAdjointEigenSolver, so tolerances compose predictably.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "signfac/errors.hpp"

namespace signfac {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Numerical tolerances used across the library.
struct Tolerances {
  /// Relative singular-value cutoff, scaled by max(rows, cols) at the call site.
  double rank_rel = 1e-9;
  /// Max distance of a recovered entry from {+-1} or {0,1}.
  double entry_round = 1e-3;
  /// Relative Frobenius reconstruction tolerance.
  double residual_rel = 1e-6;
  /// Allowed negative eigenvalue magnitude for "psd" inputs.
  double psd_slack = 1e-8;

  void validate() const {
    if (!(rank_rel > 0.0 && rank_rel < 1.0)) throw PreconditionError("rank_rel must lie in (0, 1)");
    if (!(entry_round > 0.0 && entry_round < 0.5)) throw PreconditionError("entry_round must lie in (0, 0.5)");
    if (!(residual_rel > 0.0)) throw PreconditionError("residual_rel must be positive");
    if (!(psd_slack > 0.0)) throw PreconditionError("psd_slack must be positive");
  }

  double rank_cutoff(Index rows, Index cols) const {
    return rank_rel * static_cast<double>(std::max(rows, cols));
  }
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_finite(const Matrix& m, const std::string& what) {
  if (m.rows() < 1 || m.cols() < 1) throw PreconditionError(what + ": matrix must be nonempty");
  if (!m.allFinite()) throw PreconditionError(what + ": matrix has non-finite entries");
}

/// Real symmetric matrix. Only the upper triangle is stored (packed, column by
/// column), so an asymmetric value cannot be represented.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(Index dim) : dim_(dim), packed_(Vector::Zero(dim * (dim + 1) / 2)) {}

  /// Takes the symmetric part (M + M^t)/2 of a square matrix.
  static SymmetricMatrix from_dense(const Matrix& m) {
    if (m.rows() != m.cols()) throw PreconditionError("SymmetricMatrix: input must be square");
    SymmetricMatrix s(m.rows());
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = 0; i <= j; ++i) s.packed_(offset(i, j)) = 0.5 * (m(i, j) + m(j, i));
    return s;
  }

  static SymmetricMatrix identity(Index dim) { return from_dense(Matrix::Identity(dim, dim)); }

  Index dim() const { return dim_; }

  double operator()(Index i, Index j) const {
    return i <= j ? packed_(offset(i, j)) : packed_(offset(j, i));
  }

  void set(Index i, Index j, double value) {
    if (i > j) std::swap(i, j);
    packed_(offset(i, j)) = value;
  }

  Matrix dense() const {
    Matrix m(dim_, dim_);
    for (Index j = 0; j < dim_; ++j)
      for (Index i = 0; i <= j; ++i) m(i, j) = m(j, i) = packed_(offset(i, j));
    return m;
  }

  bool finite() const { return packed_.allFinite(); }

 private:
  static Index offset(Index i, Index j) { return j * (j + 1) / 2 + i; }

  Index dim_ = 0;
  Vector packed_;
};

struct SymEig {
  Vector values;   ///< descending
  Matrix vectors;  ///< columns match values
};

inline SymEig sym_eig(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (a + a.transpose()));
  if (solver.info() != Eigen::Success) throw NonConvergenceError("symmetric eigensolver failed");
  SymEig out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

inline SymEig sym_eig(const SymmetricMatrix& a) { return sym_eig(a.dense()); }

inline double min_eigenvalue(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

inline double min_eigenvalue(const SymmetricMatrix& a) { return min_eigenvalue(a.dense()); }

inline Vector singular_values(const Matrix& m) {
  return Eigen::BDCSVD<Matrix>(m).singularValues();
}

inline int rank_from_singular_values(const Vector& sv, double cutoff) {
  if (sv.size() == 0 || sv(0) <= 0.0) return 0;
  int r = 0;
  for (Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff * sv(0)) ++r;
  return r;
}

/// Number of singular values above rank_cutoff * sigma_1. Zero matrix -> 0.
inline int numerical_rank(const Matrix& m, const Tolerances& tol = {}) {
  return rank_from_singular_values(singular_values(m), tol.rank_cutoff(m.rows(), m.cols()));
}

/// Orthonormal basis for the numerical range of m.
inline Matrix orth_basis(const Matrix& m, const Tolerances& tol = {}) {
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU);
  const int r = rank_from_singular_values(svd.singularValues(), tol.rank_cutoff(m.rows(), m.cols()));
  if (r == 0) throw PreconditionError("orth_basis: matrix is zero, range has an empty basis");
  return svd.matrixU().leftCols(r);
}

/// Orthonormal basis of a prescribed dimension (leading left singular vectors).
inline Matrix leading_basis(const Matrix& m, int r) {
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU);
  return svd.matrixU().leftCols(r);
}

struct LeastSquares {
  Matrix x;
  double residual = 0.0;  ///< ||A X - B||_F
  int rank = 0;
};

/// Minimum-norm minimizer of ||A X - B||_F.
inline LeastSquares least_squares(const Matrix& a, const Matrix& b, const Tolerances& tol = {}) {
  if (a.rows() != b.rows()) throw PreconditionError("least_squares: row counts differ");
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const int r = rank_from_singular_values(sv, tol.rank_cutoff(a.rows(), a.cols()));
  LeastSquares out;
  out.rank = r;
  if (r == 0) {
    out.x = Matrix::Zero(a.cols(), b.cols());
  } else {
    const Matrix ub = svd.matrixU().leftCols(r).transpose() * b;
    out.x = svd.matrixV().leftCols(r) * (sv.head(r).cwiseInverse().asDiagonal() * ub);
  }
  out.residual = (a * out.x - b).norm();
  return out;
}

/// Orthogonal projector onto the range of m.
inline Matrix range_projector(const Matrix& m, const Tolerances& tol = {}) {
  const Matrix u = orth_basis(m, tol);
  return u * u.transpose();
}

inline double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return singular_values(m)(0);
}

inline double nuclear_norm(const Matrix& m) { return singular_values(m).sum(); }

}  // namespace signfac
