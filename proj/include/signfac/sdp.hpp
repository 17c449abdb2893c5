#pragma once

// Dense primal-dual interior-point solver for linear semidefinite programs
//
//     minimize / maximize  trace(C X)
//     subject to           trace(A_k X) = b_k,  k = 1..K,   X psd,
//
// using the HKM search direction with a Mehrotra predictor-corrector. The
// constraint matrices are stored sparsely inside the solver, which keeps the
// Schur-complement assembly cheap for the coordinate-pinning constraints that
// dominate the factorization programs. Linearly dependent constraints are
// removed by a pivoted Cholesky factorization of their Gram matrix.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "signfac/errors.hpp"
#include "signfac/linalg.hpp"

namespace signfac {

enum class Sense { minimize, maximize };

struct SdpConstraint {
  SymmetricMatrix a;
  double b = 0.0;
};

struct LinearSdpProblem {
  Index dim = 0;
  SymmetricMatrix objective;
  Sense sense = Sense::minimize;
  std::vector<SdpConstraint> constraints;

  void validate() const {
    if (dim < 1) throw PreconditionError("sdp: dimension must be positive");
    if (objective.dim() != dim) throw PreconditionError("sdp: objective has the wrong side length");
    if (constraints.empty()) throw PreconditionError("sdp: constraint list is empty");
    for (const auto& c : constraints) {
      if (c.a.dim() != dim) throw PreconditionError("sdp: constraint has the wrong side length");
      if (!c.a.finite() || !std::isfinite(c.b)) throw PreconditionError("sdp: non-finite constraint data");
    }
    if (!objective.finite()) throw PreconditionError("sdp: non-finite objective");
  }
};

struct SdpOptions {
  double tol = 1e-8;
  int max_iter = 100;
  bool presolve = true;
};

struct SdpSolution {
  SymmetricMatrix x;
  Vector y;  ///< multipliers of the constraints kept by presolve (zeros for dropped ones)
  SymmetricMatrix z;
  double objective_value = 0.0;
  double dual_value = 0.0;
  double primal_residual = 0.0;  ///< max_k |trace(A_k X) - b_k| over all constraints
  double dual_residual = 0.0;
  double gap = 0.0;  ///< relative duality gap
  double min_eig = 0.0;
  int iterations = 0;
  int dropped_constraints = 0;
  bool converged = false;
  std::string status;
};

/// Raised when the iterates certify primal infeasibility or unboundedness.
class SdpInfeasible : public Error {
 public:
  enum class Which { primal_infeasible, unbounded };
  SdpInfeasible(Which which, const std::string& what) : Error(ErrorKind::precondition, what), which(which) {}
  Which which;
};

namespace detail {

struct SparseEntry {
  Index i;
  Index j;  // i <= j
  double v;
};

struct SparseSym {
  std::vector<SparseEntry> entries;
  Matrix dense;  // filled only for constraints with many entries
  bool use_dense = false;
};

inline SparseSym to_sparse(const SymmetricMatrix& a, double scale) {
  SparseSym s;
  for (Index j = 0; j < a.dim(); ++j)
    for (Index i = 0; i <= j; ++i) {
      const double v = a(i, j) * scale;
      if (v != 0.0) s.entries.push_back({i, j, v});
    }
  if (static_cast<Index>(s.entries.size()) > a.dim()) {
    s.use_dense = true;
    s.dense = a.dense() * scale;
  }
  return s;
}

inline double frobenius(const SymmetricMatrix& a) { return a.dense().norm(); }

// trace(A M) for a symmetric A and an arbitrary square M.
inline double trace_with(const SparseSym& a, const Matrix& m) {
  double acc = 0.0;
  for (const auto& e : a.entries) acc += e.i == e.j ? e.v * m(e.i, e.i) : e.v * (m(e.i, e.j) + m(e.j, e.i));
  return acc;
}

inline void add_scaled(Matrix& out, const SparseSym& a, double s) {
  for (const auto& e : a.entries) {
    out(e.i, e.j) += s * e.v;
    if (e.i != e.j) out(e.j, e.i) += s * e.v;
  }
}

// Indices of a maximal linearly independent subset of the rows of the Gram
// matrix, chosen by diagonal pivoting.
inline std::vector<int> independent_rows(Matrix gram, double rel_tol) {
  const Index k = gram.rows();
  std::vector<int> order(static_cast<std::size_t>(k));
  for (Index i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = static_cast<int>(i);
  const double scale = gram.diagonal().maxCoeff();
  std::vector<int> chosen;
  Matrix l = Matrix::Zero(k, k);
  Vector diag = gram.diagonal();
  std::vector<bool> used(static_cast<std::size_t>(k), false);
  for (Index step = 0; step < k; ++step) {
    Index best = -1;
    double best_val = rel_tol * scale;
    for (Index i = 0; i < k; ++i)
      if (!used[static_cast<std::size_t>(i)] && diag(i) > best_val) {
        best_val = diag(i);
        best = i;
      }
    if (best < 0) break;
    used[static_cast<std::size_t>(best)] = true;
    const double piv = std::sqrt(diag(best));
    const auto col = static_cast<Index>(chosen.size());
    for (Index i = 0; i < k; ++i) {
      if (used[static_cast<std::size_t>(i)] && i != best) continue;
      double v = gram(i, best);
      for (Index c = 0; c < col; ++c) v -= l(i, c) * l(best, c);
      l(i, col) = v / piv;
    }
    for (Index i = 0; i < k; ++i)
      if (!used[static_cast<std::size_t>(i)]) diag(i) -= l(i, col) * l(i, col);
    chosen.push_back(static_cast<int>(best));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

// Largest step alpha with X + alpha dX psd (infinity if unbounded).
inline double max_step(const Matrix& x, const Matrix& dx) {
  Eigen::LLT<Matrix> llt(x);
  if (llt.info() != Eigen::Success) return 0.0;
  Matrix w = llt.matrixL().solve(dx);
  w = llt.matrixL().solve(w.transpose()).transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (w + w.transpose()), Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues()(0);
  return lmin < 0.0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Solves a linear SDP. Problems whose iterates certify infeasibility or
/// unboundedness raise SdpInfeasible; iteration exhaustion returns a solution
/// with converged = false and its diagnostics filled in.
inline SdpSolution solve_linear_sdp(const LinearSdpProblem& problem, const SdpOptions& opts = {}) {
  problem.validate();
  const Index n = problem.dim;
  const double sense = problem.sense == Sense::minimize ? 1.0 : -1.0;
  const Matrix c = sense * problem.objective.dense();

  // Unit-norm scaling of each constraint.
  const auto k_all = static_cast<Index>(problem.constraints.size());
  std::vector<double> scales(static_cast<std::size_t>(k_all));
  for (Index k = 0; k < k_all; ++k) {
    const double nrm = detail::frobenius(problem.constraints[static_cast<std::size_t>(k)].a);
    if (nrm == 0.0) {
      if (problem.constraints[static_cast<std::size_t>(k)].b != 0.0)
        throw SdpInfeasible(SdpInfeasible::Which::primal_infeasible, "sdp: zero constraint with nonzero right-hand side");
      scales[static_cast<std::size_t>(k)] = 0.0;
    } else {
      scales[static_cast<std::size_t>(k)] = 1.0 / nrm;
    }
  }

  std::vector<int> keep;
  for (Index k = 0; k < k_all; ++k)
    if (scales[static_cast<std::size_t>(k)] > 0.0) keep.push_back(static_cast<int>(k));

  if (opts.presolve && keep.size() > 1) {
    // Gram matrix of the scaled constraints in the trace inner product.
    const Index svec = n * (n + 1) / 2;
    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t r = 0; r < keep.size(); ++r) {
      const auto& con = problem.constraints[static_cast<std::size_t>(keep[r])];
      const double s = scales[static_cast<std::size_t>(keep[r])];
      for (Index j = 0; j < n; ++j)
        for (Index i = 0; i <= j; ++i) {
          const double v = con.a(i, j);
          if (v != 0.0)
            trips.emplace_back(static_cast<int>(r), static_cast<int>(j * (j + 1) / 2 + i),
                               v * s * (i == j ? 1.0 : std::sqrt(2.0)));
        }
    }
    Eigen::SparseMatrix<double> amat(static_cast<Index>(keep.size()), svec);
    amat.setFromTriplets(trips.begin(), trips.end());
    const Matrix gram = Matrix(amat * amat.transpose());
    const auto rows = detail::independent_rows(gram, 1e-10);
    std::vector<int> reduced;
    reduced.reserve(rows.size());
    for (int r : rows) reduced.push_back(keep[static_cast<std::size_t>(r)]);
    keep = std::move(reduced);
  }

  const auto kk = static_cast<Index>(keep.size());
  std::vector<detail::SparseSym> a;
  a.reserve(keep.size());
  Vector b(kk);
  for (Index r = 0; r < kk; ++r) {
    const auto idx = static_cast<std::size_t>(keep[static_cast<std::size_t>(r)]);
    a.push_back(detail::to_sparse(problem.constraints[idx].a, scales[idx]));
    b(r) = problem.constraints[idx].b * scales[idx];
  }

  auto apply_a = [&](const Matrix& m) {
    Vector out(kk);
    for (Index k = 0; k < kk; ++k) out(k) = detail::trace_with(a[static_cast<std::size_t>(k)], m);
    return out;
  };
  auto apply_at = [&](const Vector& y) {
    Matrix out = Matrix::Zero(n, n);
    for (Index k = 0; k < kk; ++k) detail::add_scaled(out, a[static_cast<std::size_t>(k)], y(k));
    return out;
  };

  std::size_t total_nnz = 0;
  for (const auto& s : a) total_nnz += s.entries.size();

  // Schur complement M_kl = trace(A_k X A_l Z^{-1}).
  auto assemble = [&](const Matrix& x, const Matrix& zinv) {
    Matrix m(kk, kk);
    for (Index k = 0; k < kk; ++k) {
      const auto& ak = a[static_cast<std::size_t>(k)];
      const double direct_cost = static_cast<double>(ak.entries.size()) * static_cast<double>(total_nnz);
      const double dense_cost = 2.0 * static_cast<double>(std::min<std::size_t>(ak.entries.size(), static_cast<std::size_t>(n))) *
                                static_cast<double>(n * n);
      if (direct_cost <= dense_cost) {
        for (Index l = k; l < kk; ++l) {
          double acc = 0.0;
          for (const auto& e : ak.entries) {
            const double fe = e.i == e.j ? 0.5 : 1.0;
            for (const auto& f : a[static_cast<std::size_t>(l)].entries) {
              const double ff = f.i == f.j ? 0.5 : 1.0;
              acc += e.v * f.v * fe * ff *
                     (zinv(f.j, e.i) * x(e.j, f.i) + zinv(f.j, e.j) * x(e.i, f.i) + zinv(f.i, e.i) * x(e.j, f.j) +
                      zinv(f.i, e.j) * x(e.i, f.j));
            }
          }
          m(k, l) = m(l, k) = acc;
        }
      } else {
        Matrix g;
        if (ak.use_dense) {
          g = zinv * (ak.dense * x);
        } else {
          g = Matrix::Zero(n, n);
          for (const auto& e : ak.entries) {
            g.noalias() += e.v * zinv.col(e.i) * x.row(e.j);
            if (e.i != e.j) g.noalias() += e.v * zinv.col(e.j) * x.row(e.i);
          }
        }
        for (Index l = k; l < kk; ++l) m(k, l) = m(l, k) = detail::trace_with(a[static_cast<std::size_t>(l)], g);
      }
    }
    return m;
  };

  // Starting point in the spirit of SDPT3.
  double max_a_ratio = 0.0;
  for (Index k = 0; k < kk; ++k) max_a_ratio = std::max(max_a_ratio, (1.0 + std::abs(b(k))) / 2.0);
  const double xi = std::max({10.0, std::sqrt(static_cast<double>(n)), static_cast<double>(n) * max_a_ratio});
  const double eta = std::max({10.0, std::sqrt(static_cast<double>(n)), c.norm()});
  Matrix x = xi * Matrix::Identity(n, n);
  Matrix z = eta * Matrix::Identity(n, n);
  Vector y = Vector::Zero(kk);

  const double b_norm = b.norm();
  const double c_norm = c.norm();

  SdpSolution sol;
  sol.dropped_constraints = static_cast<int>(k_all - kk);
  sol.status = "max_iter";
  double relp = 0.0, reld = 0.0, relgap = 0.0;

  int iter = 0;
  for (; iter <= opts.max_iter; ++iter) {
    const Vector rp = b - apply_a(x);
    const Matrix rd = c - z - apply_at(y);
    const double pobj = (c.array() * x.array()).sum();
    const double dobj = b.dot(y);
    const double xz = (x.array() * z.array()).sum();
    relp = rp.norm() / (1.0 + b_norm);
    reld = rd.norm() / (1.0 + c_norm);
    relgap = std::max(std::abs(pobj - dobj), std::abs(xz)) / (1.0 + std::abs(pobj) + std::abs(dobj));

    if (relp <= opts.tol && reld <= opts.tol && relgap <= opts.tol) {
      sol.converged = true;
      sol.status = "converged";
      break;
    }
    // Divergence along a ray certifies infeasibility.
    if (dobj > 1e10 * (1.0 + c_norm) && reld < 1e-3 * std::abs(dobj))
      throw SdpInfeasible(SdpInfeasible::Which::primal_infeasible, "sdp: primal problem is infeasible (dual ray detected)");
    if (-pobj > 1e10 * (1.0 + b_norm) && rp.norm() < 1e-6 * x.norm())
      throw SdpInfeasible(SdpInfeasible::Which::unbounded, "sdp: objective is unbounded (primal ray detected)");
    if (iter == opts.max_iter) break;

    Eigen::LLT<Matrix> zchol(z);
    if (zchol.info() != Eigen::Success) {
      sol.status = "numerical_failure";
      break;
    }
    const Matrix zinv = zchol.solve(Matrix::Identity(n, n));
    const double mu = xz / static_cast<double>(n);

    Matrix m = assemble(x, zinv);
    Eigen::LLT<Matrix> mchol(m);
    if (mchol.info() != Eigen::Success) {
      m.diagonal().array() += 1e-14 * m.diagonal().cwiseAbs().maxCoeff() + 1e-300;
      mchol.compute(m);
      if (mchol.info() != Eigen::Success) {
        sol.status = "numerical_failure";
        break;
      }
    }

    const Matrix x_rd_zinv = x * rd * zinv;
    const Vector a_zinv = apply_a(zinv);
    const Vector base_rhs = b + apply_a(x_rd_zinv);

    auto directions = [&](const Vector& rhs, double sigma_mu, const Matrix* corr, Vector& dy, Matrix& dx, Matrix& dz) {
      dy = mchol.solve(rhs);
      dz = rd - apply_at(dy);
      Matrix t = x * dz * zinv;
      if (corr != nullptr) t += *corr;
      dx = sigma_mu * zinv - x - 0.5 * (t + t.transpose());
    };

    Vector dy;
    Matrix dx, dz;
    directions(base_rhs, 0.0, nullptr, dy, dx, dz);
    const double ap = std::min(1.0, detail::max_step(x, dx));
    const double ad = std::min(1.0, detail::max_step(z, dz));
    const double xz_aff = ((x + ap * dx).array() * (z + ad * dz).array()).sum();
    double sigma = std::pow(std::max(0.0, xz_aff) / xz, 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    const Matrix corr = dx * dz * zinv;
    const Vector rhs = base_rhs - sigma * mu * a_zinv + apply_a(corr);
    directions(rhs, sigma * mu, &corr, dy, dx, dz);

    const double step = 0.98;
    const double alpha_p = std::min(1.0, step * detail::max_step(x, dx));
    const double alpha_d = std::min(1.0, step * detail::max_step(z, dz));
    x += alpha_p * dx;
    x = 0.5 * (x + x.transpose());
    y += alpha_d * dy;
    z += alpha_d * dz;
    z = 0.5 * (z + z.transpose());
  }

  sol.iterations = std::min(iter, opts.max_iter);
  sol.x = SymmetricMatrix::from_dense(x);
  sol.z = SymmetricMatrix::from_dense(z);
  sol.y = Vector::Zero(k_all);
  for (Index r = 0; r < kk; ++r) {
    const auto idx = static_cast<std::size_t>(keep[static_cast<std::size_t>(r)]);
    sol.y(static_cast<Index>(idx)) = sense * y(r) * scales[idx];
  }
  sol.objective_value = sense * (c.array() * x.array()).sum();
  sol.dual_value = sense * b.dot(y);
  double worst = 0.0;
  for (const auto& con : problem.constraints)
    worst = std::max(worst, std::abs((con.a.dense().array() * x.array()).sum() - con.b));
  sol.primal_residual = worst;
  sol.dual_residual = reld;
  sol.gap = relgap;
  sol.min_eig = min_eigenvalue(x);
  return sol;
}

inline SdpSolution solve_linear_sdp(const LinearSdpProblem& problem, double tol) {
  SdpOptions opts;
  opts.tol = tol;
  return solve_linear_sdp(problem, opts);
}

/// Largest zeta with zeta*A + (1 - zeta)*X psd, for psd A and X, by bisection
/// on the minimum eigenvalue of the pencil. Raises SdpInfeasible(unbounded)
/// when the pencil stays psd for every zeta up to 2^60.
inline double solve_pencil_max(const Matrix& a, const Matrix& x, double psd_slack = 1e-8, double accuracy = 1e-10) {
  if (a.rows() != a.cols() || x.rows() != x.cols() || a.rows() != x.rows())
    throw PreconditionError("solve_pencil_max: matrices must be square and of equal size");
  if (!a.allFinite() || !x.allFinite()) throw PreconditionError("solve_pencil_max: non-finite input");
  const double scale = std::max({1.0, a.norm(), x.norm()});
  if (min_eigenvalue(a) < -psd_slack * scale || min_eigenvalue(x) < -psd_slack * scale)
    throw PreconditionError("solve_pencil_max: inputs must be psd");

  const double floor = -1e-13 * scale;
  auto feasible = [&](double zeta) { return min_eigenvalue(zeta * a + (1.0 - zeta) * x) >= floor; };

  double lo = 0.0;
  double hi = 2.0;
  const double cap = std::ldexp(1.0, 60);
  while (feasible(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > cap) throw SdpInfeasible(SdpInfeasible::Which::unbounded, "solve_pencil_max: pencil is psd for all zeta (unbounded)");
  }
  for (int it = 0; it < 200 && hi - lo > accuracy; ++it) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? lo : hi) = mid;
  }
  return lo;
}

inline double solve_pencil_max(const SymmetricMatrix& a, const SymmetricMatrix& x, double psd_slack = 1e-8) {
  return solve_pencil_max(a.dense(), x.dense(), psd_slack);
}

}  // namespace signfac
