#pragma once

// Summary statistics of sign matrices and loadings (permeance, incoherence,
// permeance statistic, spherical statistic) and Monte-Carlo harnesses that
// check the probabilistic bounds attached to them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "signfac/errors.hpp"
#include "signfac/linalg.hpp"
#include "signfac/models.hpp"
#include "signfac/rng.hpp"
#include "signfac/schur.hpp"

namespace signfac {

/// lambda_min(S^t S) / n, in [0, 1].
inline double permeance(const SignMatrix& s) {
  if (s.rows() < 1 || s.cols() < 1) return 0.0;
  const Matrix d = s.dense();
  const double v = min_eigenvalue(Matrix(d.transpose() * d)) / static_cast<double>(s.rows());
  return std::clamp(v, 0.0, 1.0);
}

struct IncoherenceReport {
  double mu_left = 0.0;
  double mu_right = 0.0;
  double mu_tilde = 0.0;
  double mu = 0.0;
  int rank = 0;
};

inline IncoherenceReport incoherence(const Matrix& l, const Tolerances& tol = {}) {
  require_finite(l, "incoherence");
  Eigen::BDCSVD<Matrix> svd(l, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const int k = rank_from_singular_values(svd.singularValues(), tol.rank_cutoff(l.rows(), l.cols()));
  if (k == 0) throw PreconditionError("incoherence: matrix is zero");
  const Matrix u = svd.matrixU().leftCols(k);
  const Matrix v = svd.matrixV().leftCols(k);
  const auto n = static_cast<double>(l.rows());
  const auto m = static_cast<double>(l.cols());
  const double kk = k;
  IncoherenceReport out;
  out.rank = k;
  out.mu_left = n / kk * u.rowwise().squaredNorm().maxCoeff();
  out.mu_right = m / kk * v.rowwise().squaredNorm().maxCoeff();
  out.mu_tilde = n * m / kk * (u * v.transpose()).cwiseAbs2().maxCoeff();
  out.mu = std::max({out.mu_left, out.mu_right, out.mu_tilde});
  return out;
}

struct PermeanceBracket {
  double lower = 0.0;
  double upper = 0.0;
  bool exact = false;
  Vector minimizer;  ///< unit vector in range(L0) attaining upper
};

struct PermeanceStatisticOptions {
  int restarts = 20;
  std::uint64_t seed = 0;
  /// Vertex enumeration is used while C(m, r-1) stays below this count.
  double max_vertices = 2e6;
  int subgradient_steps = 2000;
};

namespace detail {

inline double binomial(long long n, long long k) {
  if (k < 0 || k > n) return 0.0;
  double out = 1.0;
  for (long long i = 1; i <= k; ++i) out = out * static_cast<double>(n - k + i) / static_cast<double>(i);
  return out;
}

}  // namespace detail

/// inf over unit u in range(L0) of sum_i |<u, l_i>|.
///
/// In coordinates u = U c the objective is ||A c||_1 with A = L0^t U. The
/// infimum over the sphere is attained at a vertex of the polytope
/// {c : ||A c||_1 <= 1}, i.e. at a direction orthogonal to r - 1 rows of A.
/// When the number of such row subsets is small they are enumerated and the
/// value is exact. Otherwise the upper end comes from projected subgradient
/// descent with random restarts, each finished by snapping to the nearest
/// vertex, and the lower end is sigma_min(A), which is
/// certified because ||A c||_1 >= ||A c||_2.
inline PermeanceBracket permeance_statistic(const Matrix& l0, const Tolerances& tol = {},
                                            const PermeanceStatisticOptions& opts = {}) {
  require_finite(l0, "permeance_statistic");
  const Matrix u = orth_basis(l0, tol);
  const Index r = u.cols();
  const Matrix a = l0.transpose() * u;
  const Index m = a.rows();
  PermeanceBracket out;
  auto value = [&](const Vector& c) { return (a * c).cwiseAbs().sum(); };

  if (detail::binomial(m, r - 1) <= opts.max_vertices) {
    double best = std::numeric_limits<double>::infinity();
    Vector best_c;
    std::vector<int> idx(static_cast<std::size_t>(r - 1));
    for (Index i = 0; i < r - 1; ++i) idx[static_cast<std::size_t>(i)] = static_cast<int>(i);
    while (true) {
      Vector c;
      if (r == 1) {
        c = Vector::Ones(1);
      } else {
        Matrix rows(r - 1, r);
        for (Index i = 0; i < r - 1; ++i) rows.row(i) = a.row(idx[static_cast<std::size_t>(i)]);
        Eigen::JacobiSVD<Matrix> svd(rows, Eigen::ComputeFullV);
        c = svd.matrixV().col(r - 1);
      }
      const double f = value(c);
      if (f < best) {
        best = f;
        best_c = c;
      }
      if (r == 1) break;
      // Next (r-1)-subset of {0..m-1} in lexicographic order.
      Index pos = r - 2;
      while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == static_cast<int>(m - (r - 1) + pos)) --pos;
      if (pos < 0) break;
      ++idx[static_cast<std::size_t>(pos)];
      for (Index j = pos + 1; j < r - 1; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
    out.lower = out.upper = best;
    out.exact = true;
    out.minimizer = u * best_c;
    return out;
  }

  // Moves c to the vertex spanned by its r - 1 most nearly orthogonal rows.
  auto snap = [&](const Vector& c) -> Vector {
    const Vector ac = a * c;
    std::vector<Index> order(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) order[static_cast<std::size_t>(i)] = i;
    const Vector row_norms = a.rowwise().norm();
    auto key = [&](Index i) { return row_norms(i) > 0.0 ? std::abs(ac(i)) / row_norms(i) : 0.0; };
    std::sort(order.begin(), order.end(), [&](Index i, Index j) { return key(i) < key(j); });
    Matrix rows(r - 1, r);
    for (Index i = 0; i < r - 1; ++i) rows.row(i) = a.row(order[static_cast<std::size_t>(i)]);
    Eigen::JacobiSVD<Matrix> svd(rows, Eigen::ComputeFullV);
    Vector v = svd.matrixV().col(r - 1);
    return v.dot(c) < 0.0 ? Vector(-v) : v;
  };

  double best = std::numeric_limits<double>::infinity();
  Vector best_c;
  for (int restart = 0; restart < std::max(1, opts.restarts); ++restart) {
    Rng rng = Rng::substream(opts.seed, static_cast<std::uint64_t>(restart));
    Vector c = rng.unit_vector(r);
    const double scale = a.norm();
    for (int step = 1; step <= opts.subgradient_steps; ++step) {
      const double f = value(c);
      if (f < best) {
        best = f;
        best_c = c;
      }
      Vector g = a.transpose() * (a * c).unaryExpr([](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
      g -= g.dot(c) * c;
      const double gn = g.norm();
      if (gn == 0.0) break;
      c -= (f / scale) / std::sqrt(static_cast<double>(step)) * g / gn;
      c.normalize();
    }
    if (r > 1 && best_c.size() == r) {
      const Vector v = snap(best_c);
      if (value(v) < best) {
        best = value(v);
        best_c = v;
      }
    }
  }
  out.upper = best;
  out.lower = singular_values(a).minCoeff();
  out.minimizer = u * best_c;
  return out;
}

/// Top singular value of the unit-normalized columns P_perp omega_i; zero
/// projections are dropped.
inline double spherical_stat(const SymmetricMatrix& p_perp, const Matrix& omega0, double idempotence_tol = 1e-8) {
  const Matrix p = p_perp.dense();
  if (p.rows() != omega0.rows()) throw PreconditionError("spherical_stat: projector and data row counts differ");
  if (!p.allFinite() || !omega0.allFinite()) throw PreconditionError("spherical_stat: non-finite input");
  if ((p * p - p).norm() > idempotence_tol * std::max(1.0, p.norm()))
    throw PreconditionError("spherical_stat: P_perp is not idempotent");
  const Matrix proj = p * omega0;
  const double scale = std::max(1.0, omega0.cwiseAbs().maxCoeff());
  std::vector<Index> keep;
  for (Index i = 0; i < proj.cols(); ++i)
    if (proj.col(i).norm() > 1e-12 * scale) keep.push_back(i);
  if (keep.empty()) return 0.0;
  Matrix unit(proj.rows(), static_cast<Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) unit.col(static_cast<Index>(k)) = proj.col(keep[k]).normalized();
  return spectral_norm(unit);
}

// Monte-Carlo harnesses. Every trial draws from its own substream of the
// seed, so results do not depend on evaluation order.

/// Three-sigma binomial slack for an event of probability p over n trials.
inline double binomial_slack(double p, long long trials) {
  const double q = std::clamp(p, 0.0, 1.0);
  return 3.0 * std::sqrt(q * (1.0 - q) / static_cast<double>(std::max(1LL, trials)));
}

/// Frequency of a bad event compared with an upper bound on its probability.
struct TailCheck {
  long long trials = 0;
  long long events = 0;
  double frequency = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  std::optional<bool> pass;  ///< empty when trials < 2

  void finish() {
    frequency = trials > 0 ? static_cast<double>(events) / static_cast<double>(trials) : 0.0;
    slack = binomial_slack(bound, trials);
    if (trials >= 2) pass = frequency <= bound + slack;
  }
};

inline void require_trials(long long trials, const char* what) {
  if (trials < 1) throw PreconditionError(std::string(what) + ": trials must be positive");
}

/// Pr[sum_{i<=r} <e_i, v>^2 >= 4 r t / m] <= 2 e^{-t} for v uniform on the
/// sphere in R^m.
inline TailCheck verify_tail_bound(int r, int m, double t, long long trials, std::uint64_t seed) {
  if (r < 1 || r > m) throw PreconditionError("verify_tail_bound: need 1 <= r <= m");
  if (!(t > 0.0)) throw PreconditionError("verify_tail_bound: t must be positive");
  require_trials(trials, "verify_tail_bound");
  TailCheck out;
  out.trials = trials;
  out.bound = 2.0 * std::exp(-t);
  const double threshold = 4.0 * r * t / m;
  for (long long k = 0; k < trials; ++k) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(k));
    const Vector v = rng.unit_vector(m);
    if (v.head(r).squaredNorm() >= threshold) ++out.events;
  }
  out.finish();
  return out;
}

struct CoherenceReport {
  long long trials = 0;
  double nu = 0.0;
  long long mu_left_violations = 0;  ///< draws with mu_left > 1/nu
  double max_mu_left = 0.0;
  TailCheck mu_right;
  TailCheck mu_tilde;
  double mu_right_threshold = 0.0;
  double mu_tilde_threshold = 0.0;
  /// Filled when trials == 1.
  std::optional<IncoherenceReport> single_draw;
};

/// Incoherence of GLM(S, m) samples against the permeance bounds.
inline CoherenceReport verify_coherence_bounds(const SignMatrix& s, int m, double alpha, long long trials,
                                               std::uint64_t seed) {
  if (!(alpha > 0.0)) throw PreconditionError("verify_coherence_bounds: alpha must be positive");
  require_trials(trials, "verify_coherence_bounds");
  CoherenceReport out;
  out.trials = trials;
  out.nu = permeance(s);
  if (!(out.nu > 0.0)) throw PreconditionError("verify_coherence_bounds: sign matrix has zero permeance");
  const auto n = static_cast<double>(s.rows());
  const double log_nm = std::log(n + m);
  out.mu_right_threshold = 4.0 * (alpha + 1.0) * log_nm;
  out.mu_tilde_threshold = 4.0 * (alpha + 1.0) / out.nu * log_nm;
  out.mu_right.trials = out.mu_tilde.trials = trials;
  out.mu_right.bound = 2.0 * std::pow(n * m, -alpha) / n;
  out.mu_tilde.bound = 2.0 * std::pow(n * m, -alpha);
  const double left_cap = 1.0 / out.nu * (1.0 + 1e-9);
  for (long long k = 0; k < trials; ++k) {
    const GlmInstance glm = sample_glm(s, m, splitmix64(seed + static_cast<std::uint64_t>(k)), false);
    const IncoherenceReport inc = incoherence(glm.l0);
    out.max_mu_left = std::max(out.max_mu_left, inc.mu_left);
    if (inc.mu_left > left_cap) ++out.mu_left_violations;
    if (inc.mu_right >= out.mu_right_threshold) ++out.mu_right.events;
    if (inc.mu_tilde >= out.mu_tilde_threshold) ++out.mu_tilde.events;
    if (trials == 1) out.single_draw = inc;
  }
  out.mu_right.finish();
  out.mu_tilde.finish();
  return out;
}

/// Pr[||Omega||_op > sqrt(n) + sqrt(m') + t] <= e^{-t^2} for standard normal
/// Omega in R^{n x m'}.
inline TailCheck verify_gaussian_norm(int n, int m_prime, double t, long long trials, std::uint64_t seed) {
  if (n < 1 || m_prime < 1) throw PreconditionError("verify_gaussian_norm: dimensions must be positive");
  if (!(t > 0.0)) throw PreconditionError("verify_gaussian_norm: t must be positive");
  require_trials(trials, "verify_gaussian_norm");
  TailCheck out;
  out.trials = trials;
  out.bound = std::exp(-t * t);
  const double threshold = std::sqrt(static_cast<double>(n)) + std::sqrt(static_cast<double>(m_prime)) + t;
  for (long long k = 0; k < trials; ++k) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(k));
    if (spectral_norm(rng.normal_matrix(n, m_prime)) > threshold) ++out.events;
  }
  out.finish();
  return out;
}

struct WidthCheck {
  long long trials = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  std::optional<bool> pass;
};

/// Monte-Carlo mean of sup_{u in ran(S), |u|=1} <u, h> = ||h|| with
/// h = (1/sqrt m) sum_i eps_i l_i and l_i = (1/sqrt r) S g_i, against sqrt(n).
inline WidthCheck verify_empirical_width(const SignMatrix& s, int m, long long trials, std::uint64_t seed) {
  if (m < 1) throw PreconditionError("verify_empirical_width: m must be positive");
  require_trials(trials, "verify_empirical_width");
  const Matrix sd = s.dense();
  const auto r = static_cast<double>(s.cols());
  WidthCheck out;
  out.trials = trials;
  out.bound = std::sqrt(static_cast<double>(s.rows()));
  double sum = 0.0;
  double sum2 = 0.0;
  for (long long k = 0; k < trials; ++k) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(k));
    Vector coeff = Vector::Zero(s.cols());
    for (int i = 0; i < m; ++i) {
      const double eps = rng.sign();
      coeff += eps * rng.normal_vector(s.cols());
    }
    const double w = (sd * coeff).norm() / std::sqrt(static_cast<double>(m) * r);
    sum += w;
    sum2 += w * w;
  }
  const auto tr = static_cast<double>(trials);
  out.mean = sum / tr;
  out.stddev = trials > 1 ? std::sqrt(std::max(0.0, (sum2 - tr * out.mean * out.mean) / (tr - 1.0))) : 0.0;
  out.slack = 3.0 * out.stddev / std::sqrt(tr);
  if (trials >= 2) out.pass = out.mean <= out.bound + out.slack;
  return out;
}

struct MarginalTailCheck {
  long long trials = 0;
  int directions = 0;
  double threshold = 0.0;
  std::vector<double> frequencies;
  double min_frequency = 0.0;
  double bound = 0.5;
  double slack = 0.0;
  std::optional<bool> pass;
};

/// For random unit u in ran(S): Pr[|<u, S g>| >= (2/3) sqrt(nu n)] >= 1/2.
inline MarginalTailCheck verify_marginal_tail(const SignMatrix& s, int directions, long long trials,
                                              std::uint64_t seed) {
  if (directions < 1) throw PreconditionError("verify_marginal_tail: directions must be positive");
  require_trials(trials, "verify_marginal_tail");
  const Matrix sd = s.dense();
  const Matrix basis = orth_basis(sd);
  MarginalTailCheck out;
  out.trials = trials;
  out.directions = directions;
  out.threshold = 2.0 / 3.0 * std::sqrt(permeance(s) * static_cast<double>(s.rows()));
  out.slack = binomial_slack(0.5, trials);
  Rng dir_rng = Rng::substream(seed, 0);
  std::vector<Vector> dirs;
  for (int d = 0; d < directions; ++d) dirs.push_back(basis * dir_rng.unit_vector(basis.cols()));
  std::vector<long long> hits(static_cast<std::size_t>(directions), 0);
  for (long long k = 0; k < trials; ++k) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(k) + 1);
    const Vector x = sd * rng.normal_vector(s.cols());
    for (int d = 0; d < directions; ++d)
      if (std::abs(dirs[static_cast<std::size_t>(d)].dot(x)) >= out.threshold) ++hits[static_cast<std::size_t>(d)];
  }
  out.min_frequency = 1.0;
  for (long long h : hits) {
    out.frequencies.push_back(static_cast<double>(h) / static_cast<double>(trials));
    out.min_frequency = std::min(out.min_frequency, out.frequencies.back());
  }
  if (trials >= 2) out.pass = out.min_frequency >= out.bound - out.slack;
  return out;
}

/// Pr[S_hat(L0_perp, Omega0) > (sqrt m' + sqrt(n-r) + t) / sqrt(n-r-0.5)]
/// <= 1.5 e^{-t^2/2} for standard normal Omega0 and a fixed r-dimensional L0
/// (the span of the first r coordinates).
inline TailCheck verify_spherical_bound(int n, int r, int m_prime, double t, long long trials, std::uint64_t seed) {
  if (r < 0 || n - r < 1 || m_prime < 1) throw PreconditionError("verify_spherical_bound: need 0 <= r < n, m' >= 1");
  if (!(static_cast<double>(n - r) > 0.5)) throw PreconditionError("verify_spherical_bound: n - r too small");
  if (!(t > 0.0)) throw PreconditionError("verify_spherical_bound: t must be positive");
  require_trials(trials, "verify_spherical_bound");
  Matrix p = Matrix::Identity(n, n);
  p.topLeftCorner(r, r).setZero();
  const SymmetricMatrix p_perp = SymmetricMatrix::from_dense(p);
  TailCheck out;
  out.trials = trials;
  out.bound = 1.5 * std::exp(-t * t / 2.0);
  const double threshold = (std::sqrt(static_cast<double>(m_prime)) + std::sqrt(static_cast<double>(n - r)) + t) /
                           std::sqrt(static_cast<double>(n - r) - 0.5);
  for (long long k = 0; k < trials; ++k) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(k));
    if (spherical_stat(p_perp, rng.normal_matrix(n, m_prime)) > threshold) ++out.events;
  }
  out.finish();
  return out;
}

struct PermeanceBoundCheck {
  TailCheck check;
  double rhs = 0.0;
  bool trivial = false;  ///< right side <= 0, so the bound holds on every draw
  double min_lower = 0.0;
};

/// Pr[P(L0, L0) < (1/6) sqrt(nm/r) (sqrt(m nu) - 12 sqrt r - 2 sqrt(nu) t)]
/// <= e^{-t^2/2} for L0 ~ GLM(S, m). Violations are counted against the lower
/// end of the bracket, so inexact brackets can only overcount.
inline PermeanceBoundCheck verify_permeance_bound(const SignMatrix& s, int m, double t, long long trials,
                                                  std::uint64_t seed, const PermeanceStatisticOptions& opts = {}) {
  if (!(t > 0.0)) throw PreconditionError("verify_permeance_bound: t must be positive");
  require_trials(trials, "verify_permeance_bound");
  const auto n = static_cast<double>(s.rows());
  const auto r = static_cast<double>(s.cols());
  const double nu = permeance(s);
  PermeanceBoundCheck out;
  out.rhs = std::sqrt(n * m / r) / 6.0 * (std::sqrt(m * nu) - 12.0 * std::sqrt(r) - 2.0 * std::sqrt(nu) * t);
  out.trivial = out.rhs <= 0.0;
  out.check.trials = trials;
  out.check.bound = std::exp(-t * t / 2.0);
  out.min_lower = std::numeric_limits<double>::infinity();
  for (long long k = 0; k < trials; ++k) {
    const GlmInstance glm = sample_glm(s, m, splitmix64(seed + static_cast<std::uint64_t>(k)), false);
    PermeanceStatisticOptions o = opts;
    o.seed = splitmix64(seed ^ static_cast<std::uint64_t>(k));
    const PermeanceBracket b = permeance_statistic(glm.l0, {}, o);
    out.min_lower = std::min(out.min_lower, b.lower);
    if (b.lower < out.rhs) ++out.check.events;
  }
  out.check.finish();
  return out;
}

}  // namespace signfac
