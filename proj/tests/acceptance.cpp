// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "oracles.hpp"
#include "signfac/decompose.hpp"
#include "signfac/factorization_sdp.hpp"
#include "signfac/matching.hpp"
#include "signfac/models.hpp"
#include "signfac/robust.hpp"
#include "signfac/stats.hpp"

using namespace signfac;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Matrix random_bits(Rng& rng, Index n, Index r) {
  Matrix m(n, r);
  for (Index j = 0; j < r; ++j)
    for (Index i = 0; i < n; ++i) m(i, j) = static_cast<double>(rng.next_u64() >> 63);
  return m;
}

Matrix random_signs(Rng& rng, Index n, Index r) {
  Matrix m(n, r);
  for (Index j = 0; j < r; ++j)
    for (Index i = 0; i < n; ++i) m(i, j) = rng.sign();
  return m;
}

SignMatrix permeant_sign(int n, int r, std::uint64_t seed, double nu) {
  for (std::uint64_t k = 0;; ++k) {
    SignMatrix s = random_schur_sign(n, r, splitmix64(seed) + k);
    if (permeance(s) >= nu) return s;
  }
}

Outcome exact_scd() {
  int ok = 0;
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const auto t0 = Clock::now();
    const SignMatrix s = random_schur_sign(30, 5, 1000 + t);
    Rng rng(2000 + t);
    const Matrix b = s.dense() * rng.normal_matrix(20, 5).transpose();
    try {
      const SignDecomposition d = asym_scd(b, {}, t);
      const bool matched = match_signed_permutation(d.s, s).has_value();
      const bool small = (b - d.s.dense() * d.w.transpose()).norm() <= 1e-6 * b.norm();
      if (matched && small) ++ok;
    } catch (const Error&) {
    }
    worst = std::max(worst, seconds_since(t0));
  }
  return {ok >= 99 && worst <= 10.0, fmt("%d/100 recovered, slowest %.2fs", ok, worst)};
}

Outcome factorization_oracle() {
  int ok = 0;
  double worst_x = 0.0, worst_y = 0.0;
  for (std::uint64_t t = 0; t < 50; ++t) {
    const int r = 2 + static_cast<int>(t % 4);
    const int n = 12 + static_cast<int>(t % 9);
    const SignMatrix s = random_schur_sign(n, r, 3000 + t);
    Rng rng(4000 + t);
    const Matrix w = rng.normal_matrix(6 + static_cast<int>(t % 7), r);
    const FactorizationSdpResult fs = solve_factorization_sdp(s.dense() * w.transpose());
    const auto opt = oracle::factorization_optimum(s.dense(), w);
    const double ex = (fs.x - opt.x).norm();
    const double ey = (fs.y - opt.y).norm();
    worst_x = std::max(worst_x, ex);
    worst_y = std::max(worst_y, ey);
    if (ex <= 1e-5 && ey <= 1e-5) ++ok;
  }
  return {ok == 50, fmt("%d/50 within 1e-5, max X err %.2e, max Y err %.2e", ok, worst_x, worst_y)};
}

Outcome nuclear_norm_sdp() {
  int ok = 0;
  double worst = 0.0;
  Rng rng(5000);
  for (int t = 0; t < 20; ++t) {
    const auto n = static_cast<Index>(1 + rng.uniform_index(10));
    const auto m = static_cast<Index>(1 + rng.uniform_index(10));
    const Matrix b = rng.normal_matrix(n, m);
    const SdpSolution sol = solve_linear_sdp(build_nuclear_norm_sdp(b));
    const double truth = Eigen::JacobiSVD<Matrix>(b).singularValues().sum();
    const double rel = std::abs(sol.objective_value - truth) / truth;
    worst = std::max(worst, rel);
    if (sol.converged && rel <= 1e-6) ++ok;
  }
  return {ok == 20, fmt("%d/20 within 1e-6 relative, worst %.2e", ok, worst)};
}

Outcome exact_bcd() {
  int ok = 0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    const BinaryMatrix z = random_schur_binary(30, 4, 6000 + t);
    Rng rng(7000 + t);
    const Matrix c = z.dense() * rng.normal_matrix(20, 4).transpose();
    try {
      const BinaryDecomposition d = bcd(c, {}, t);
      const bool matched = match_permutation(d.z, z).has_value();
      const bool small = (c - d.z.dense() * d.wplus.transpose()).norm() <= 1e-6 * c.norm();
      if (matched && small) ++ok;
    } catch (const Error&) {
    }
  }
  return {ok >= 99, fmt("%d/100 recovered", ok)};
}

Outcome seed_invariance() {
  int ok = 0;
  for (std::uint64_t t = 0; t < 20; ++t) {
    const int r = 2 + static_cast<int>(t % 4);
    const SignMatrix s = random_schur_sign(20, r, 8000 + t);
    Rng rng(9000 + t);
    const Matrix b = s.dense() * rng.normal_matrix(12, r).transpose();
    bool consistent = true;
    std::optional<SignMatrix> first;
    for (std::uint64_t seed = 0; seed < 5 && consistent; ++seed) {
      try {
        const SignMatrix found = asym_scd(b, {}, 31 * seed + 5).s;
        if (!first)
          first = found;
        else
          consistent = match_signed_permutation(*first, found).has_value();
      } catch (const Error&) {
        consistent = false;
      }
    }
    if (consistent) ++ok;
  }
  return {ok == 20, fmt("%d/20 instances seed invariant", ok)};
}

bool is_signed_permutation(const Matrix& q, bool allow_signs) {
  for (Index i = 0; i < q.rows(); ++i)
    for (Index j = 0; j < q.cols(); ++j) {
      const double v = q(i, j);
      if (v != 0.0 && v != 1.0 && !(allow_signs && v == -1.0)) return false;
    }
  return ((q.array() != 0.0).cast<int>().rowwise().sum() == 1).all() &&
         ((q.array() != 0.0).cast<int>().colwise().sum() == 1).all();
}

Matrix random_invertible(Rng& rng, Index r, bool allow_signs) {
  static const double vals[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  while (true) {
    Matrix q(r, r);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < r; ++j) q(i, j) = vals[rng.uniform_index(5)];
    if (std::abs(q.determinant()) > 1e-9 && !is_signed_permutation(q, allow_signs)) return q;
  }
}

Outcome transformations() {
  long long bad = 0;
  Rng rng(10000);
  for (std::uint64_t t = 0; t < 1000; ++t) {
    const int r = 2 + static_cast<int>(t % 3);
    const SignMatrix s = random_schur_sign(12, r, 11000 + t);
    const BinaryMatrix z = random_schur_binary(12, r, 12000 + t);
    const auto perm = rng.permutation(r);
    SignedPermutation sp;
    Permutation pp;
    sp.perm = pp.perm = perm;
    for (int i = 0; i < r; ++i) sp.signs.push_back(rng.sign() > 0 ? 1 : -1);

    const Matrix sq = s.dense() * sp.matrix();
    if (!(sq.array().abs() == 1.0).all() || !is_schur_sign(SignMatrix(sq))) ++bad;
    const Matrix zq = z.dense() * pp.matrix();
    if (!((zq.array() == 0.0) || (zq.array() == 1.0)).all() || !is_schur_binary(BinaryMatrix(zq))) ++bad;

    if (((s.dense() * random_invertible(rng, r, true)).array().abs() == 1.0).all()) ++bad;
    const Matrix zn = z.dense() * random_invertible(rng, r, false);
    if (((zn.array() == 0.0) || (zn.array() == 1.0)).all()) ++bad;
  }
  return {bad == 0, fmt("%lld counterexamples over 4 x 1000 trials", bad)};
}

Outcome schur_checkers() {
  long long disagreements = 0;
  long long correspondence = 0;
  Rng rng(13000);
  for (int t = 0; t < 1000; ++t) {
    const auto n = static_cast<Index>(1 + rng.uniform_index(15));
    const auto r = static_cast<Index>(1 + rng.uniform_index(6));
    const Matrix s = random_signs(rng, n, r);
    const Matrix z = random_bits(rng, n, r);
    if (is_schur_sign(SignMatrix(s)) != oracle::schur_sign(s)) ++disagreements;
    const bool zb = is_schur_binary(BinaryMatrix(z));
    if (zb != oracle::schur_binary(z)) ++disagreements;
    Matrix aug(n, r + 1);
    aug.leftCols(r) = 2.0 * z.array() - 1.0;
    aug.col(r).setOnes();
    if (zb != oracle::schur_sign(aug) || !correspondence_holds(BinaryMatrix(z))) ++correspondence;
  }
  return {disagreements == 0 && correspondence == 0,
          fmt("%lld checker disagreements, %lld correspondence failures over 1000 matrices", disagreements,
              correspondence)};
}

Outcome sparse_pipeline() {
  int ok = 0;
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 50; ++t) {
    const auto t0 = Clock::now();
    const SignMatrix s = permeant_sign(40, 2, 14000 + t, 0.5);
    const CorruptionInstance inst = sample_sparse_instance(s, 40, 80, 5.0, 15000 + t);
    try {
      SparsePipelineOptions opts;
      opts.seed = t;
      const SparsePipelineResult p = denoise_factorize_sparse(inst.b, opts);
      const bool close = (p.pcp.l - inst.l0).norm() <= 1e-4 * inst.l0.norm();
      if (close && match_signed_permutation(p.decomposition.s, s)) ++ok;
    } catch (const Error&) {
    }
    worst = std::max(worst, seconds_since(t0));
  }
  return {ok >= 45 && worst <= 30.0, fmt("%d/50 recovered, slowest %.2fs", ok, worst)};
}

Outcome outlier_pipeline() {
  int ok = 0;
  for (std::uint64_t t = 0; t < 50; ++t) {
    const SignMatrix s = random_schur_sign(30, 3, 16000 + t);
    const CorruptionInstance inst = sample_inlier_outlier(s, 200, 30, 17000 + t);
    try {
      OutlierPipelineOptions opts;
      opts.seed = t;
      const OutlierPipelineResult p = denoise_factorize_outliers(inst.b, 3, opts);
      const bool close = spectral_norm(p.reaper.p - range_projector(inst.l0)) <= 1e-3;
      if (close && match_signed_permutation(p.decomposition.s, s)) ++ok;
    } catch (const Error&) {
    }
  }
  return {ok >= 45, fmt("%d/50 recovered", ok)};
}

Outcome bound_battery() {
  const auto t0 = Clock::now();
  std::string detail;
  bool pass = true;

  const SignMatrix s = random_schur_sign(30, 3, 18000);
  const CoherenceReport coh = verify_coherence_bounds(s, 20, 1.0, 10000, 18001);
  pass = pass && coh.mu_left_violations == 0;
  detail += fmt("(a) %lld mu_left violations", coh.mu_left_violations);

  for (double t : {1.0, 3.0}) {
    const TailCheck c = verify_tail_bound(3, 50, t, 100000, 18002 + static_cast<std::uint64_t>(t));
    pass = pass && c.pass.value_or(false);
    detail += fmt("; (b) t=%g freq %.4f <= %.4f", t, c.frequency, c.bound + c.slack);
  }

  const TailCheck g = verify_gaussian_norm(30, 30, 2.0, 10000, 18010);
  pass = pass && g.pass.value_or(false);
  detail += fmt("; (c) freq %.4f <= %.4f", g.frequency, g.bound + g.slack);

  const WidthCheck w = verify_empirical_width(s, 40, 10000, 18011);
  pass = pass && w.pass.value_or(false);
  detail += fmt("; (d) mean %.3f <= %.3f", w.mean, w.bound + w.slack);

  const MarginalTailCheck mt = verify_marginal_tail(s, 50, 10000, 18012);
  pass = pass && mt.pass.value_or(false);
  detail += fmt("; (e) min freq %.4f >= %.4f", mt.min_frequency, mt.bound - mt.slack);

  const TailCheck sph = verify_spherical_bound(30, 3, 30, 2.0, 10000, 18013);
  pass = pass && sph.pass.value_or(false);
  detail += fmt("; (f) freq %.4f <= %.4f", sph.frequency, sph.bound + sph.slack);

  const double elapsed = seconds_since(t0);
  detail += fmt("; %.1fs", elapsed);
  return {pass && elapsed <= 600.0, detail};
}

Outcome planted_basis() {
  int ok = 0;
  for (std::uint64_t t = 0; t < 50; ++t) {
    const int r = 1 + static_cast<int>(t % 4);
    const SignMatrix s = random_schur_sign(20, r, 19000 + t);
    const Matrix u = orth_basis(s.dense());
    try {
      if (match_signed_permutation(planted_sign_basis(u, {}, t), s)) ++ok;
    } catch (const Error&) {
    }
  }
  return {ok >= 49, fmt("%d/50 recovered", ok)};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"exact sign component recovery", exact_scd},
      {"factorization SDP closed form", factorization_oracle},
      {"nuclear norm SDP", nuclear_norm_sdp},
      {"exact binary component recovery", exact_bcd},
      {"seed invariance", seed_invariance},
      {"transformation properties", transformations},
      {"Schur checkers vs exact oracle", schur_checkers},
      {"sparse-error pipeline", sparse_pipeline},
      {"outlier pipeline", outlier_pipeline},
      {"probabilistic bound battery", bound_battery},
      {"planted sign basis", planted_basis},
  };
  int failures = 0;
  int index = 1;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", index++, name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
