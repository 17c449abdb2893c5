#pragma once

// Sign and binary matrices, exact Schur-independence certification, and
// seeded generators of Schur-independent families.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <Eigen/Dense>

#include "signfac/errors.hpp"
#include "signfac/linalg.hpp"
#include "signfac/rng.hpp"

namespace signfac {

using IntMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// n x r matrix with entries exactly +-1.
class SignMatrix {
 public:
  SignMatrix() = default;

  explicit SignMatrix(const Matrix& m) : values_(m) {
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = 0; i < m.rows(); ++i)
        if (m(i, j) != 1.0 && m(i, j) != -1.0)
          throw PreconditionError("SignMatrix: entry (" + std::to_string(i) + "," + std::to_string(j) + ") is not +-1");
  }

  /// Rounds entries to the nearest sign; every entry must lie within tol of +-1.
  static SignMatrix round(const Matrix& m, double tol) {
    Matrix out(m.rows(), m.cols());
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = 0; i < m.rows(); ++i) {
        const double s = m(i, j) >= 0.0 ? 1.0 : -1.0;
        if (!(std::abs(m(i, j) - s) <= tol))
          throw HypothesisViolation("entry (" + std::to_string(i) + "," + std::to_string(j) + ") = " +
                                        std::to_string(m(i, j)) + " is not within rounding tolerance of +-1",
                                    std::abs(m(i, j) - s));
        out(i, j) = s;
      }
    return SignMatrix(out);
  }

  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }
  double operator()(Index i, Index j) const { return values_(i, j); }
  const Matrix& dense() const { return values_; }
  Vector col(Index j) const { return values_.col(j); }

  SignMatrix select_columns(const std::vector<int>& idx) const {
    Matrix out(rows(), static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Index>(k)) = values_.col(idx[k]);
    return SignMatrix(out);
  }

  bool operator==(const SignMatrix& o) const { return values_ == o.values_; }

 private:
  Matrix values_;
};

/// n x r matrix with entries exactly 0 or 1.
class BinaryMatrix {
 public:
  BinaryMatrix() = default;

  explicit BinaryMatrix(const Matrix& m) : values_(m) {
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = 0; i < m.rows(); ++i)
        if (m(i, j) != 0.0 && m(i, j) != 1.0)
          throw PreconditionError("BinaryMatrix: entry (" + std::to_string(i) + "," + std::to_string(j) + ") is not 0/1");
  }

  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }
  double operator()(Index i, Index j) const { return values_(i, j); }
  const Matrix& dense() const { return values_; }
  Vector col(Index j) const { return values_.col(j); }

  bool operator==(const BinaryMatrix& o) const { return values_ == o.values_; }

 private:
  Matrix values_;
};

/// F(z) = 2z - e.
inline SignMatrix binary_to_sign(const BinaryMatrix& z) {
  return SignMatrix((2.0 * z.dense().array() - 1.0).matrix());
}

/// F^{-1}(s) = (s + e)/2.
inline BinaryMatrix sign_to_binary(const SignMatrix& s) {
  return BinaryMatrix((0.5 * (s.dense().array() + 1.0)).matrix());
}

namespace detail {

struct Overflow {};

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t out;
  if (__builtin_mul_overflow(a, b, &out)) throw Overflow{};
  return out;
}

inline std::int64_t checked_sub(std::int64_t a, std::int64_t b) {
  std::int64_t out;
  if (__builtin_sub_overflow(a, b, &out)) throw Overflow{};
  return out;
}

// Fraction-free (Bareiss) elimination. Every intermediate value is a minor of
// the input, so the divisions are exact.
template <typename Int, typename Mul, typename Sub>
int bareiss_rank(std::vector<std::vector<Int>> a, Mul mul, Sub sub) {
  const std::size_t rows = a.size();
  if (rows == 0) return 0;
  const std::size_t cols = a[0].size();
  Int prev = 1;
  std::size_t rank = 0;
  for (std::size_t col = 0; col < cols && rank < rows; ++col) {
    std::size_t piv = rank;
    while (piv < rows && a[piv][col] == 0) ++piv;
    if (piv == rows) continue;
    std::swap(a[piv], a[rank]);
    for (std::size_t i = rank + 1; i < rows; ++i) {
      for (std::size_t j = col + 1; j < cols; ++j) {
        a[i][j] = sub(mul(a[rank][col], a[i][j]), mul(a[i][col], a[rank][j]));
        a[i][j] /= prev;
      }
      a[i][col] = 0;
    }
    prev = a[rank][col];
    ++rank;
  }
  return static_cast<int>(rank);
}

}  // namespace detail

/// Exact rank of an integer matrix.
inline int exact_rank(const IntMatrix& m) {
  std::vector<std::vector<std::int64_t>> a(static_cast<std::size_t>(m.rows()),
                                           std::vector<std::int64_t>(static_cast<std::size_t>(m.cols())));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  try {
    return detail::bareiss_rank<std::int64_t>(a, detail::checked_mul, detail::checked_sub);
  } catch (const detail::Overflow&) {
    using Big = boost::multiprecision::cpp_int;
    std::vector<std::vector<Big>> big(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) big[i].assign(a[i].begin(), a[i].end());
    return detail::bareiss_rank<Big>(
        std::move(big), [](const Big& x, const Big& y) { return Big(x * y); },
        [](const Big& x, const Big& y) { return Big(x - y); });
  }
}

/// Columns e and s_i * s_j (i < j), as an integer matrix.
inline IntMatrix sign_schur_system(const SignMatrix& s) {
  const Index n = s.rows();
  const Index r = s.cols();
  IntMatrix out(n, 1 + r * (r - 1) / 2);
  out.col(0).setOnes();
  Index c = 1;
  for (Index i = 0; i < r; ++i)
    for (Index j = i + 1; j < r; ++j, ++c)
      for (Index k = 0; k < n; ++k) out(k, c) = static_cast<std::int64_t>(s(k, i) * s(k, j));
  return out;
}

/// Columns e, z_i, and z_i * z_j (i < j), as an integer matrix.
inline IntMatrix binary_schur_system(const BinaryMatrix& z) {
  const Index n = z.rows();
  const Index r = z.cols();
  IntMatrix out(n, 1 + r + r * (r - 1) / 2);
  out.col(0).setOnes();
  Index c = 1;
  for (Index i = 0; i < r; ++i, ++c)
    for (Index k = 0; k < n; ++k) out(k, c) = static_cast<std::int64_t>(z(k, i));
  for (Index i = 0; i < r; ++i)
    for (Index j = i + 1; j < r; ++j, ++c)
      for (Index k = 0; k < n; ++k) out(k, c) = static_cast<std::int64_t>(z(k, i) * z(k, j));
  return out;
}

inline bool is_schur_sign(const SignMatrix& s) {
  const IntMatrix sys = sign_schur_system(s);
  if (sys.cols() > sys.rows()) return false;
  return exact_rank(sys) == sys.cols();
}

inline bool is_schur_binary(const BinaryMatrix& z) {
  const IntMatrix sys = binary_schur_system(z);
  if (sys.cols() > sys.rows()) return false;
  return exact_rank(sys) == sys.cols();
}

/// Largest r with r <= (1 + sqrt(8n - 7))/2, i.e. r(r-1)/2 <= n - 1.
inline int max_sign_cardinality(int n) {
  if (n < 1) throw PreconditionError("max_sign_cardinality: n must be positive");
  int r = 1;
  while (static_cast<std::int64_t>(r + 1) * r / 2 <= static_cast<std::int64_t>(n) - 1) ++r;
  return r;
}

/// [F(Z) | e], the sign family associated with a binary family.
inline SignMatrix augmented_sign_family(const BinaryMatrix& z) {
  Matrix out(z.rows(), z.cols() + 1);
  out.leftCols(z.cols()) = binary_to_sign(z).dense();
  out.col(z.cols()).setOnes();
  return SignMatrix(out);
}

/// Self-test of the binary/sign correspondence: the two certificates agree.
inline bool correspondence_holds(const BinaryMatrix& z) {
  return is_schur_binary(z) == is_schur_sign(augmented_sign_family(z));
}

inline constexpr int kRejectionBudget = 1000;

inline SignMatrix random_schur_sign(int n, int r, std::uint64_t seed) {
  if (n < 1 || r < 1) throw PreconditionError("random_schur_sign: n and r must be positive");
  const int bound = max_sign_cardinality(n);
  if (r > bound)
    throw PreconditionError("random_schur_sign: r = " + std::to_string(r) + " exceeds the cardinality bound " +
                            std::to_string(bound) + " for n = " + std::to_string(n));
  Rng rng(seed);
  for (int draw = 0; draw < kRejectionBudget; ++draw) {
    Matrix m(n, r);
    for (Index j = 0; j < r; ++j)
      for (Index i = 0; i < n; ++i) m(i, j) = rng.sign();
    SignMatrix s(m);
    if (is_schur_sign(s)) return s;
  }
  throw PreconditionError("random_schur_sign: rejection budget exhausted");
}

inline BinaryMatrix random_schur_binary(int n, int r, std::uint64_t seed) {
  if (n < 1 || r < 1) throw PreconditionError("random_schur_binary: n and r must be positive");
  const int bound = max_sign_cardinality(n);
  if (r + 1 > bound)
    throw PreconditionError("random_schur_binary: r + 1 = " + std::to_string(r + 1) +
                            " exceeds the sign cardinality bound " + std::to_string(bound) + " for n = " +
                            std::to_string(n));
  Rng rng(seed);
  for (int draw = 0; draw < kRejectionBudget; ++draw) {
    Matrix m(n, r);
    for (Index j = 0; j < r; ++j)
      for (Index i = 0; i < n; ++i) m(i, j) = static_cast<double>(rng.next_u64() >> 63);
    BinaryMatrix z(m);
    if (is_schur_binary(z)) return z;
  }
  throw PreconditionError("random_schur_binary: rejection budget exhausted");
}

}  // namespace signfac
