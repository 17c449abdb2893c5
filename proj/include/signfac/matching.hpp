#pragma once

// Equivalence of sign and binary factors under (signed) column permutations.
//
// Convention: a SignedPermutation (perm, signs) acts by S2 = S1 * M, where M is
// the r x r matrix with M(perm[i], i) = signs[i]. Column i of S2 is therefore
// signs[i] * (column perm[i] of S1).

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "signfac/errors.hpp"
#include "signfac/linalg.hpp"
#include "signfac/schur.hpp"

namespace signfac {

struct Permutation {
  std::vector<int> perm;

  bool valid() const {
    std::vector<bool> seen(perm.size(), false);
    for (int p : perm) {
      if (p < 0 || static_cast<std::size_t>(p) >= perm.size() || seen[static_cast<std::size_t>(p)]) return false;
      seen[static_cast<std::size_t>(p)] = true;
    }
    return true;
  }

  Matrix matrix() const {
    const auto r = static_cast<Index>(perm.size());
    Matrix m = Matrix::Zero(r, r);
    for (Index i = 0; i < r; ++i) m(perm[static_cast<std::size_t>(i)], i) = 1.0;
    return m;
  }
};

struct SignedPermutation {
  std::vector<int> perm;
  std::vector<int> signs;

  bool valid() const {
    if (signs.size() != perm.size()) return false;
    for (int s : signs)
      if (s != 1 && s != -1) return false;
    return Permutation{perm}.valid();
  }

  Matrix matrix() const {
    const auto r = static_cast<Index>(perm.size());
    Matrix m = Matrix::Zero(r, r);
    for (Index i = 0; i < r; ++i) m(perm[static_cast<std::size_t>(i)], i) = signs[static_cast<std::size_t>(i)];
    return m;
  }

  static SignedPermutation identity(int r) {
    SignedPermutation p;
    for (int i = 0; i < r; ++i) {
      p.perm.push_back(i);
      p.signs.push_back(1);
    }
    return p;
  }
};

namespace detail {

// Kuhn's augmenting-path bipartite matching. allowed[i][j]: target column i
// may be assigned source column j. Returns assignment target -> source.
inline std::optional<std::vector<int>> bipartite_match(const std::vector<std::vector<bool>>& allowed) {
  const std::size_t r = allowed.size();
  std::vector<int> source_owner(r, -1);
  std::vector<bool> visited;
  auto augment = [&](auto&& self, std::size_t i) -> bool {
    for (std::size_t j = 0; j < r; ++j) {
      if (!allowed[i][j] || visited[j]) continue;
      visited[j] = true;
      if (source_owner[j] < 0 || self(self, static_cast<std::size_t>(source_owner[j]))) {
        source_owner[j] = static_cast<int>(i);
        return true;
      }
    }
    return false;
  };
  for (std::size_t i = 0; i < r; ++i) {
    visited.assign(r, false);
    if (!augment(augment, i)) return std::nullopt;
  }
  std::vector<int> out(r, -1);
  for (std::size_t j = 0; j < r; ++j) out[static_cast<std::size_t>(source_owner[j])] = static_cast<int>(j);
  return out;
}

}  // namespace detail

/// (perm, signs) with S2 = S1 * M, or nullopt when the column sets differ.
inline std::optional<SignedPermutation> match_signed_permutation(const SignMatrix& s1, const SignMatrix& s2) {
  if (s1.rows() != s2.rows() || s1.cols() != s2.cols()) return std::nullopt;
  const auto r = static_cast<std::size_t>(s1.cols());
  std::vector<std::vector<bool>> allowed(r, std::vector<bool>(r, false));
  std::vector<std::vector<int>> sign(r, std::vector<int>(r, 0));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) {
      const auto a = s2.dense().col(static_cast<Index>(i));
      const auto b = s1.dense().col(static_cast<Index>(j));
      if (a == b) {
        allowed[i][j] = true;
        sign[i][j] = 1;
      } else if (a == -b) {
        allowed[i][j] = true;
        sign[i][j] = -1;
      }
    }
  const auto assignment = detail::bipartite_match(allowed);
  if (!assignment) return std::nullopt;
  SignedPermutation out;
  for (std::size_t i = 0; i < r; ++i) {
    const int j = (*assignment)[i];
    out.perm.push_back(j);
    out.signs.push_back(sign[i][static_cast<std::size_t>(j)]);
  }
  return out;
}

/// perm with Z2 = Z1 * M, or nullopt when the column sets differ.
inline std::optional<Permutation> match_permutation(const BinaryMatrix& z1, const BinaryMatrix& z2) {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols()) return std::nullopt;
  const auto r = static_cast<std::size_t>(z1.cols());
  std::vector<std::vector<bool>> allowed(r, std::vector<bool>(r, false));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j)
      allowed[i][j] = z2.dense().col(static_cast<Index>(i)) == z1.dense().col(static_cast<Index>(j));
  const auto assignment = detail::bipartite_match(allowed);
  if (!assignment) return std::nullopt;
  return Permutation{*assignment};
}

}  // namespace signfac
