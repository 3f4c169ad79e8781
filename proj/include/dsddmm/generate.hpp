#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "dsddmm/error.hpp"
#include "dsddmm/matrix.hpp"

namespace dsddmm {

/// Random sparse matrix with exactly nnz_per_row distinct columns in every row.
/// Columns are sampled uniformly without replacement; values are Uniform(0, 1).
inline SparseMatrix erdos_renyi(index_t m, index_t n, index_t nnz_per_row, std::uint64_t seed) {
  if (m < 0 || n < 0) throw DimensionMismatch("erdos_renyi: negative dimension");
  if (nnz_per_row < 0 || nnz_per_row > n)
    throw DimensionMismatch("erdos_renyi: nnz_per_row " + std::to_string(nnz_per_row) + " exceeds " +
                            std::to_string(n) + " columns");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> value(0.0, 1.0);
  const auto k = static_cast<std::size_t>(nnz_per_row);
  std::vector<index_t> rows, cols;
  std::vector<double> vals;
  rows.reserve(static_cast<std::size_t>(m) * k);
  cols.reserve(static_cast<std::size_t>(m) * k);
  vals.reserve(static_cast<std::size_t>(m) * k);

  std::vector<index_t> picked;
  std::unordered_set<index_t> seen;
  for (index_t i = 0; i < m; ++i) {
    picked.clear();
    if (nnz_per_row == n) {
      picked.resize(k);
      std::iota(picked.begin(), picked.end(), index_t{0});
    } else {
      // Floyd's sampling: k draws, no rejection loop.
      seen.clear();
      for (index_t j = n - nnz_per_row; j < n; ++j) {
        const index_t t = std::uniform_int_distribution<index_t>(0, j)(rng);
        const index_t pick = seen.count(t) ? j : t;
        seen.insert(pick);
        picked.push_back(pick);
      }
      std::sort(picked.begin(), picked.end());
    }
    for (index_t j : picked) {
      rows.push_back(i);
      cols.push_back(j);
      vals.push_back(value(rng));
    }
  }
  return SparseMatrix::from_sorted(m, n, std::move(rows), std::move(cols), std::move(vals));
}

/// Dense matrix with Uniform(-1, 1) entries.
inline DenseMatrix random_dense(index_t rows, index_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  DenseMatrix out(rows, cols);
  for (double& x : out.data()) x = dist(rng);
  return out;
}

/// perm[i] is the new index of old index i.
using Permutation = std::vector<index_t>;

inline Permutation random_permutation(index_t n, std::mt19937_64& rng) {
  Permutation p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), index_t{0});
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

inline Permutation inverse(const Permutation& p) {
  Permutation inv(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) inv[static_cast<std::size_t>(p[i])] = static_cast<index_t>(i);
  return inv;
}

/// Moves entry (i, j) to (row_perm[i], col_perm[j]).
inline SparseMatrix permute(const SparseMatrix& s, const Permutation& row_perm, const Permutation& col_perm) {
  if (static_cast<index_t>(row_perm.size()) != s.rows() || static_cast<index_t>(col_perm.size()) != s.cols())
    throw DimensionMismatch("permute: permutation length does not match matrix dimensions");
  auto t = s.triplets();
  for (auto& e : t) {
    e.row = row_perm[static_cast<std::size_t>(e.row)];
    e.col = col_perm[static_cast<std::size_t>(e.col)];
  }
  return SparseMatrix::from_triplets(s.rows(), s.cols(), std::move(t));
}

struct PermutedMatrix {
  SparseMatrix matrix;
  Permutation row_perm;
  Permutation col_perm;
};

/// Independent random relabeling of rows and columns, used for load balance.
inline PermutedMatrix random_permute(const SparseMatrix& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Permutation rp = random_permutation(s.rows(), rng);
  Permutation cp = random_permutation(s.cols(), rng);
  SparseMatrix out = permute(s, rp, cp);
  return {std::move(out), std::move(rp), std::move(cp)};
}

}  // namespace dsddmm
