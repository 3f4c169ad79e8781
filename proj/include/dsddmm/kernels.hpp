#pragma once

// Sequential SDDMM / SpMM / FusedMM kernels.
//
// The functions in namespace dsddmm are the serial reference (whole-matrix)
// kernels. The functions in dsddmm::local are the accumulate-into-buffer
// variants that the distributed algorithms call on their local blocks.
// Nonzeros are always visited in sorted coordinate order.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dsddmm/error.hpp"
#include "dsddmm/matrix.hpp"

namespace dsddmm {

/// Fused multiply-add counter.
struct OpCounter {
  std::uint64_t fma = 0;
};

/// How an SDDMM scores the nonzero (i, j).
///   Dot:    <A_i, B_j>
///   Concat: a[0:r] . A_i + a[r:2r] . B_j   (attention-style concatenation score)
struct EdgeScore {
  enum class Kind { Dot, Concat };
  Kind kind = Kind::Dot;
  std::vector<double> weights;

  static EdgeScore dot() { return {}; }
  static EdgeScore concat(std::vector<double> a) { return {Kind::Concat, std::move(a)}; }

  bool is_dot() const noexcept { return kind == Kind::Dot; }

  /// Score for the transposed problem (roles of A and B exchanged).
  EdgeScore swapped() const {
    if (is_dot()) return *this;
    const std::size_t r = weights.size() / 2;
    std::vector<double> w(weights.begin() + static_cast<std::ptrdiff_t>(r), weights.end());
    w.insert(w.end(), weights.begin(), weights.begin() + static_cast<std::ptrdiff_t>(r));
    return concat(std::move(w));
  }
};

/// The part of an EdgeScore that applies to a column slab [offset, offset + width).
struct ScoreSlab {
  EdgeScore::Kind kind = EdgeScore::Kind::Dot;
  std::span<const double> lhs;
  std::span<const double> rhs;

  static ScoreSlab of(const EdgeScore& s, index_t r, index_t offset, index_t width) {
    if (s.is_dot()) return {};
    const auto* w = s.weights.data();
    return {EdgeScore::Kind::Concat, {w + offset, static_cast<std::size_t>(width)},
            {w + r + offset, static_cast<std::size_t>(width)}};
  }
};

namespace local {

inline double dot(const double* a, const double* b, index_t n) noexcept {
  double acc = 0.0;
  for (index_t k = 0; k < n; ++k) acc += a[k] * b[k];
  return acc;
}

inline double score(const ScoreSlab& s, const double* a, const double* b, index_t n) noexcept {
  if (s.kind == EdgeScore::Kind::Dot) return dot(a, b, n);
  return dot(s.lhs.data(), a, n) + dot(s.rhs.data(), b, n);
}

inline std::uint64_t score_fma(const ScoreSlab& s, index_t n) noexcept {
  return static_cast<std::uint64_t>(s.kind == EdgeScore::Kind::Dot ? n : 2 * n);
}

/// out[k] += score(A_{i_k}, B_{j_k}) over the pattern of S; S values are not applied.
inline void sddmm_partial(ConstDenseView a, ConstDenseView b, const SparseMatrix& s, std::span<double> out,
                          const ScoreSlab& sc, OpCounter& ops) {
  const auto ri = s.row_indices();
  const auto ci = s.col_indices();
  const index_t w = a.cols;
  for (std::size_t k = 0; k < ri.size(); ++k) out[k] += score(sc, a.row(ri[k]), b.row(ci[k]), w);
  ops.fma += static_cast<std::uint64_t>(ri.size()) * score_fma(sc, w);
}

/// out_i += S_ij * B_j.
inline void spmm_a(const SparseMatrix& s, ConstDenseView b, DenseView out, OpCounter& ops) {
  const auto ri = s.row_indices();
  const auto ci = s.col_indices();
  const auto v = s.values();
  const index_t w = b.cols;
  for (std::size_t k = 0; k < ri.size(); ++k) {
    double* dst = out.row(ri[k]);
    const double* src = b.row(ci[k]);
    const double x = v[k];
    for (index_t t = 0; t < w; ++t) dst[t] += x * src[t];
  }
  ops.fma += static_cast<std::uint64_t>(ri.size()) * static_cast<std::uint64_t>(w);
}

/// out_j += S_ij * A_i.
inline void spmm_b(const SparseMatrix& s, ConstDenseView a, DenseView out, OpCounter& ops) {
  const auto ri = s.row_indices();
  const auto ci = s.col_indices();
  const auto v = s.values();
  const index_t w = a.cols;
  for (std::size_t k = 0; k < ri.size(); ++k) {
    double* dst = out.row(ci[k]);
    const double* src = a.row(ri[k]);
    const double x = v[k];
    for (index_t t = 0; t < w; ++t) dst[t] += x * src[t];
  }
  ops.fma += static_cast<std::uint64_t>(ri.size()) * static_cast<std::uint64_t>(w);
}

/// out_i += (S_ij * score(A_i, B_j)) * B_j without materializing the SDDMM output.
inline void fusedmm_a(const SparseMatrix& s, ConstDenseView a, ConstDenseView b, DenseView out,
                      const ScoreSlab& sc, OpCounter& ops) {
  const auto ri = s.row_indices();
  const auto ci = s.col_indices();
  const auto v = s.values();
  const index_t w = a.cols;
  for (std::size_t k = 0; k < ri.size(); ++k) {
    const double* brow = b.row(ci[k]);
    const double x = v[k] * score(sc, a.row(ri[k]), brow, w);
    double* dst = out.row(ri[k]);
    for (index_t t = 0; t < w; ++t) dst[t] += x * brow[t];
  }
  ops.fma += static_cast<std::uint64_t>(ri.size()) * (score_fma(sc, w) + static_cast<std::uint64_t>(w));
}

/// out_j += (S_ij * score(A_i, B_j)) * A_i.
inline void fusedmm_b(const SparseMatrix& s, ConstDenseView a, ConstDenseView b, DenseView out,
                      const ScoreSlab& sc, OpCounter& ops) {
  const auto ri = s.row_indices();
  const auto ci = s.col_indices();
  const auto v = s.values();
  const index_t w = a.cols;
  for (std::size_t k = 0; k < ri.size(); ++k) {
    const double* arow = a.row(ri[k]);
    const double x = v[k] * score(sc, arow, b.row(ci[k]), w);
    double* dst = out.row(ci[k]);
    for (index_t t = 0; t < w; ++t) dst[t] += x * arow[t];
  }
  ops.fma += static_cast<std::uint64_t>(ri.size()) * (score_fma(sc, w) + static_cast<std::uint64_t>(w));
}

}  // namespace local

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionMismatch(what);
}

inline std::string dims(index_t r, index_t c) { return std::to_string(r) + "x" + std::to_string(c); }

inline void check_sddmm_dims(const DenseMatrix& a, const DenseMatrix& b, const SparseMatrix& s) {
  require(a.rows() == s.rows(), "A: expected " + std::to_string(s.rows()) + " rows to match S " +
                                    dims(s.rows(), s.cols()) + ", got " + dims(a.rows(), a.cols()));
  require(b.rows() == s.cols(), "B: expected " + std::to_string(s.cols()) + " rows to match S " +
                                    dims(s.rows(), s.cols()) + ", got " + dims(b.rows(), b.cols()));
  require(a.cols() == b.cols(), "B: expected " + std::to_string(a.cols()) + " columns to match A, got " +
                                    std::to_string(b.cols()));
}

}  // namespace detail

/// S * (A . B^T), evaluated only at the nonzeros of S.
inline SparseMatrix sddmm(const DenseMatrix& a, const DenseMatrix& b, const SparseMatrix& s,
                          OpCounter* ops = nullptr) {
  detail::check_sddmm_dims(a, b, s);
  OpCounter scratch;
  std::vector<double> out(static_cast<std::size_t>(s.nnz()), 0.0);
  local::sddmm_partial(a.view(), b.view(), s, out, {}, ops ? *ops : scratch);
  const auto v = s.values();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = v[k] * out[k];
  return s.to_coo().with_values(std::move(out));
}

/// Attention-style SDDMM: out_ij = S_ij * (a[0:r] . A_i + a[r:2r] . B_j).
inline SparseMatrix sddmm_concat(const DenseMatrix& a, const DenseMatrix& b, const SparseMatrix& s,
                                 std::span<const double> weights, OpCounter* ops = nullptr) {
  detail::check_sddmm_dims(a, b, s);
  if (static_cast<index_t>(weights.size()) != a.cols() + b.cols())
    throw DimensionMismatch("a_vec: expected length " + std::to_string(a.cols() + b.cols()) + ", got " +
                            std::to_string(weights.size()));
  const EdgeScore sc = EdgeScore::concat({weights.begin(), weights.end()});
  OpCounter scratch;
  std::vector<double> out(static_cast<std::size_t>(s.nnz()), 0.0);
  local::sddmm_partial(a.view(), b.view(), s, out, ScoreSlab::of(sc, a.cols(), 0, a.cols()),
                       ops ? *ops : scratch);
  const auto v = s.values();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = v[k] * out[k];
  return s.to_coo().with_values(std::move(out));
}

/// Dispatches on the score kind.
inline SparseMatrix sddmm_scored(const DenseMatrix& a, const DenseMatrix& b, const SparseMatrix& s,
                                 const EdgeScore& score, OpCounter* ops = nullptr) {
  return score.is_dot() ? sddmm(a, b, s, ops) : sddmm_concat(a, b, s, score.weights, ops);
}

/// S . B
inline DenseMatrix spmm_a(const SparseMatrix& s, const DenseMatrix& b, OpCounter* ops = nullptr) {
  detail::require(b.rows() == s.cols(), "B: expected " + std::to_string(s.cols()) + " rows to match S " +
                                            detail::dims(s.rows(), s.cols()) + ", got " +
                                            detail::dims(b.rows(), b.cols()));
  OpCounter scratch;
  DenseMatrix out(s.rows(), b.cols());
  local::spmm_a(s, b.view(), out.view(), ops ? *ops : scratch);
  return out;
}

/// S^T . A
inline DenseMatrix spmm_b(const SparseMatrix& s, const DenseMatrix& a, OpCounter* ops = nullptr) {
  detail::require(a.rows() == s.rows(), "A: expected " + std::to_string(s.rows()) + " rows to match S " +
                                            detail::dims(s.rows(), s.cols()) + ", got " +
                                            detail::dims(a.rows(), a.cols()));
  OpCounter scratch;
  DenseMatrix out(s.cols(), a.cols());
  local::spmm_b(s, a.view(), out.view(), ops ? *ops : scratch);
  return out;
}

/// FusedMMA = SpMMA(SDDMM(A, B, S), B); FusedMMB = SpMMB(SDDMM(A, B, S), A).
inline DenseMatrix fusedmm_local(KernelMode mode, const SparseMatrix& s, const DenseMatrix& a,
                                 const DenseMatrix& b, const EdgeScore& score = {}, OpCounter* ops = nullptr) {
  if (!is_fused(mode))
    throw IncompatibleStrategy("fusedmm_local: mode " + std::string(to_string(mode)) + " is not a FusedMM mode");
  detail::check_sddmm_dims(a, b, s);
  if (!score.is_dot() && static_cast<index_t>(score.weights.size()) != 2 * a.cols())
    throw DimensionMismatch("a_vec: expected length " + std::to_string(2 * a.cols()));
  OpCounter scratch;
  const ScoreSlab sc = ScoreSlab::of(score, a.cols(), 0, a.cols());
  if (mode == KernelMode::FusedMMA) {
    DenseMatrix out(s.rows(), a.cols());
    local::fusedmm_a(s, a.view(), b.view(), out.view(), sc, ops ? *ops : scratch);
    return out;
  }
  DenseMatrix out(s.cols(), a.cols());
  local::fusedmm_b(s, a.view(), b.view(), out.view(), sc, ops ? *ops : scratch);
  return out;
}

inline SparseMatrix transpose(const SparseMatrix& s) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(s.nnz()));
  const auto ri = s.row_indices();
  const auto ci = s.col_indices();
  const auto v = s.values();
  for (std::size_t k = 0; k < ri.size(); ++k) t.push_back({ci[k], ri[k], v[k]});
  return SparseMatrix::from_triplets(s.cols(), s.rows(), std::move(t));
}

/// Dense expansion, handy for tests and small-scale checks.
inline DenseMatrix to_dense(const SparseMatrix& s) {
  DenseMatrix out(s.rows(), s.cols());
  const auto ri = s.row_indices();
  const auto ci = s.col_indices();
  const auto v = s.values();
  for (std::size_t k = 0; k < ri.size(); ++k) out(ri[k], ci[k]) = v[k];
  return out;
}

}  // namespace dsddmm
