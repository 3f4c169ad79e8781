#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dsddmm/error.hpp"
#include "dsddmm/fabric.hpp"
#include "dsddmm/kernels.hpp"
#include "dsddmm/layout.hpp"
#include "dsddmm/matrix.hpp"

namespace dsddmm {

enum class FusionStrategy { NoElision, ReplicationReuse, LocalKernelFusion };

inline constexpr std::array<FusionStrategy, 3> kAllStrategies = {
    FusionStrategy::NoElision, FusionStrategy::ReplicationReuse, FusionStrategy::LocalKernelFusion};

inline constexpr std::string_view to_string(FusionStrategy s) noexcept {
  switch (s) {
    case FusionStrategy::NoElision: return "none";
    case FusionStrategy::ReplicationReuse: return "reuse";
    case FusionStrategy::LocalKernelFusion: return "fusion";
  }
  return "?";
}

inline bool strategy_valid(Algorithm alg, FusionStrategy s) noexcept {
  if (s == FusionStrategy::LocalKernelFusion) return alg == Algorithm::D15DenseShift;
  if (s == FusionStrategy::ReplicationReuse) return alg != Algorithm::D25SparseRepl;
  return true;
}

inline void check_strategy(Algorithm alg, FusionStrategy s) {
  if (!strategy_valid(alg, s))
    throw IncompatibleStrategy("strategy '" + std::string(to_string(s)) + "' is not available for " +
                               std::string(to_string(alg)));
}

/// Global dimensions of one (possibly role-swapped) problem S (m x n),
/// A (m x r), B (n x r), together with the three distribution plans.
struct Problem {
  index_t m = 0, n = 0, r = 0;
  DistributionPlan s, a, b;

  static Problem make(const ProcessGrid& grid, index_t m, index_t n, index_t r) {
    return {m, n, r, make_plan(grid, MatrixRole::S), make_plan(grid, MatrixRole::A), make_plan(grid, MatrixRole::B)};
  }

  BlockExtent a_extent(BlockId id) const { return a.extent(id, m, r); }
  BlockExtent b_extent(BlockId id) const { return b.extent(id, n, r); }
};

namespace detail {

inline Block<DenseMatrix> dense_block(const DistributionPlan& plan, BlockId id, index_t rows, index_t cols,
                                      DenseMatrix m) {
  const BlockExtent e = plan.extent(id, rows, cols);
  if (m.rows() != e.rows || m.cols() != e.cols) throw LayoutError("output block has the wrong shape");
  return {id, e.row_begin, e.col_begin, std::move(m)};
}

/// Rows of several equally shaped matrices stacked in order.
inline DenseMatrix stack(const std::vector<const DenseMatrix*>& parts) {
  if (parts.empty()) return {};
  const index_t rows = parts.front()->rows();
  DenseMatrix out(rows * static_cast<index_t>(parts.size()), parts.front()->cols());
  for (std::size_t k = 0; k < parts.size(); ++k) out.set_block(rows * static_cast<index_t>(k), 0, *parts[k]);
  return out;
}

inline SparseMatrix zero_values(const SparseMatrix& s) {
  return s.with_values(std::vector<double>(static_cast<std::size_t>(s.nnz()), 0.0));
}

/// S values times an SDDMM partial.
inline SparseMatrix scale_by(const SparseMatrix& s, std::span<const double> partial) {
  std::vector<double> v(partial.begin(), partial.end());
  const auto sv = s.values();
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = sv[k] * v[k];
  return s.with_values(std::move(v));
}

}  // namespace detail
}  // namespace dsddmm
