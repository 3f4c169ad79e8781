#pragma once

// 2.5D sparse replicating.
//
// Every layer holds the coordinates of S block (x, y); layer w owns only
// value chunk w. Dense matrices are cut into q*c column slabs and layer w
// handles the slabs k with k % c == w. Within a layer A moves along the row
// and B along the column while S stays put; value arrays are exchanged
// along the fiber without coordinates.

#include <algorithm>
#include <vector>

#include "dsddmm/algorithms/common.hpp"

namespace dsddmm::algo {

class D25Sparse {
 public:
  D25Sparse(RankContext& ctx, const Problem& pb, const EdgeScore& score) : ctx_(ctx), pb_(pb), score_(score) {
    const GridCoord g = ctx.coord();
    x_ = g[0];
    y_ = g[1];
    w_ = g[2];
    c_ = ctx.grid().c();
    q_ = ctx.grid().side();
    sigma_ = (x_ + y_) % q_;
    slab_ = pb.r / (static_cast<index_t>(q_) * c_);
  }

  LocalSlice<SparseMatrix> sddmm(const LocalSlice<SparseMatrix>& s, const LocalSlice<DenseMatrix>& a,
                                 const LocalSlice<DenseMatrix>& b) {
    const auto& home = s.at(s_home());
    const SparseMatrix full = replicate_values(home.matrix);
    std::vector<double> partial(static_cast<std::size_t>(full.nnz()), 0.0);
    DenseMatrix acur = a.at(a_home()).matrix;
    DenseMatrix bcur = b.at(b_home()).matrix;
    for (int t = 0; t < q_; ++t) {
      const index_t k = slab_index(t);
      const ScoreSlab sc = ScoreSlab::of(score_, pb_.r, k * slab_, slab_);
      local::sddmm_partial(acur.view(), bcur.view(), full, partial, sc, ctx_.ops());
      acur = cyclic_shift(ctx_, std::move(acur), Axis::Row, -1);
      bcur = cyclic_shift(ctx_, std::move(bcur), Axis::Column, -1);
    }
    const SparseMatrix scaled = detail::scale_by(full, partial);
    const index_t chunk = chunk_size(full.nnz());
    std::vector<double> padded(scaled.values().begin(), scaled.values().end());
    padded.resize(static_cast<std::size_t>(chunk * c_), 0.0);
    const std::vector<double> reduced = reduce_values(ctx_, padded, Axis::Fiber);
    std::vector<double> vals(static_cast<std::size_t>(full.nnz()), 0.0);
    const auto [lo, hi] = value_chunk(full.nnz(), c_, w_);
    for (index_t k = lo; k < hi; ++k) vals[static_cast<std::size_t>(k)] = reduced[static_cast<std::size_t>(k - lo)];
    return {ctx_.rank(), {{home.id, home.row_offset, home.col_offset, home.matrix.with_values(std::move(vals))}}};
  }

  LocalSlice<DenseMatrix> spmm_a(const LocalSlice<SparseMatrix>& s, const LocalSlice<DenseMatrix>& b) {
    const SparseMatrix full = replicate_values(s.at(s_home()).matrix);
    DenseMatrix acc(pb_.m / q_, slab_);
    DenseMatrix bcur = b.at(b_home()).matrix;
    for (int t = 0; t < q_; ++t) {
      local::spmm_a(full, bcur.view(), acc.view(), ctx_.ops());
      acc = cyclic_shift(ctx_, std::move(acc), Axis::Row, -1);
      bcur = cyclic_shift(ctx_, std::move(bcur), Axis::Column, -1);
    }
    return {ctx_.rank(), {detail::dense_block(pb_.a, a_home(), pb_.m, pb_.r, std::move(acc))}};
  }

  LocalSlice<DenseMatrix> spmm_b(const LocalSlice<SparseMatrix>& s, const LocalSlice<DenseMatrix>& a) {
    const SparseMatrix full = replicate_values(s.at(s_home()).matrix);
    DenseMatrix acc(pb_.n / q_, slab_);
    DenseMatrix acur = a.at(a_home()).matrix;
    for (int t = 0; t < q_; ++t) {
      local::spmm_b(full, acur.view(), acc.view(), ctx_.ops());
      acur = cyclic_shift(ctx_, std::move(acur), Axis::Row, -1);
      acc = cyclic_shift(ctx_, std::move(acc), Axis::Column, -1);
    }
    return {ctx_.rank(), {detail::dense_block(pb_.b, b_home(), pb_.n, pb_.r, std::move(acc))}};
  }

 private:
  index_t home_slab() const { return static_cast<index_t>(sigma_) * c_ + w_; }
  index_t slab_index(int t) const { return static_cast<index_t>((sigma_ + t) % q_) * c_ + w_; }
  BlockId s_home() const { return {x_, y_}; }
  BlockId a_home() const { return {home_slab(), x_}; }
  BlockId b_home() const { return {y_, home_slab()}; }

  index_t chunk_size(index_t nnz) const { return (nnz + c_ - 1) / c_; }

  /// Coordinates of the local block with every layer's value chunk filled in.
  SparseMatrix replicate_values(const SparseMatrix& mine) {
    check_fiber_pattern(ctx_, mine, Axis::Fiber);
    const index_t chunk = chunk_size(mine.nnz());
    const auto [lo, hi] = value_chunk(mine.nnz(), c_, w_);
    std::vector<double> own(static_cast<std::size_t>(chunk), 0.0);
    std::copy(mine.values().begin() + lo, mine.values().begin() + hi, own.begin());
    std::vector<double> all = allgather_values(ctx_, own, Axis::Fiber);
    all.resize(static_cast<std::size_t>(mine.nnz()));
    return mine.with_values(std::move(all));
  }

  RankContext& ctx_;
  const Problem& pb_;
  const EdgeScore& score_;
  int x_ = 0, y_ = 0, w_ = 0, c_ = 1, q_ = 1, sigma_ = 0;
  index_t slab_ = 0;
};

}  // namespace dsddmm::algo
