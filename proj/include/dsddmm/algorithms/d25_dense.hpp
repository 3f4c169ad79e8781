#pragma once

// 2.5D dense replicating.
//
// Rank (x, y, w) of the q x q x c grid gathers A row block x, column slab y
// along the fiber. Partitioning pre-skews the layer so that rank (x, y)
// starts with S block (x, s*c + w) and B block (s*c + w, y), s = (x + y) mod q.
// Each phase moves S (or its partial) one step back along the row and B (or
// its accumulator) one step back along the column, Cannon style.

#include <vector>

#include "dsddmm/algorithms/common.hpp"

namespace dsddmm::algo {

class D25Dense {
 public:
  D25Dense(RankContext& ctx, const Problem& pb, const EdgeScore& score) : ctx_(ctx), pb_(pb), score_(score) {
    const GridCoord g = ctx.coord();
    x_ = g[0];
    y_ = g[1];
    w_ = g[2];
    c_ = ctx.grid().c();
    q_ = ctx.grid().side();
    sigma_ = (x_ + y_) % q_;
    slab_ = pb.r / q_;
  }

  LocalSlice<SparseMatrix> sddmm(const LocalSlice<SparseMatrix>& s, const LocalSlice<DenseMatrix>& a,
                                 const LocalSlice<DenseMatrix>& b) {
    return sddmm_with(gather(a), s, b);
  }

  LocalSlice<DenseMatrix> spmm_a(const LocalSlice<SparseMatrix>& s, const LocalSlice<DenseMatrix>& b) {
    DenseMatrix acc(pb_.m / q_, slab_);
    SparseMatrix cur = s.at(s_home()).matrix;
    DenseMatrix bcur = b.at(b_home()).matrix;
    for (int t = 0; t < q_; ++t) {
      local::spmm_a(cur, bcur.view(), acc.view(), ctx_.ops());
      cur = cyclic_shift(ctx_, std::move(cur), Axis::Row, -1);
      bcur = cyclic_shift(ctx_, std::move(bcur), Axis::Column, -1);
    }
    return {ctx_.rank(), {detail::dense_block(pb_.a, a_home(), pb_.m, pb_.r, reduce_scatter(ctx_, acc, Axis::Fiber))}};
  }

  LocalSlice<DenseMatrix> spmm_b(const LocalSlice<SparseMatrix>& s, const LocalSlice<DenseMatrix>& a) {
    return spmm_b_with(gather(a), s);
  }

  LocalSlice<DenseMatrix> reuse(const LocalSlice<SparseMatrix>& s, const LocalSlice<DenseMatrix>& a,
                                const LocalSlice<DenseMatrix>& b) {
    const DenseMatrix t = gather(a);
    const LocalSlice<SparseMatrix> r = sddmm_with(t, s, b);
    return spmm_b_with(t, r);
  }

 private:
  BlockId a_home() const { return {static_cast<index_t>(x_) * c_ + w_, y_}; }
  BlockId b_home() const { return {static_cast<index_t>(sigma_) * c_ + w_, y_}; }
  BlockId s_home() const { return {x_, static_cast<index_t>(sigma_) * c_ + w_}; }

  DenseMatrix gather(const LocalSlice<DenseMatrix>& a) { return allgather(ctx_, a.at(a_home()).matrix, Axis::Fiber); }

  LocalSlice<SparseMatrix> sddmm_with(const DenseMatrix& t, const LocalSlice<SparseMatrix>& s,
                                      const LocalSlice<DenseMatrix>& b) {
    const ScoreSlab sc = ScoreSlab::of(score_, pb_.r, static_cast<index_t>(y_) * slab_, slab_);
    const auto& home = s.at(s_home());
    SparseMatrix cur = detail::zero_values(home.matrix);
    DenseMatrix bcur = b.at(b_home()).matrix;
    for (int ph = 0; ph < q_; ++ph) {
      local::sddmm_partial(t.view(), bcur.view(), cur, cur.values(), sc, ctx_.ops());
      cur = cyclic_shift(ctx_, std::move(cur), Axis::Row, -1);
      bcur = cyclic_shift(ctx_, std::move(bcur), Axis::Column, -1);
    }
    return {ctx_.rank(), {{home.id, home.row_offset, home.col_offset, detail::scale_by(home.matrix, cur.values())}}};
  }

  LocalSlice<DenseMatrix> spmm_b_with(const DenseMatrix& t, const LocalSlice<SparseMatrix>& s) {
    const BlockExtent e = pb_.b_extent(b_home());
    DenseMatrix acc(e.rows, e.cols);
    SparseMatrix cur = s.at(s_home()).matrix;
    for (int ph = 0; ph < q_; ++ph) {
      local::spmm_b(cur, t.view(), acc.view(), ctx_.ops());
      cur = cyclic_shift(ctx_, std::move(cur), Axis::Row, -1);
      acc = cyclic_shift(ctx_, std::move(acc), Axis::Column, -1);
    }
    return {ctx_.rank(), {detail::dense_block(pb_.b, b_home(), pb_.n, pb_.r, std::move(acc))}};
  }

  RankContext& ctx_;
  const Problem& pb_;
  const EdgeScore& score_;
  int x_ = 0, y_ = 0, w_ = 0, c_ = 1, q_ = 1, sigma_ = 0;
  index_t slab_ = 0;
};

}  // namespace dsddmm::algo
