#pragma once

// 1.5D dense shifting, dense replicating.
//
// Rank (u, v) of the (p/c) x c grid holds A and B row block u*c + v and the
// S blocks (u, j) with j % c == v. A is all-gathered along the fiber into T,
// which covers S block-row u; B (or the B-shaped accumulator) travels around
// the layer for p/c phases. At phase t the travelling block is
// ((u - t) mod p/c) * c + v.

#include <vector>

#include "dsddmm/algorithms/common.hpp"

namespace dsddmm::algo {

class D15Dense {
 public:
  D15Dense(RankContext& ctx, const Problem& pb, const EdgeScore& score)
      : ctx_(ctx), pb_(pb), score_(score) {
    const GridCoord g = ctx.coord();
    u_ = g[0];
    v_ = g[1];
    c_ = ctx.grid().c();
    layer_ = ctx.grid().layer_size();
  }

  LocalSlice<SparseMatrix> sddmm(const LocalSlice<SparseMatrix>& s, const LocalSlice<DenseMatrix>& a,
                                 const LocalSlice<DenseMatrix>& b) {
    return sddmm_with(gather(a), s, b);
  }

  LocalSlice<DenseMatrix> spmm_a(const LocalSlice<SparseMatrix>& s, const LocalSlice<DenseMatrix>& b) {
    DenseMatrix acc(pb_.s.extent({u_, 0}, pb_.m, pb_.n).rows, pb_.r);
    DenseMatrix cur = b.at(home()).matrix;
    for (int t = 0; t < layer_; ++t) {
      local::spmm_a(s.at({u_, phase_block(t)}).matrix, cur.view(), acc.view(), ctx_.ops());
      cur = cyclic_shift(ctx_, std::move(cur), Axis::Layer);
    }
    return a_slice(reduce_scatter(ctx_, acc, Axis::Fiber));
  }

  LocalSlice<DenseMatrix> spmm_b(const LocalSlice<SparseMatrix>& s, const LocalSlice<DenseMatrix>& a) {
    return spmm_b_with(gather(a), s);
  }

  /// SDDMM followed by SpMMB sharing one gathered copy of A.
  LocalSlice<DenseMatrix> reuse(const LocalSlice<SparseMatrix>& s, const LocalSlice<DenseMatrix>& a,
                                const LocalSlice<DenseMatrix>& b) {
    const DenseMatrix t = gather(a);
    const LocalSlice<SparseMatrix> r = sddmm_with(t, s, b);
    return spmm_b_with(t, r);
  }

  /// One propagation round computing FusedMMA with a local fused kernel.
  LocalSlice<DenseMatrix> fused_local(const LocalSlice<SparseMatrix>& s, const LocalSlice<DenseMatrix>& a,
                                      const LocalSlice<DenseMatrix>& b) {
    const DenseMatrix t_in = gather(a);
    DenseMatrix t_acc(t_in.rows(), t_in.cols());
    const ScoreSlab sc = ScoreSlab::of(score_, pb_.r, 0, pb_.r);
    DenseMatrix cur = b.at(home()).matrix;
    for (int t = 0; t < layer_; ++t) {
      local::fusedmm_a(s.at({u_, phase_block(t)}).matrix, t_in.view(), cur.view(), t_acc.view(), sc, ctx_.ops());
      cur = cyclic_shift(ctx_, std::move(cur), Axis::Layer);
    }
    return a_slice(reduce_scatter(ctx_, t_acc, Axis::Fiber));
  }

 private:
  BlockId home() const { return {static_cast<index_t>(u_) * c_ + v_, 0}; }
  index_t phase_block(int t) const { return static_cast<index_t>(detail::mod(u_ - t, layer_)) * c_ + v_; }

  DenseMatrix gather(const LocalSlice<DenseMatrix>& a) { return allgather(ctx_, a.at(home()).matrix, Axis::Fiber); }

  LocalSlice<SparseMatrix> sddmm_with(const DenseMatrix& t, const LocalSlice<SparseMatrix>& s,
                                      const LocalSlice<DenseMatrix>& b) {
    std::vector<std::vector<double>> partial;
    for (const auto& blk : s.blocks) partial.emplace_back(static_cast<std::size_t>(blk.matrix.nnz()), 0.0);
    auto index_of = [&](index_t j) {
      for (std::size_t k = 0; k < s.blocks.size(); ++k)
        if (s.blocks[k].id == BlockId{u_, j}) return k;
      throw LayoutError("missing S block");
    };
    const ScoreSlab sc = ScoreSlab::of(score_, pb_.r, 0, pb_.r);
    DenseMatrix cur = b.at(home()).matrix;
    for (int ph = 0; ph < layer_; ++ph) {
      const std::size_t k = index_of(phase_block(ph));
      local::sddmm_partial(t.view(), cur.view(), s.blocks[k].matrix, partial[k], sc, ctx_.ops());
      cur = cyclic_shift(ctx_, std::move(cur), Axis::Layer);
    }
    LocalSlice<SparseMatrix> out{ctx_.rank(), {}};
    for (std::size_t k = 0; k < s.blocks.size(); ++k) {
      const auto& blk = s.blocks[k];
      out.blocks.push_back({blk.id, blk.row_offset, blk.col_offset, detail::scale_by(blk.matrix, partial[k])});
    }
    return out;
  }

  LocalSlice<DenseMatrix> spmm_b_with(const DenseMatrix& t, const LocalSlice<SparseMatrix>& s) {
    const BlockExtent e = pb_.b_extent(home());
    DenseMatrix acc(e.rows, e.cols);
    for (int ph = 0; ph < layer_; ++ph) {
      local::spmm_b(s.at({u_, phase_block(ph)}).matrix, t.view(), acc.view(), ctx_.ops());
      acc = cyclic_shift(ctx_, std::move(acc), Axis::Layer);
    }
    return {ctx_.rank(), {detail::dense_block(pb_.b, home(), pb_.n, pb_.r, std::move(acc))}};
  }

  LocalSlice<DenseMatrix> a_slice(DenseMatrix m) const {
    return {ctx_.rank(), {detail::dense_block(pb_.a, home(), pb_.m, pb_.r, std::move(m))}};
  }

  RankContext& ctx_;
  const Problem& pb_;
  const EdgeScore& score_;
  int u_ = 0, v_ = 0, c_ = 1, layer_ = 1;
};

}  // namespace dsddmm::algo
