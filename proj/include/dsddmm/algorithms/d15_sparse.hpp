#pragma once

// 1.5D sparse shifting, dense replicating.
//
// Dense matrices are cut into p/c column slabs. Rank (u, v) holds slab u of
// the row blocks i with i % c == v, and S column block u*c + v. Gathering A
// along the fiber yields all m rows of slab u. S (or the SDDMM partial that
// rides on its coordinates) travels around the layer; B stays put.

#include <vector>

#include "dsddmm/algorithms/common.hpp"

namespace dsddmm::algo {

class D15Sparse {
 public:
  D15Sparse(RankContext& ctx, const Problem& pb, const EdgeScore& score) : ctx_(ctx), pb_(pb), score_(score) {
    const GridCoord g = ctx.coord();
    u_ = g[0];
    v_ = g[1];
    c_ = ctx.grid().c();
    layer_ = ctx.grid().layer_size();
    width_ = pb.r / layer_;
  }

  LocalSlice<SparseMatrix> sddmm(const LocalSlice<SparseMatrix>& s, const LocalSlice<DenseMatrix>& a,
                                 const LocalSlice<DenseMatrix>& b) {
    return sddmm_with(gather(a), s, b);
  }

  LocalSlice<DenseMatrix> spmm_a(const LocalSlice<SparseMatrix>& s, const LocalSlice<DenseMatrix>& b) {
    DenseMatrix acc(pb_.m, width_);
    SparseMatrix cur = s.at(s_home()).matrix;
    for (int t = 0; t < layer_; ++t) {
      local::spmm_a(cur, b.at(dense_id(phase_block(t))).matrix.view(), acc.view(), ctx_.ops());
      cur = cyclic_shift(ctx_, std::move(cur), Axis::Layer);
    }
    // Regroup rows so that chunk v' of the buffer holds the blocks owned by
    // fiber member v', then reduce.
    const index_t br = pb_.m / ctx_.grid().p();
    std::vector<const DenseMatrix*> parts;
    std::vector<DenseMatrix> blocks;
    blocks.reserve(static_cast<std::size_t>(ctx_.grid().p()));
    for (int vv = 0; vv < c_; ++vv)
      for (int ii = 0; ii < layer_; ++ii)
        blocks.push_back(acc.block((static_cast<index_t>(ii) * c_ + vv) * br, br, 0, width_));
    for (const auto& m : blocks) parts.push_back(&m);
    const DenseMatrix mine = reduce_scatter(ctx_, detail::stack(parts), Axis::Fiber);
    LocalSlice<DenseMatrix> out{ctx_.rank(), {}};
    for (int ii = 0; ii < layer_; ++ii)
      out.blocks.push_back(detail::dense_block(pb_.a, dense_id(static_cast<index_t>(ii) * c_ + v_), pb_.m, pb_.r,
                                               mine.block(ii * br, br, 0, width_)));
    return out;
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
  BlockId s_home() const { return {0, static_cast<index_t>(u_) * c_ + v_}; }
  BlockId dense_id(index_t row_block) const { return {row_block, u_}; }
  index_t phase_block(int t) const { return static_cast<index_t>(detail::mod(u_ - t, layer_)) * c_ + v_; }

  /// All m rows of slab u in natural row order.
  DenseMatrix gather(const LocalSlice<DenseMatrix>& a) {
    std::vector<const DenseMatrix*> mine;
    for (int ii = 0; ii < layer_; ++ii) mine.push_back(&a.at(dense_id(static_cast<index_t>(ii) * c_ + v_)).matrix);
    const DenseMatrix g = allgather(ctx_, detail::stack(mine), Axis::Fiber);
    const index_t br = pb_.m / ctx_.grid().p();
    DenseMatrix t(pb_.m, width_);
    for (int vv = 0; vv < c_; ++vv)
      for (int ii = 0; ii < layer_; ++ii)
        t.set_block((static_cast<index_t>(ii) * c_ + vv) * br, 0,
                    g.block((static_cast<index_t>(vv) * layer_ + ii) * br, br, 0, width_));
    return t;
  }

  LocalSlice<SparseMatrix> sddmm_with(const DenseMatrix& t, const LocalSlice<SparseMatrix>& s,
                                      const LocalSlice<DenseMatrix>& b) {
    const ScoreSlab sc = ScoreSlab::of(score_, pb_.r, static_cast<index_t>(u_) * width_, width_);
    const auto& home = s.at(s_home());
    SparseMatrix cur = detail::zero_values(home.matrix);
    for (int ph = 0; ph < layer_; ++ph) {
      local::sddmm_partial(t.view(), b.at(dense_id(phase_block(ph))).matrix.view(), cur, cur.values(), sc,
                           ctx_.ops());
      cur = cyclic_shift(ctx_, std::move(cur), Axis::Layer);
    }
    return {ctx_.rank(), {{home.id, home.row_offset, home.col_offset, detail::scale_by(home.matrix, cur.values())}}};
  }

  LocalSlice<DenseMatrix> spmm_b_with(const DenseMatrix& t, const LocalSlice<SparseMatrix>& s) {
    std::vector<DenseMatrix> acc;
    const index_t br = pb_.n / ctx_.grid().p();
    for (int ii = 0; ii < layer_; ++ii) acc.emplace_back(br, width_);
    SparseMatrix cur = s.at(s_home()).matrix;
    for (int ph = 0; ph < layer_; ++ph) {
      DenseMatrix& dst = acc[static_cast<std::size_t>(phase_block(ph) / c_)];
      local::spmm_b(cur, t.view(), dst.view(), ctx_.ops());
      cur = cyclic_shift(ctx_, std::move(cur), Axis::Layer);
    }
    LocalSlice<DenseMatrix> out{ctx_.rank(), {}};
    for (int ii = 0; ii < layer_; ++ii)
      out.blocks.push_back(detail::dense_block(pb_.b, dense_id(static_cast<index_t>(ii) * c_ + v_), pb_.n, pb_.r,
                                               std::move(acc[static_cast<std::size_t>(ii)])));
    return out;
  }

  RankContext& ctx_;
  const Problem& pb_;
  const EdgeScore& score_;
  int u_ = 0, v_ = 0, c_ = 1, layer_ = 1;
  index_t width_ = 0;
};

}  // namespace dsddmm::algo
