#include <gtest/gtest.h>

#include <set>

#include "dsddmm/generate.hpp"
#include "dsddmm/layout.hpp"

using namespace dsddmm;

namespace {

// Owner tuples written out directly from the distribution table.
GridCoord expected_owner(Algorithm alg, MatrixRole role, int c, index_t i, index_t j) {
  const int bi = static_cast<int>(i), bj = static_cast<int>(j);
  switch (alg) {
    case Algorithm::D15DenseShift:
      return role == MatrixRole::S ? GridCoord::of(bi, bj % c) : GridCoord::of(bi / c, bi % c);
    case Algorithm::D15SparseShift:
      return role == MatrixRole::S ? GridCoord::of(bj / c, bj % c) : GridCoord::of(bj, bi % c);
    case Algorithm::D25DenseRepl:
      return role == MatrixRole::S ? GridCoord::of(bi, bj / c, bj % c) : GridCoord::of(bi / c, bj, bi % c);
    case Algorithm::D25SparseRepl:
      return role == MatrixRole::A ? GridCoord::of(bi / c, bj, bi % c) : GridCoord::of(bi, bj / c, bj % c);
  }
  return {};
}

}  // namespace

TEST(MakeGrid, Dimensions) {
  EXPECT_EQ(make_grid(Algorithm::D15DenseShift, 8, 2).dims(), (std::vector<int>{4, 2}));
  EXPECT_EQ(make_grid(Algorithm::D25DenseRepl, 8, 2).dims(), (std::vector<int>{2, 2, 2}));
  EXPECT_EQ(make_grid(Algorithm::D25SparseRepl, 18, 2).dims(), (std::vector<int>{3, 3, 2}));
}

TEST(MakeGrid, Errors) {
  EXPECT_THROW(make_grid(Algorithm::D25DenseRepl, 8, 4), InvalidReplication);
  EXPECT_THROW(make_grid(Algorithm::D15DenseShift, 8, 3), InvalidReplication);
  EXPECT_THROW(make_grid(Algorithm::D15DenseShift, 4, 8), InvalidReplication);
  EXPECT_THROW(make_grid(Algorithm::D15DenseShift, 4, 0), InvalidReplication);
}

TEST(MakeGrid, LayerMajorBijection) {
  for (Algorithm alg : kAllAlgorithms)
    for (int c : valid_replication_factors(alg, 16)) {
      const auto g = make_grid(alg, 16, c);
      std::set<int> seen;
      for (int r = 0; r < 16; ++r) {
        EXPECT_EQ(g.rank_of(g.coord_of(r)), r);
        EXPECT_EQ(g.coord_of(r).layer(), r / (16 / c));
        seen.insert(r);
      }
      EXPECT_EQ(seen.size(), 16u);
    }
}

TEST(MakeGrid, AxisGroups) {
  const auto g = make_grid(Algorithm::D25DenseRepl, 8, 2);
  const int r = g.rank_of(GridCoord::of(1, 0, 1));
  EXPECT_EQ(g.group(r, Axis::Fiber), (std::vector<int>{g.rank_of(GridCoord::of(1, 0, 0)), r}));
  EXPECT_EQ(g.group(r, Axis::Row), (std::vector<int>{r, g.rank_of(GridCoord::of(1, 1, 1))}));
  EXPECT_THROW(g.group(r, Axis::Layer), CollectiveError);
}

TEST(Owner, TableExamples) {
  const auto d15 = make_plan(make_grid(Algorithm::D15DenseShift, 8, 2), MatrixRole::A);
  EXPECT_EQ(owner(d15, 5, 0), std::vector<GridCoord>{GridCoord::of(2, 1)});
  const auto d25 = make_plan(make_grid(Algorithm::D25DenseRepl, 8, 2), MatrixRole::S);
  EXPECT_EQ(owner(d25, 1, 3), std::vector<GridCoord>{GridCoord::of(1, 1, 1)});
  const auto sp = make_plan(make_grid(Algorithm::D25SparseRepl, 8, 2), MatrixRole::S);
  EXPECT_EQ(owner(sp, 0, 0), (std::vector<GridCoord>{GridCoord::of(0, 0, 0), GridCoord::of(0, 0, 1)}));
  EXPECT_THROW(owner(d15, 8, 0), LayoutError);
}

TEST(Owner, GoldenTableConformance) {
  const std::pair<int, int> grids[] = {{4, 1}, {4, 4}, {8, 2}, {16, 4}, {16, 1}};
  for (Algorithm alg : kAllAlgorithms)
    for (auto [p, c] : grids) {
      if (!valid_replication(alg, p, c)) continue;
      const auto grid = make_grid(alg, p, c);
      for (MatrixRole role : {MatrixRole::A, MatrixRole::B, MatrixRole::S}) {
        const auto plan = make_plan(grid, role);
        for (index_t i = 0; i < plan.grid_rows(); ++i)
          for (index_t j = 0; j < plan.grid_cols(); ++j) {
            const auto own = owner(plan, i, j);
            if (alg == Algorithm::D25SparseRepl && role == MatrixRole::S) {
              ASSERT_EQ(own.size(), static_cast<std::size_t>(c));
              for (int w = 0; w < c; ++w)
                EXPECT_EQ(own[static_cast<std::size_t>(w)], GridCoord::of(int(i), int(j), w));
            } else {
              ASSERT_EQ(own.size(), 1u);
              EXPECT_EQ(own[0], expected_owner(alg, role, c, i, j))
                  << to_string(alg) << " " << to_string(role) << " p=" << p << " c=" << c << " (" << i << ","
                  << j << ")";
            }
          }
      }
    }
}

TEST(Owner, D15DenseSparseBlocksByLayer) {
  const auto plan = make_plan(make_grid(Algorithm::D15DenseShift, 4, 2), MatrixRole::S);
  ASSERT_EQ(plan.grid_rows(), 2);
  ASSERT_EQ(plan.grid_cols(), 4);
  for (index_t i = 0; i < 2; ++i)
    for (index_t j = 0; j < 4; ++j) EXPECT_EQ(owner(plan, i, j)[0], GridCoord::of(int(i), int(j % 2)));
}

TEST(Placement, TwoPointFiveSkewAligns) {
  for (Algorithm alg : {Algorithm::D25DenseRepl, Algorithm::D25SparseRepl})
    for (auto [p, c] : std::vector<std::pair<int, int>>{{16, 1}, {8, 2}, {18, 2}, {16, 4}}) {
      const auto grid = make_grid(alg, p, c);
      const int q = grid.side();
      const auto splan = make_plan(grid, MatrixRole::S);
      const auto aplan = make_plan(grid, MatrixRole::A);
      const auto bplan = make_plan(grid, MatrixRole::B);
      for (int r = 0; r < p; ++r) {
        const GridCoord g = grid.coord_of(r);
        const int x = g[0], y = g[1], w = g[2], s = (x + y) % q;
        if (alg == Algorithm::D25DenseRepl) {
          EXPECT_EQ(splan.blocks_on(r), (std::vector<BlockId>{{x, index_t(s) * c + w}}));
          EXPECT_EQ(bplan.blocks_on(r), (std::vector<BlockId>{{index_t(s) * c + w, y}}));
          EXPECT_EQ(aplan.blocks_on(r), (std::vector<BlockId>{{index_t(x) * c + w, y}}));
        } else {
          EXPECT_EQ(splan.blocks_on(r), (std::vector<BlockId>{{x, y}}));
          EXPECT_EQ(aplan.blocks_on(r), (std::vector<BlockId>{{index_t(s) * c + w, x}}));
          EXPECT_EQ(bplan.blocks_on(r), (std::vector<BlockId>{{y, index_t(s) * c + w}}));
        }
      }
    }
}

TEST(Partition, DenseRowBlocks) {
  const auto a = random_dense(8, 2, 1);
  const auto plan = make_plan(make_grid(Algorithm::D15DenseShift, 4, 1), MatrixRole::A);
  const auto slices = partition(a, plan);
  ASSERT_EQ(slices.size(), 4u);
  for (int k = 0; k < 4; ++k) {
    ASSERT_EQ(slices[k].blocks.size(), 1u);
    EXPECT_EQ(slices[k].blocks[0].row_offset, 2 * k);
    EXPECT_EQ(slices[k].blocks[0].matrix, a.block(2 * k, 2, 0, 2));
  }
}

TEST(Partition, TilingAndRoundTrip) {
  const auto s = erdos_renyi(48, 48, 5, 3);
  const auto d = random_dense(48, 24, 4);
  for (Algorithm alg : kAllAlgorithms)
    for (int c : valid_replication_factors(alg, 16)) {
      const auto grid = make_grid(alg, 16, c);
      const auto splan = make_plan(grid, MatrixRole::S);
      const auto ss = partition(s, splan);
      index_t total = 0;
      for (const auto& sl : ss)
        for (const auto& b : sl.blocks) total += b.matrix.nnz();
      EXPECT_EQ(total, s.nnz() * (splan.replicated_along_fiber() ? c : 1));
      EXPECT_EQ(unpartition(ss, splan, 48, 48), s);
      for (MatrixRole role : {MatrixRole::A, MatrixRole::B}) {
        const auto plan = make_plan(grid, role);
        if (24 % plan.col_splits() != 0) continue;
        EXPECT_EQ(unpartition(partition(d, plan), plan, 48, 24), d);
      }
    }
}

TEST(Partition, Errors) {
  const auto plan = make_plan(make_grid(Algorithm::D15SparseShift, 16, 1), MatrixRole::A);
  EXPECT_THROW(partition(random_dense(32, 8, 1), plan), IndivisibleDimensions);
  auto slices = partition(random_dense(32, 16, 1), plan);
  slices[3].blocks.pop_back();
  EXPECT_THROW(unpartition(slices, plan, 32, 16), LayoutError);
  auto dup = partition(random_dense(32, 16, 1), plan);
  dup[0].blocks.push_back(dup[1].blocks[0]);
  EXPECT_THROW(unpartition(dup, plan, 32, 16), LayoutError);
}

TEST(Partition, FiberValueChunks) {
  const auto s = erdos_renyi(12, 12, 5, 2);
  const auto plan = make_plan(make_grid(Algorithm::D25SparseRepl, 8, 2), MatrixRole::S);
  const auto slices = partition(s, plan);
  const auto grid = plan.grid();
  for (int r = 0; r < 8; ++r) {
    const auto& b = slices[static_cast<std::size_t>(r)].blocks.at(0);
    const auto [lo, hi] = value_chunk(b.matrix.nnz(), 2, grid.coord_of(r).layer());
    for (index_t k = 0; k < b.matrix.nnz(); ++k)
      if (k < lo || k >= hi) EXPECT_EQ(b.matrix.values()[static_cast<std::size_t>(k)], 0.0);
  }
}

TEST(Padding, PadAndCrop) {
  const auto a = random_dense(5, 3, 1);
  const auto p = pad(a, 8, 4);
  EXPECT_EQ(p.rows(), 8);
  EXPECT_EQ(p(7, 3), 0.0);
  EXPECT_EQ(crop(p, 5, 3), a);
  const auto s = erdos_renyi(5, 7, 2, 1);
  EXPECT_EQ(crop(pad(s, 9, 9), 5, 7), s);
}

TEST(ValueChunk, CoversAllValues) {
  for (index_t nnz : {0, 1, 7, 8, 9})
    for (int c : {1, 2, 3, 4}) {
      index_t covered = 0;
      for (int w = 0; w < c; ++w) {
        const auto [lo, hi] = value_chunk(nnz, c, w);
        EXPECT_EQ(lo, std::min<index_t>(covered, nnz));
        covered = std::max(covered, hi);
        EXPECT_LE(hi - lo, (nnz + c - 1) / c);
      }
      EXPECT_EQ(covered, nnz);
    }
}
