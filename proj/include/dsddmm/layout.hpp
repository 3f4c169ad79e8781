#pragma once

// Process grids and block distributions.
//
// A DistributionPlan cuts one operand (A, B or S/R) into a grid of blocks and
// says which grid coordinate owns each block before replication. owner()
// gives that assignment; placement() gives where the block actually lives
// when an algorithm starts, which for the 2.5D algorithms includes the
// Cannon-style skew inside each layer.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dsddmm/error.hpp"
#include "dsddmm/matrix.hpp"

namespace dsddmm {

enum class Algorithm { D15DenseShift, D15SparseShift, D25DenseRepl, D25SparseRepl };

inline constexpr std::array<Algorithm, 4> kAllAlgorithms = {
    Algorithm::D15DenseShift, Algorithm::D15SparseShift, Algorithm::D25DenseRepl, Algorithm::D25SparseRepl};

inline constexpr std::string_view to_string(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::D15DenseShift: return "d15-dense";
    case Algorithm::D15SparseShift: return "d15-sparse";
    case Algorithm::D25DenseRepl: return "d25-dense";
    case Algorithm::D25SparseRepl: return "d25-sparse";
  }
  return "?";
}

inline constexpr bool is_15d(Algorithm a) noexcept {
  return a == Algorithm::D15DenseShift || a == Algorithm::D15SparseShift;
}

inline int exact_sqrt(int v) noexcept {
  if (v < 0) return -1;
  int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(v))));
  while (r * r > v) --r;
  while ((r + 1) * (r + 1) <= v) ++r;
  return r * r == v ? r : -1;
}

/// A (u, v) coordinate on a 1.5D grid or a (x, y, w) coordinate on a 2.5D grid.
/// The last component is always the layer.
struct GridCoord {
  int ndim = 2;
  std::array<int, 3> v{};

  static GridCoord of(int a, int b) { return {2, {a, b, 0}}; }
  static GridCoord of(int a, int b, int c) { return {3, {a, b, c}}; }

  int operator[](int k) const noexcept { return v[static_cast<std::size_t>(k)]; }
  int layer() const noexcept { return v[static_cast<std::size_t>(ndim - 1)]; }
  bool operator==(const GridCoord& o) const noexcept {
    return ndim == o.ndim && (ndim == 2 ? (v[0] == o.v[0] && v[1] == o.v[1]) : v == o.v);
  }

  std::string str() const {
    std::string s = "(" + std::to_string(v[0]) + "," + std::to_string(v[1]);
    if (ndim == 3) s += "," + std::to_string(v[2]);
    return s + ")";
  }
};

/// Communication axes. Layer is the in-layer ring of a 1.5D grid; Row and
/// Column are the in-layer rings of a 2.5D grid; Fiber crosses layers.
enum class Axis { Layer, Row, Column, Fiber };

class ProcessGrid {
 public:
  ProcessGrid() = default;

  Algorithm algorithm() const noexcept { return alg_; }
  int p() const noexcept { return p_; }
  int c() const noexcept { return c_; }
  int layer_size() const noexcept { return p_ / c_; }
  /// Side of a 2.5D layer, sqrt(p / c). Zero for 1.5D grids.
  int side() const noexcept { return q_; }
  bool is_15d() const noexcept { return dsddmm::is_15d(alg_); }

  std::vector<int> dims() const {
    if (is_15d()) return {p_ / c_, c_};
    return {q_, q_, c_};
  }

  /// Layer-major numbering: every rank of layer 0 first, then layer 1, ...
  int rank_of(const GridCoord& g) const {
    if (is_15d()) {
      check(g.ndim == 2 && g[0] >= 0 && g[0] < p_ / c_ && g[1] >= 0 && g[1] < c_, g);
      return g[1] * (p_ / c_) + g[0];
    }
    check(g.ndim == 3 && g[0] >= 0 && g[0] < q_ && g[1] >= 0 && g[1] < q_ && g[2] >= 0 && g[2] < c_, g);
    return g[2] * q_ * q_ + g[0] * q_ + g[1];
  }

  GridCoord coord_of(int rank) const {
    if (rank < 0 || rank >= p_) throw LayoutError("rank " + std::to_string(rank) + " outside grid");
    const int layer = rank / (p_ / c_);
    const int in_layer = rank % (p_ / c_);
    if (is_15d()) return GridCoord::of(in_layer, layer);
    return GridCoord::of(in_layer / q_, in_layer % q_, layer);
  }

  /// Ranks sharing every coordinate with `rank` except the one `axis` varies,
  /// ordered by that coordinate.
  std::vector<int> group(int rank, Axis axis) const {
    const GridCoord me = coord_of(rank);
    const int varying = axis_index(axis);
    const int extent = dims()[static_cast<std::size_t>(varying)];
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(extent));
    for (int k = 0; k < extent; ++k) {
      GridCoord g = me;
      g.v[static_cast<std::size_t>(varying)] = k;
      out.push_back(rank_of(g));
    }
    return out;
  }

  int position(int rank, Axis axis) const { return coord_of(rank)[axis_index(axis)]; }

  int axis_index(Axis axis) const {
    if (is_15d()) {
      if (axis == Axis::Layer) return 0;
      if (axis == Axis::Fiber) return 1;
    } else {
      if (axis == Axis::Row) return 1;     // same x and w, varying y
      if (axis == Axis::Column) return 0;  // same y and w, varying x
      if (axis == Axis::Fiber) return 2;
    }
    throw CollectiveError("axis not defined on a " + std::string(to_string(alg_)) + " grid");
  }

 private:
  friend ProcessGrid make_grid(Algorithm, int, int);

  void check(bool ok, const GridCoord& g) const {
    if (!ok) throw LayoutError("coordinate " + g.str() + " outside grid");
  }

  Algorithm alg_ = Algorithm::D15DenseShift;
  int p_ = 1;
  int c_ = 1;
  int q_ = 0;
};

inline ProcessGrid make_grid(Algorithm alg, int p, int c) {
  const std::string what = std::string(to_string(alg)) + " with p=" + std::to_string(p) + ", c=" + std::to_string(c);
  if (p < 1) throw InvalidReplication(what + ": p must be positive");
  if (c < 1) throw InvalidReplication(what + ": c must be at least 1");
  if (c > p) throw InvalidReplication(what + ": c exceeds p");
  if (p % c != 0) throw InvalidReplication(what + ": c does not divide p");
  ProcessGrid g;
  g.alg_ = alg;
  g.p_ = p;
  g.c_ = c;
  if (!is_15d(alg)) {
    g.q_ = exact_sqrt(p / c);
    if (g.q_ < 0) throw InvalidReplication(what + ": p/c=" + std::to_string(p / c) + " is not a perfect square");
  }
  return g;
}

inline bool valid_replication(Algorithm alg, int p, int c) {
  if (p < 1 || c < 1 || c > p || p % c != 0) return false;
  return is_15d(alg) || exact_sqrt(p / c) >= 0;
}

/// Every c for which make_grid(alg, p, c) succeeds, ascending.
inline std::vector<int> valid_replication_factors(Algorithm alg, int p) {
  std::vector<int> out;
  for (int c = 1; c <= p; ++c)
    if (valid_replication(alg, p, c)) out.push_back(c);
  return out;
}

// =============================================================================
// Distribution plans
// =============================================================================

enum class MatrixRole { A, B, S };

inline constexpr std::string_view to_string(MatrixRole r) noexcept {
  switch (r) {
    case MatrixRole::A: return "A";
    case MatrixRole::B: return "B";
    case MatrixRole::S: return "S";
  }
  return "?";
}

struct BlockId {
  index_t i = 0;
  index_t j = 0;
  auto operator<=>(const BlockId&) const = default;
};

struct BlockExtent {
  index_t row_begin, rows, col_begin, cols;
};

class DistributionPlan {
 public:
  const ProcessGrid& grid() const noexcept { return grid_; }
  MatrixRole role() const noexcept { return role_; }

  /// Block-grid shape, (rows, cols), indexed by (i, j).
  index_t grid_rows() const noexcept { return grid_rows_; }
  index_t grid_cols() const noexcept { return grid_cols_; }
  index_t block_count() const noexcept { return grid_rows_ * grid_cols_; }

  /// True when block (i, j) covers matrix row-block j and column-block i.
  bool transposed_indexing() const noexcept { return transposed_; }
  bool replicated_along_fiber() const noexcept { return fiber_replicated_; }

  /// Number of pieces the matrix rows / columns are cut into.
  index_t row_splits() const noexcept { return transposed_ ? grid_cols_ : grid_rows_; }
  index_t col_splits() const noexcept { return transposed_ ? grid_rows_ : grid_cols_; }

  /// Row-major block numbering.
  index_t block_number(BlockId b) const noexcept { return b.i * grid_cols_ + b.j; }

  BlockExtent extent(BlockId b, index_t rows, index_t cols) const {
    const index_t br = rows / row_splits();
    const index_t bc = cols / col_splits();
    const index_t ri = transposed_ ? b.j : b.i;
    const index_t ci = transposed_ ? b.i : b.j;
    return {ri * br, br, ci * bc, bc};
  }

  BlockId block_containing(index_t row, index_t col, index_t rows, index_t cols) const {
    const index_t ri = row / (rows / row_splits());
    const index_t ci = col / (cols / col_splits());
    return transposed_ ? BlockId{ci, ri} : BlockId{ri, ci};
  }

  /// Initial owner(s) of block (i, j). One coordinate per layer when the
  /// block is replicated along the fiber.
  std::vector<GridCoord> owner(index_t i, index_t j) const {
    check_block(i, j);
    const int c = grid_.c();
    const int bi = static_cast<int>(i);
    const int bj = static_cast<int>(j);
    switch (grid_.algorithm()) {
      case Algorithm::D15DenseShift:
        if (role_ == MatrixRole::S) return {GridCoord::of(bi, bj % c)};
        return {GridCoord::of(bi / c, bi % c)};
      case Algorithm::D15SparseShift:
        if (role_ == MatrixRole::S) return {GridCoord::of(bj / c, bj % c)};
        return {GridCoord::of(bj, bi % c)};
      case Algorithm::D25DenseRepl:
        if (role_ == MatrixRole::S) return {GridCoord::of(bi, bj / c, bj % c)};
        return {GridCoord::of(bi / c, bj, bi % c)};
      case Algorithm::D25SparseRepl:
        if (role_ == MatrixRole::S) {
          std::vector<GridCoord> out;
          for (int w = 0; w < c; ++w) out.push_back(GridCoord::of(bi, bj, w));
          return out;
        }
        if (role_ == MatrixRole::A) return {GridCoord::of(bi / c, bj, bi % c)};
        return {GridCoord::of(bi, bj / c, bj % c)};
    }
    return {};
  }

  /// Where block (i, j) sits when the algorithm starts (skew applied).
  /// `layer` selects the copy for fiber-replicated blocks.
  GridCoord placement(index_t i, index_t j, int layer = 0) const {
    const auto own = owner(i, j);
    if (grid_.is_15d()) return own.front();
    const int q = grid_.side();
    const int c = grid_.c();
    const int bi = static_cast<int>(i);
    const int bj = static_cast<int>(j);
    const auto mod = [q](int v) { return ((v % q) + q) % q; };
    if (grid_.algorithm() == Algorithm::D25DenseRepl) {
      if (role_ == MatrixRole::S) return GridCoord::of(bi, mod(bj / c - bi), bj % c);
      if (role_ == MatrixRole::B) return GridCoord::of(mod(bi / c - bj), bj, bi % c);
      return own.front();
    }
    // 2.5D sparse replicating: S stationary, A and B skewed.
    if (role_ == MatrixRole::S) return own.at(static_cast<std::size_t>(layer));
    if (role_ == MatrixRole::A) return GridCoord::of(bj, mod(bi / c - bj), bi % c);
    return GridCoord::of(mod(bj / c - bi), bi, bj % c);
  }

  /// Blocks placed on `rank`, in block-number order.
  std::vector<BlockId> blocks_on(int rank) const {
    std::vector<BlockId> out;
    for (index_t i = 0; i < grid_rows_; ++i)
      for (index_t j = 0; j < grid_cols_; ++j) {
        const int copies = fiber_replicated_ ? grid_.c() : 1;
        for (int w = 0; w < copies; ++w)
          if (grid_.rank_of(placement(i, j, w)) == rank) out.push_back({i, j});
      }
    return out;
  }

  void check_divisible(index_t rows, index_t cols) const {
    if (rows % row_splits() != 0 || cols % col_splits() != 0)
      throw IndivisibleDimensions(std::string(to_string(role_)) + " is " + std::to_string(rows) + "x" +
                                  std::to_string(cols) + " but " + std::string(to_string(grid_.algorithm())) +
                                  " with p=" + std::to_string(grid_.p()) + ", c=" + std::to_string(grid_.c()) +
                                  " requires rows divisible by " + std::to_string(row_splits()) +
                                  " and columns divisible by " + std::to_string(col_splits()));
  }

 private:
  friend DistributionPlan make_plan(const ProcessGrid&, MatrixRole);

  void check_block(index_t i, index_t j) const {
    if (i < 0 || i >= grid_rows_ || j < 0 || j >= grid_cols_)
      throw LayoutError("block (" + std::to_string(i) + "," + std::to_string(j) + ") outside " +
                        std::to_string(grid_rows_) + "x" + std::to_string(grid_cols_) + " block grid");
  }

  ProcessGrid grid_;
  MatrixRole role_ = MatrixRole::A;
  index_t grid_rows_ = 1;
  index_t grid_cols_ = 1;
  bool transposed_ = false;
  bool fiber_replicated_ = false;
};

inline DistributionPlan make_plan(const ProcessGrid& grid, MatrixRole role) {
  DistributionPlan plan;
  plan.grid_ = grid;
  plan.role_ = role;
  const index_t p = grid.p();
  const index_t c = grid.c();
  const index_t q = grid.side();
  const bool dense = role != MatrixRole::S;
  switch (grid.algorithm()) {
    case Algorithm::D15DenseShift:
      plan.grid_rows_ = dense ? p : p / c;
      plan.grid_cols_ = dense ? 1 : p;
      break;
    case Algorithm::D15SparseShift:
      plan.grid_rows_ = dense ? p : 1;
      plan.grid_cols_ = dense ? p / c : p;
      break;
    case Algorithm::D25DenseRepl:
      plan.grid_rows_ = dense ? q * c : q;
      plan.grid_cols_ = dense ? q : q * c;
      break;
    case Algorithm::D25SparseRepl:
      if (role == MatrixRole::S) {
        plan.grid_rows_ = q;
        plan.grid_cols_ = q;
        plan.fiber_replicated_ = true;
      } else if (role == MatrixRole::A) {
        // Indexed (r-slab, row-block): slab i of q*c, row-block j of q.
        plan.grid_rows_ = q * c;
        plan.grid_cols_ = q;
        plan.transposed_ = true;
      } else {
        // Indexed (row-block, r-slab).
        plan.grid_rows_ = q;
        plan.grid_cols_ = q * c;
      }
      break;
  }
  return plan;
}

inline std::vector<GridCoord> owner(const DistributionPlan& plan, index_t i, index_t j) { return plan.owner(i, j); }

// =============================================================================
// Local slices
// =============================================================================

template <typename M>
struct Block {
  BlockId id;
  index_t row_offset = 0;
  index_t col_offset = 0;
  M matrix;
};

template <typename M>
struct LocalSlice {
  int rank = 0;
  std::vector<Block<M>> blocks;

  const Block<M>& at(BlockId id) const {
    for (const auto& b : blocks)
      if (b.id == id) return b;
    throw LayoutError("rank " + std::to_string(rank) + " does not hold block (" + std::to_string(id.i) + "," +
                      std::to_string(id.j) + ")");
  }
  Block<M>& at(BlockId id) { return const_cast<Block<M>&>(std::as_const(*this).at(id)); }

  std::vector<BlockId> ids() const {
    std::vector<BlockId> out;
    for (const auto& b : blocks) out.push_back(b.id);
    return out;
  }
};

/// Half-open range of the values of an nnz-long array owned by fiber layer w
/// when the values are scattered over c layers in chunks of ceil(nnz / c).
inline std::pair<index_t, index_t> value_chunk(index_t nnz, int c, int w) {
  const index_t chunk = (nnz + c - 1) / c;
  const index_t begin = std::min<index_t>(chunk * w, nnz);
  return {begin, std::min<index_t>(begin + chunk, nnz)};
}

inline std::vector<LocalSlice<DenseMatrix>> partition(const DenseMatrix& m, const DistributionPlan& plan) {
  plan.check_divisible(m.rows(), m.cols());
  const int p = plan.grid().p();
  std::vector<LocalSlice<DenseMatrix>> out(static_cast<std::size_t>(p));
  for (int r = 0; r < p; ++r) out[static_cast<std::size_t>(r)].rank = r;
  for (index_t i = 0; i < plan.grid_rows(); ++i)
    for (index_t j = 0; j < plan.grid_cols(); ++j) {
      const BlockExtent e = plan.extent({i, j}, m.rows(), m.cols());
      const int r = plan.grid().rank_of(plan.placement(i, j));
      out[static_cast<std::size_t>(r)].blocks.push_back(
          {{i, j}, e.row_begin, e.col_begin, m.block(e.row_begin, e.rows, e.col_begin, e.cols)});
    }
  return out;
}

/// Sparse blocks carry coordinates relative to their offsets. For a
/// fiber-replicated plan every layer receives the full coordinate set but
/// only its own value chunk; the other values are zero.
inline std::vector<LocalSlice<SparseMatrix>> partition(const SparseMatrix& s, const DistributionPlan& plan) {
  plan.check_divisible(s.rows(), s.cols());
  const int p = plan.grid().p();
  const index_t nb = plan.block_count();
  std::vector<std::vector<index_t>> ri(static_cast<std::size_t>(nb)), ci(static_cast<std::size_t>(nb));
  std::vector<std::vector<double>> vv(static_cast<std::size_t>(nb));
  const auto rows = s.row_indices();
  const auto cols = s.col_indices();
  const auto vals = s.values();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const BlockId b = plan.block_containing(rows[k], cols[k], s.rows(), s.cols());
    const BlockExtent e = plan.extent(b, s.rows(), s.cols());
    const auto n = static_cast<std::size_t>(plan.block_number(b));
    ri[n].push_back(rows[k] - e.row_begin);
    ci[n].push_back(cols[k] - e.col_begin);
    vv[n].push_back(vals[k]);
  }
  std::vector<LocalSlice<SparseMatrix>> out(static_cast<std::size_t>(p));
  for (int r = 0; r < p; ++r) out[static_cast<std::size_t>(r)].rank = r;
  const int copies = plan.replicated_along_fiber() ? plan.grid().c() : 1;
  for (index_t i = 0; i < plan.grid_rows(); ++i)
    for (index_t j = 0; j < plan.grid_cols(); ++j) {
      const BlockId b{i, j};
      const BlockExtent e = plan.extent(b, s.rows(), s.cols());
      const auto n = static_cast<std::size_t>(plan.block_number(b));
      const SparseMatrix blk = SparseMatrix::from_sorted(e.rows, e.cols, ri[n], ci[n], vv[n]);
      for (int w = 0; w < copies; ++w) {
        const int r = plan.grid().rank_of(plan.placement(i, j, w));
        SparseMatrix local = blk;
        if (copies > 1) {
          const auto [lo, hi] = value_chunk(blk.nnz(), copies, w);
          auto v = local.values();
          for (index_t k = 0; k < blk.nnz(); ++k)
            if (k < lo || k >= hi) v[static_cast<std::size_t>(k)] = 0.0;
        }
        out[static_cast<std::size_t>(r)].blocks.push_back({b, e.row_begin, e.col_begin, std::move(local)});
      }
    }
  return out;
}

namespace detail {

template <typename M>
std::map<BlockId, std::vector<std::pair<int, const Block<M>*>>> collect_blocks(
    const std::vector<LocalSlice<M>>& slices, const DistributionPlan& plan) {
  std::map<BlockId, std::vector<std::pair<int, const Block<M>*>>> seen;
  for (const auto& sl : slices)
    for (const auto& b : sl.blocks) {
      if (b.id.i < 0 || b.id.i >= plan.grid_rows() || b.id.j < 0 || b.id.j >= plan.grid_cols())
        throw LayoutError("unknown block id");
      const GridCoord g = plan.grid().coord_of(sl.rank);
      seen[b.id].push_back({g.layer(), &b});
    }
  const std::size_t copies = plan.replicated_along_fiber() ? static_cast<std::size_t>(plan.grid().c()) : 1;
  for (index_t i = 0; i < plan.grid_rows(); ++i)
    for (index_t j = 0; j < plan.grid_cols(); ++j) {
      auto it = seen.find({i, j});
      const std::size_t have = it == seen.end() ? 0 : it->second.size();
      const std::string id = "(" + std::to_string(i) + "," + std::to_string(j) + ")";
      if (have < copies) throw LayoutError("missing block " + id);
      if (have > copies) throw LayoutError("duplicate block " + id);
    }
  return seen;
}

}  // namespace detail

inline DenseMatrix unpartition(const std::vector<LocalSlice<DenseMatrix>>& slices, const DistributionPlan& plan,
                               index_t rows, index_t cols) {
  const auto seen = detail::collect_blocks(slices, plan);
  DenseMatrix out(rows, cols);
  for (const auto& [id, copies] : seen) {
    const Block<DenseMatrix>& b = *copies.front().second;
    const BlockExtent e = plan.extent(id, rows, cols);
    if (b.matrix.rows() != e.rows || b.matrix.cols() != e.cols)
      throw LayoutError("block has wrong shape for the plan");
    out.set_block(e.row_begin, e.col_begin, b.matrix);
  }
  return out;
}

inline SparseMatrix unpartition(const std::vector<LocalSlice<SparseMatrix>>& slices, const DistributionPlan& plan,
                                index_t rows, index_t cols) {
  const auto seen = detail::collect_blocks(slices, plan);
  std::vector<Triplet> t;
  for (const auto& [id, copies] : seen) {
    const BlockExtent e = plan.extent(id, rows, cols);
    const SparseMatrix& first = copies.front().second->matrix;
    std::vector<double> vals(first.values().begin(), first.values().end());
    if (copies.size() > 1) {
      const int c = static_cast<int>(copies.size());
      for (const auto& [layer, blk] : copies) {
        if (!blk->matrix.same_pattern(first)) throw LayoutError("fiber copies disagree on coordinates");
        const auto [lo, hi] = value_chunk(first.nnz(), c, layer);
        const auto v = blk->matrix.values();
        for (index_t k = lo; k < hi; ++k) vals[static_cast<std::size_t>(k)] = v[static_cast<std::size_t>(k)];
      }
    }
    const auto ri = first.row_indices();
    const auto ci = first.col_indices();
    for (std::size_t k = 0; k < vals.size(); ++k) t.push_back({ri[k] + e.row_begin, ci[k] + e.col_begin, vals[k]});
  }
  return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

// =============================================================================
// Padding
// =============================================================================

inline index_t round_up(index_t v, index_t multiple) { return (v + multiple - 1) / multiple * multiple; }

inline DenseMatrix pad(const DenseMatrix& m, index_t rows, index_t cols) {
  if (rows == m.rows() && cols == m.cols()) return m;
  DenseMatrix out(rows, cols);
  out.set_block(0, 0, m);
  return out;
}

inline SparseMatrix pad(const SparseMatrix& s, index_t rows, index_t cols) {
  if (rows == s.rows() && cols == s.cols()) return s;
  const auto ri = s.row_indices();
  const auto ci = s.col_indices();
  const auto v = s.values();
  return SparseMatrix::from_sorted(rows, cols, {ri.begin(), ri.end()}, {ci.begin(), ci.end()}, {v.begin(), v.end()});
}

inline DenseMatrix crop(const DenseMatrix& m, index_t rows, index_t cols) {
  if (rows == m.rows() && cols == m.cols()) return m;
  return m.block(0, rows, 0, cols);
}

inline SparseMatrix crop(const SparseMatrix& s, index_t rows, index_t cols) {
  if (rows == s.rows() && cols == s.cols()) return s;
  std::vector<Triplet> t;
  for (const auto& e : s.triplets())
    if (e.row < rows && e.col < cols) t.push_back(e);
  return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

}  // namespace dsddmm
