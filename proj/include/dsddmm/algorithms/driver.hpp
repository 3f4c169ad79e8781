#pragma once

#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dsddmm/algorithms/common.hpp"
#include "dsddmm/algorithms/d15_dense.hpp"
#include "dsddmm/algorithms/d15_sparse.hpp"
#include "dsddmm/algorithms/d25_dense.hpp"
#include "dsddmm/algorithms/d25_sparse.hpp"

namespace dsddmm {

struct RunOptions {
  Schedule schedule = Schedule::Threaded;
  /// Zero-pad every dimension up to the next multiple the grid needs.
  bool pad = false;
  /// Enables uncounted consistency checks (fiber patterns, stored transpose).
  bool debug_checks = false;
  EdgeScore score = {};
  /// Softmax-normalized edge weights. Not implemented; rejected.
  bool softmax = false;
};

struct RunResult {
  ProcessGrid grid;
  KernelMode mode = KernelMode::SDDMM;
  std::optional<FusionStrategy> strategy;
  std::variant<SparseMatrix, DenseMatrix> output;
  /// Per-rank output blocks in the executed (padded, possibly role-swapped)
  /// problem's distribution.
  std::vector<LocalSlice<SparseMatrix>> sparse_slices;
  std::vector<LocalSlice<DenseMatrix>> dense_slices;
  std::vector<CommStats> stats;

  bool sparse_output() const noexcept { return std::holds_alternative<SparseMatrix>(output); }
  const SparseMatrix& sparse() const { return std::get<SparseMatrix>(output); }
  const DenseMatrix& dense() const { return std::get<DenseMatrix>(output); }
};

namespace detail {

enum class Plan { Sddmm, SpmmA, SpmmB, FusedA, FusedB, Reuse, LocalFusion };

struct RankOutput {
  LocalSlice<SparseMatrix> sparse;
  LocalSlice<DenseMatrix> dense;
};

template <typename Engine>
RankOutput execute(Engine& e, Plan plan, const LocalSlice<SparseMatrix>& s, const LocalSlice<DenseMatrix>& a,
                   const LocalSlice<DenseMatrix>& b) {
  switch (plan) {
    case Plan::Sddmm: return {e.sddmm(s, a, b), {}};
    case Plan::SpmmA: return {{}, e.spmm_a(s, b)};
    case Plan::SpmmB: return {{}, e.spmm_b(s, a)};
    case Plan::FusedA: return {{}, e.spmm_a(e.sddmm(s, a, b), b)};
    case Plan::FusedB: return {{}, e.spmm_b(e.sddmm(s, a, b), a)};
    case Plan::Reuse:
      if constexpr (requires { e.reuse(s, a, b); }) return {{}, e.reuse(s, a, b)};
      break;
    case Plan::LocalFusion:
      if constexpr (requires { e.fused_local(s, a, b); }) return {{}, e.fused_local(s, a, b)};
      break;
  }
  throw IncompatibleStrategy("plan not supported by this algorithm");
}

inline RankOutput dispatch(RankContext& ctx, const Problem& pb, const EdgeScore& score, Plan plan,
                           const LocalSlice<SparseMatrix>& s, const LocalSlice<DenseMatrix>& a,
                           const LocalSlice<DenseMatrix>& b) {
  switch (ctx.grid().algorithm()) {
    case Algorithm::D15DenseShift: {
      algo::D15Dense e(ctx, pb, score);
      return execute(e, plan, s, a, b);
    }
    case Algorithm::D15SparseShift: {
      algo::D15Sparse e(ctx, pb, score);
      return execute(e, plan, s, a, b);
    }
    case Algorithm::D25DenseRepl: {
      algo::D25Dense e(ctx, pb, score);
      return execute(e, plan, s, a, b);
    }
    case Algorithm::D25SparseRepl: {
      algo::D25Sparse e(ctx, pb, score);
      return execute(e, plan, s, a, b);
    }
  }
  throw LayoutError("unknown algorithm");
}

/// Operands of the problem that actually runs on the grid.
struct Execution {
  Plan plan;
  const SparseMatrix* s;
  const DenseMatrix* a;  // may be null when the plan does not read it
  const DenseMatrix* b;
  EdgeScore score;
  index_t m, n, r;
  MatrixRole output_role;
};

inline index_t lcm(index_t a, index_t b) { return std::lcm(a, b); }

inline std::vector<double> pad_score_half(std::span<const double> w, index_t r, index_t r_pad) {
  std::vector<double> out(static_cast<std::size_t>(2 * r_pad), 0.0);
  std::copy(w.begin(), w.begin() + r, out.begin());
  std::copy(w.begin() + r, w.begin() + 2 * r, out.begin() + r_pad);
  return out;
}

inline RunResult execute_on_grid(const ProcessGrid& grid, const Execution& ex, const RunOptions& opt) {
  if (!ex.score.is_dot() && static_cast<index_t>(ex.score.weights.size()) != 2 * ex.r)
    throw DimensionMismatch("a_vec: expected length " + std::to_string(2 * ex.r) + ", got " +
                            std::to_string(ex.score.weights.size()));
  const Problem logical = Problem::make(grid, ex.m, ex.n, ex.r);
  const index_t mm = lcm(logical.s.row_splits(), logical.a.row_splits());
  const index_t nm = lcm(logical.s.col_splits(), logical.b.row_splits());
  const index_t rm = lcm(logical.a.col_splits(), logical.b.col_splits());
  index_t m = ex.m, n = ex.n, r = ex.r;
  if (opt.pad) {
    m = round_up(m, mm);
    n = round_up(n, nm);
    r = round_up(r, rm);
  } else if (m % mm != 0 || n % nm != 0 || r % rm != 0) {
    throw IndivisibleDimensions(std::string(to_string(grid.algorithm())) + " with p=" + std::to_string(grid.p()) +
                                ", c=" + std::to_string(grid.c()) + " requires m divisible by " +
                                std::to_string(mm) + ", n by " + std::to_string(nm) + " and r by " +
                                std::to_string(rm) + "; got m=" + std::to_string(ex.m) + ", n=" +
                                std::to_string(ex.n) + ", r=" + std::to_string(ex.r));
  }
  const Problem pb = Problem::make(grid, m, n, r);
  EdgeScore score = ex.score;
  if (!score.is_dot() && r != ex.r) score.weights = pad_score_half(ex.score.weights, ex.r, r);

  const SparseMatrix s = pad(*ex.s, m, n);
  const DenseMatrix a = ex.a ? pad(*ex.a, m, r) : DenseMatrix();
  const DenseMatrix b = ex.b ? pad(*ex.b, n, r) : DenseMatrix();

  RunResult out;
  out.grid = grid;
  const int p = grid.p();
  const auto sl = partition(s, pb.s);
  const auto al = ex.a ? partition(a, pb.a) : std::vector<LocalSlice<DenseMatrix>>(static_cast<std::size_t>(p));
  const auto bl = ex.b ? partition(b, pb.b) : std::vector<LocalSlice<DenseMatrix>>(static_cast<std::size_t>(p));

  auto res = spawn(
      grid,
      [&](RankContext& ctx) {
        const auto i = static_cast<std::size_t>(ctx.rank());
        return dispatch(ctx, pb, score, ex.plan, sl[i], al[i], bl[i]);
      },
      SpawnOptions{opt.schedule, opt.debug_checks});
  out.stats = std::move(res.stats);

  if (ex.output_role == MatrixRole::S) {
    for (auto& ro : res.results) out.sparse_slices.push_back(std::move(ro.sparse));
    out.output = crop(unpartition(out.sparse_slices, pb.s, m, n), ex.m, ex.n);
  } else {
    for (auto& ro : res.results) out.dense_slices.push_back(std::move(ro.dense));
    const DistributionPlan& plan = ex.output_role == MatrixRole::A ? pb.a : pb.b;
    const index_t rows = ex.output_role == MatrixRole::A ? m : n;
    const index_t logical_rows = ex.output_role == MatrixRole::A ? ex.m : ex.n;
    out.output = crop(unpartition(out.dense_slices, plan, rows, r), logical_rows, ex.r);
  }
  return out;
}

/// p == 1: the serial kernels, no communication.
inline RunResult execute_serial(const ProcessGrid& grid, const Execution& ex, KernelMode semantic,
                                const SparseMatrix& s, const DenseMatrix& a, const DenseMatrix& b,
                                const EdgeScore& score) {
  RunResult out;
  out.grid = grid;
  OpCounter ops;
  switch (semantic) {
    case KernelMode::SDDMM: out.output = sddmm_scored(a, b, s, score, &ops); break;
    case KernelMode::SpMMA: out.output = spmm_a(s, b, &ops); break;
    case KernelMode::SpMMB: out.output = spmm_b(s, a, &ops); break;
    default: out.output = fusedmm_local(semantic, s, a, b, score, &ops); break;
  }
  CommStats st;
  st.fma = static_cast<index_t>(ops.fma);
  out.stats = {st};
  const Problem pb = Problem::make(grid, ex.m, ex.n, ex.r);
  if (out.sparse_output()) {
    out.sparse_slices = partition(out.sparse(), pb.s);
  } else {
    const DistributionPlan& plan = ex.output_role == MatrixRole::A ? pb.a : pb.b;
    out.dense_slices = partition(out.dense(), plan);
  }
  return out;
}

inline void check_grid(Algorithm alg, const ProcessGrid& grid) {
  if (grid.algorithm() != alg)
    throw LayoutError("grid was built for " + std::string(to_string(grid.algorithm())) + ", not " +
                      std::string(to_string(alg)));
}

}  // namespace detail

/// Runs SDDMM, SpMMA or SpMMB with the given algorithm. SpMMA ignores A and
/// SpMMB ignores B; either may be passed empty.
inline RunResult run_kernel(Algorithm alg, KernelMode mode, const SparseMatrix& s, const DenseMatrix& a,
                            const DenseMatrix& b, const ProcessGrid& grid, const RunOptions& opt = {}) {
  detail::check_grid(alg, grid);
  if (is_fused(mode))
    throw IncompatibleStrategy("run_kernel: use run_fusedmm for mode " + std::string(to_string(mode)));
  if (opt.softmax) throw Error("softmax-normalized scores are not supported");
  detail::Execution ex{};
  switch (mode) {
    case KernelMode::SDDMM:
      detail::check_sddmm_dims(a, b, s);
      ex = {detail::Plan::Sddmm, &s, &a, &b, opt.score, s.rows(), s.cols(), a.cols(), MatrixRole::S};
      break;
    case KernelMode::SpMMA:
      detail::require(b.rows() == s.cols(), "B: expected " + std::to_string(s.cols()) + " rows to match S " +
                                                detail::dims(s.rows(), s.cols()) + ", got " +
                                                detail::dims(b.rows(), b.cols()));
      ex = {detail::Plan::SpmmA, &s, nullptr, &b, {}, s.rows(), s.cols(), b.cols(), MatrixRole::A};
      break;
    default:
      detail::require(a.rows() == s.rows(), "A: expected " + std::to_string(s.rows()) + " rows to match S " +
                                                detail::dims(s.rows(), s.cols()) + ", got " +
                                                detail::dims(a.rows(), a.cols()));
      ex = {detail::Plan::SpmmB, &s, &a, nullptr, {}, s.rows(), s.cols(), a.cols(), MatrixRole::B};
      break;
  }
  RunResult out = grid.p() == 1 ? detail::execute_serial(grid, ex, mode, s, a, b, opt.score)
                                : detail::execute_on_grid(grid, ex, opt);
  out.mode = mode;
  return out;
}

inline RunResult run_kernel(Algorithm alg, KernelMode mode, const SparseMatrix& s, const DenseMatrix& a,
                            const DenseMatrix& b, int p, int c, const RunOptions& opt = {}) {
  return run_kernel(alg, mode, s, a, b, make_grid(alg, p, c), opt);
}

/// FusedMMA = SpMMA(SDDMM(A, B, S), B) and FusedMMB = SpMMB(SDDMM(A, B, S), A)
/// under one of the three execution strategies. `s_t` must be the transpose
/// of `s`; it is read by the realizations that run on the transposed problem.
inline RunResult run_fusedmm(Algorithm alg, FusionStrategy strategy, KernelMode mode, const SparseMatrix& s,
                             const SparseMatrix& s_t, const DenseMatrix& a, const DenseMatrix& b,
                             const ProcessGrid& grid, const RunOptions& opt = {}) {
  detail::check_grid(alg, grid);
  if (!is_fused(mode))
    throw IncompatibleStrategy("run_fusedmm: mode " + std::string(to_string(mode)) + " is not a FusedMM mode");
  check_strategy(alg, strategy);
  if (opt.softmax) {
    if (strategy == FusionStrategy::LocalKernelFusion)
      throw IncompatibleStrategy("local kernel fusion cannot apply softmax-normalized scores");
    throw Error("softmax-normalized scores are not supported");
  }
  detail::check_sddmm_dims(a, b, s);
  const bool fused_a = mode == KernelMode::FusedMMA;
  const bool transposed = (strategy == FusionStrategy::ReplicationReuse && fused_a) ||
                          (strategy == FusionStrategy::LocalKernelFusion && !fused_a);
  if (transposed) {
    detail::require(s_t.rows() == s.cols() && s_t.cols() == s.rows() && s_t.nnz() == s.nnz(),
                    "S_T: expected the " + detail::dims(s.cols(), s.rows()) + " transpose of S, got " +
                        detail::dims(s_t.rows(), s_t.cols()));
    if (opt.debug_checks && !(s_t == transpose(s))) throw DimensionMismatch("S_T: not the transpose of S");
  }

  detail::Execution ex{};
  switch (strategy) {
    case FusionStrategy::NoElision:
      ex = {fused_a ? detail::Plan::FusedA : detail::Plan::FusedB, &s, &a, &b, opt.score, s.rows(), s.cols(),
            a.cols(), fused_a ? MatrixRole::A : MatrixRole::B};
      break;
    case FusionStrategy::ReplicationReuse:
      ex = fused_a ? detail::Execution{detail::Plan::Reuse, &s_t, &b, &a, opt.score.swapped(), s.cols(), s.rows(),
                                       a.cols(), MatrixRole::B}
                   : detail::Execution{detail::Plan::Reuse, &s, &a, &b, opt.score, s.rows(), s.cols(), a.cols(),
                                       MatrixRole::B};
      break;
    case FusionStrategy::LocalKernelFusion:
      ex = fused_a ? detail::Execution{detail::Plan::LocalFusion, &s, &a, &b, opt.score, s.rows(), s.cols(),
                                       a.cols(), MatrixRole::A}
                   : detail::Execution{detail::Plan::LocalFusion, &s_t, &b, &a, opt.score.swapped(), s.cols(),
                                       s.rows(), a.cols(), MatrixRole::A};
      break;
  }
  RunResult out;
  if (grid.p() == 1) {
    const detail::Execution plain{detail::Plan::FusedA, &s, &a, &b, opt.score, s.rows(), s.cols(), a.cols(),
                                  fused_a ? MatrixRole::A : MatrixRole::B};
    out = detail::execute_serial(grid, plain, mode, s, a, b, opt.score);
  } else {
    out = detail::execute_on_grid(grid, ex, opt);
  }
  out.mode = mode;
  out.strategy = strategy;
  return out;
}

inline RunResult run_fusedmm(Algorithm alg, FusionStrategy strategy, KernelMode mode, const SparseMatrix& s,
                             const SparseMatrix& s_t, const DenseMatrix& a, const DenseMatrix& b, int p, int c,
                             const RunOptions& opt = {}) {
  return run_fusedmm(alg, strategy, mode, s, s_t, a, b, make_grid(alg, p, c), opt);
}

// =============================================================================
// Reporting
// =============================================================================

/// Max-over-ranks summary of a run's counters. Word figures are
/// max(sent, received) taken per rank and then maximized over ranks.
struct CommBreakdown {
  index_t propagation_words = 0;
  index_t replication_words = 0;
  index_t max_rank_cost = 0;
  index_t messages = 0;
  index_t dense_words = 0;
  index_t sparse_words = 0;
  index_t total_words_sent = 0;
  index_t total_words_received = 0;
  index_t total_propagation_sent = 0;
  index_t total_replication_sent = 0;
  index_t max_fma = 0;
};

inline CommBreakdown comm_breakdown(const std::vector<CommStats>& stats) {
  CommBreakdown out;
  auto cost = [](const Counters& c) { return std::max(c.words_sent, c.words_received); };
  for (const auto& st : stats) {
    const Counters prop = st.total(Category::Propagation);
    const Counters repl = st.total(Category::Replication);
    const Counters all = st.total();
    out.propagation_words = std::max(out.propagation_words, cost(prop));
    out.replication_words = std::max(out.replication_words, cost(repl));
    out.max_rank_cost = std::max(out.max_rank_cost, cost(all));
    out.messages = std::max(out.messages, std::max(all.messages_sent, all.messages_received));
    out.dense_words = std::max(out.dense_words, st.cost(PayloadKind::Dense));
    out.sparse_words = std::max(out.sparse_words, st.cost(PayloadKind::Sparse));
    out.total_words_sent += all.words_sent;
    out.total_words_received += all.words_received;
    out.total_propagation_sent += prop.words_sent;
    out.total_replication_sent += repl.words_sent;
    out.max_fma = std::max(out.max_fma, st.fma);
  }
  return out;
}

}  // namespace dsddmm
