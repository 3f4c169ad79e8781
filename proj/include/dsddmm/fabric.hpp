#pragma once

// In-process message fabric: one worker per rank, FIFO channels, ring
// collectives over grid axes, exact word and message accounting.

#include <array>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "dsddmm/error.hpp"
#include "dsddmm/kernels.hpp"
#include "dsddmm/layout.hpp"
#include "dsddmm/matrix.hpp"

namespace dsddmm {

// =============================================================================
// Payloads and counters
// =============================================================================

/// Nonzero values travelling without their coordinates.
struct SparseValues {
  std::vector<double> values;
};

using Payload = std::variant<DenseMatrix, SparseMatrix, SparseValues>;

enum class PayloadKind { Dense, Sparse };

/// Control traffic (debug consistency checks) is never counted.
enum class Category { Propagation, Replication, Control };

inline constexpr std::string_view to_string(Category c) noexcept {
  switch (c) {
    case Category::Propagation: return "propagation";
    case Category::Replication: return "replication";
    case Category::Control: return "control";
  }
  return "?";
}

/// Dense: one word per element. COO: three words per nonzero. Values: one.
inline index_t words(const Payload& m) noexcept {
  return std::visit(
      [](const auto& x) -> index_t {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, DenseMatrix>) return x.size();
        else if constexpr (std::is_same_v<T, SparseMatrix>) return 3 * x.nnz();
        else return static_cast<index_t>(x.values.size());
      },
      m);
}

inline PayloadKind kind(const Payload& m) noexcept {
  return std::holds_alternative<DenseMatrix>(m) ? PayloadKind::Dense : PayloadKind::Sparse;
}

struct Counters {
  index_t words_sent = 0;
  index_t words_received = 0;
  index_t messages_sent = 0;
  index_t messages_received = 0;

  Counters& operator+=(const Counters& o) noexcept {
    words_sent += o.words_sent;
    words_received += o.words_received;
    messages_sent += o.messages_sent;
    messages_received += o.messages_received;
    return *this;
  }
  bool operator==(const Counters&) const = default;
};

struct CommStats {
  /// Indexed [Propagation, Replication][Dense, Sparse].
  std::array<std::array<Counters, 2>, 2> split{};
  index_t fma = 0;

  Counters& at(Category c, PayloadKind k) {
    if (c == Category::Control) throw CollectiveError("control traffic is not counted");
    return split[static_cast<std::size_t>(c)][static_cast<std::size_t>(k)];
  }
  const Counters& at(Category c, PayloadKind k) const { return const_cast<CommStats*>(this)->at(c, k); }

  Counters total(Category c) const { return sum(c); }
  Counters total(PayloadKind k) const {
    Counters out = at(Category::Propagation, k);
    out += at(Category::Replication, k);
    return out;
  }
  Counters total() const {
    Counters out = total(Category::Propagation);
    out += total(Category::Replication);
    return out;
  }

  /// max(words sent, words received), the per-rank bandwidth cost.
  index_t cost() const noexcept {
    const Counters t = total();
    return std::max(t.words_sent, t.words_received);
  }
  index_t cost(PayloadKind k) const {
    const Counters t = total(k);
    return std::max(t.words_sent, t.words_received);
  }

  CommStats& operator+=(const CommStats& o) noexcept {
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t k = 0; k < 2; ++k) split[c][k] += o.split[c][k];
    fma += o.fma;
    return *this;
  }
  bool operator==(const CommStats&) const = default;

 private:
  Counters sum(Category c) const {
    Counters out = at(c, PayloadKind::Dense);
    out += at(c, PayloadKind::Sparse);
    return out;
  }
};

// =============================================================================
// Fabric core
// =============================================================================

enum class Schedule { Threaded, Sequential };

namespace detail {

class Fabric {
 public:
  Fabric(int p, Schedule schedule)
      : boxes_(static_cast<std::size_t>(p)),
        waiting_(static_cast<std::size_t>(p)),
        done_(static_cast<std::size_t>(p), false),
        schedule_(schedule) {}

  void begin(int rank) {
    if (schedule_ != Schedule::Sequential) return;
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return turn_ == rank || deadlock_; });
    if (deadlock_) throw DeadlockError(deadlock_msg_);
  }

  void send(int src, int dst, int tag, Payload msg) {
    std::lock_guard lock(mu_);
    boxes_[static_cast<std::size_t>(dst)][{src, tag}].push_back(std::move(msg));
    if (schedule_ == Schedule::Threaded) cv_.notify_all();
  }

  Payload recv(int dst, int src, int tag) {
    std::unique_lock lock(mu_);
    const Wait w{src, tag};
    auto& me = waiting_[static_cast<std::size_t>(dst)];
    while (!available(dst, w)) {
      if (deadlock_) throw DeadlockError(deadlock_msg_);
      me = w;
      if (schedule_ == Schedule::Sequential) {
        pass_baton(dst);
        cv_.wait(lock, [&] { return turn_ == dst || deadlock_; });
      } else {
        if (all_blocked()) declare_deadlock();
        else cv_.wait(lock);
      }
    }
    me.reset();
    auto& q = boxes_[static_cast<std::size_t>(dst)][{src, tag}];
    Payload out = std::move(q.front());
    q.pop_front();
    return out;
  }

  void finish(int rank) {
    std::lock_guard lock(mu_);
    done_[static_cast<std::size_t>(rank)] = true;
    waiting_[static_cast<std::size_t>(rank)].reset();
    if (schedule_ == Schedule::Sequential) {
      if (turn_ == rank) pass_baton(rank);
    } else if (all_blocked()) {
      declare_deadlock();
    }
  }

 private:
  struct Wait {
    int src;
    int tag;
  };

  bool available(int dst, const Wait& w) const {
    const auto& box = boxes_[static_cast<std::size_t>(dst)];
    auto it = box.find({w.src, w.tag});
    return it != box.end() && !it->second.empty();
  }

  bool runnable(int r) const {
    const auto i = static_cast<std::size_t>(r);
    return !done_[i] && (!waiting_[i] || available(r, *waiting_[i]));
  }

  // True when some rank is unfinished and none of the unfinished can progress.
  bool all_blocked() const {
    bool any = false;
    for (int r = 0; r < static_cast<int>(done_.size()); ++r) {
      if (done_[static_cast<std::size_t>(r)]) continue;
      any = true;
      if (runnable(r)) return false;
    }
    return any;
  }

  void pass_baton(int from) {
    const int p = static_cast<int>(done_.size());
    for (int k = 1; k <= p; ++k) {
      const int r = (from + k) % p;
      if (runnable(r)) {
        turn_ = r;
        cv_.notify_all();
        return;
      }
    }
    if (all_blocked()) declare_deadlock();
  }

  void declare_deadlock() {
    std::string ranks;
    for (int r = 0; r < static_cast<int>(done_.size()); ++r) {
      const auto& w = waiting_[static_cast<std::size_t>(r)];
      if (done_[static_cast<std::size_t>(r)] || !w) continue;
      if (!ranks.empty()) ranks += ", ";
      ranks += std::to_string(r) + " (waiting on " + std::to_string(w->src) + ")";
    }
    deadlock_ = true;
    deadlock_msg_ = "deadlock: blocked ranks " + ranks;
    cv_.notify_all();
    throw DeadlockError(deadlock_msg_);
  }

  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::map<std::pair<int, int>, std::deque<Payload>>> boxes_;
  std::vector<std::optional<Wait>> waiting_;
  std::vector<bool> done_;
  Schedule schedule_;
  int turn_ = 0;
  bool deadlock_ = false;
  std::string deadlock_msg_;
};

}  // namespace detail

// =============================================================================
// Rank context
// =============================================================================

class RankContext {
 public:
  RankContext(detail::Fabric& fabric, const ProcessGrid& grid, int rank, bool debug_checks)
      : fabric_(&fabric), grid_(&grid), rank_(rank), coord_(grid.coord_of(rank)), debug_checks_(debug_checks) {}

  int rank() const noexcept { return rank_; }
  const GridCoord& coord() const noexcept { return coord_; }
  const ProcessGrid& grid() const noexcept { return *grid_; }
  bool debug_checks() const noexcept { return debug_checks_; }

  CommStats& stats() noexcept { return stats_; }
  const CommStats& stats() const noexcept { return stats_; }
  OpCounter& ops() noexcept { return ops_; }

  /// Rank at `displacement` steps along `axis`, wrapping around the ring.
  int neighbor(Axis axis, int displacement) const {
    const auto g = grid_->group(rank_, axis);
    const int n = static_cast<int>(g.size());
    const int pos = grid_->position(rank_, axis);
    return g[static_cast<std::size_t>((((pos + displacement) % n) + n) % n)];
  }

  void send(int dst, int tag, Payload msg, Category cat) {
    if (cat != Category::Control) {
      Counters& c = stats_.at(cat, kind(msg));
      c.words_sent += words(msg);
      c.messages_sent += 1;
    }
    fabric_->send(rank_, dst, tag, std::move(msg));
  }

  Payload recv(int src, int tag, Category cat) {
    Payload msg = fabric_->recv(rank_, src, tag);
    if (cat != Category::Control) {
      Counters& c = stats_.at(cat, kind(msg));
      c.words_received += words(msg);
      c.messages_received += 1;
    }
    return msg;
  }

  template <typename M>
  M recv_as(int src, int tag, Category cat) {
    Payload msg = recv(src, tag, cat);
    if (!std::holds_alternative<M>(msg)) throw CollectiveError("received payload of unexpected type");
    return std::get<M>(std::move(msg));
  }

 private:
  detail::Fabric* fabric_;
  const ProcessGrid* grid_;
  int rank_;
  GridCoord coord_;
  bool debug_checks_;
  CommStats stats_;
  OpCounter ops_;
};

// =============================================================================
// spawn
// =============================================================================

struct SpawnOptions {
  Schedule schedule = Schedule::Threaded;
  bool debug_checks = false;
};

template <typename R>
struct SpawnResult {
  std::vector<R> results;
  std::vector<CommStats> stats;
};

/// Runs program(ctx) on every rank of the grid and collects per-rank results
/// and counters. A rank's own exception wins over deadlocks it caused.
template <typename Program>
auto spawn(const ProcessGrid& grid, Program&& program, SpawnOptions options = {}) {
  using Raw = std::invoke_result_t<Program&, RankContext&>;
  using R = std::conditional_t<std::is_void_v<Raw>, std::monostate, Raw>;
  const int p = grid.p();
  detail::Fabric fabric(p, options.schedule);
  std::vector<std::optional<R>> results(static_cast<std::size_t>(p));
  std::vector<CommStats> stats(static_cast<std::size_t>(p));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(p));
  std::vector<bool> deadlocked(static_cast<std::size_t>(p), false);

  auto body = [&](int r) {
    const auto i = static_cast<std::size_t>(r);
    RankContext ctx(fabric, grid, r, options.debug_checks);
    try {
      fabric.begin(r);
      if constexpr (std::is_void_v<Raw>) {
        program(ctx);
        results[i].emplace();
      } else {
        results[i].emplace(program(ctx));
      }
    } catch (const DeadlockError&) {
      errors[i] = std::current_exception();
      deadlocked[i] = true;
    } catch (...) {
      errors[i] = std::current_exception();
    }
    ctx.stats().fma += ctx.ops().fma;
    stats[i] = ctx.stats();
    try {
      fabric.finish(r);
    } catch (const DeadlockError&) {
      // Surfaced through the blocked ranks.
    }
  };

  if (p == 1) {
    body(0);
  } else {
    std::vector<std::thread> workers;
    workers.reserve(static_cast<std::size_t>(p));
    for (int r = 0; r < p; ++r) workers.emplace_back(body, r);
    for (auto& t : workers) t.join();
  }

  for (int r = 0; r < p; ++r)
    if (errors[static_cast<std::size_t>(r)] && !deadlocked[static_cast<std::size_t>(r)])
      std::rethrow_exception(errors[static_cast<std::size_t>(r)]);
  for (int r = 0; r < p; ++r)
    if (errors[static_cast<std::size_t>(r)]) std::rethrow_exception(errors[static_cast<std::size_t>(r)]);

  SpawnResult<R> out;
  out.stats = std::move(stats);
  out.results.reserve(static_cast<std::size_t>(p));
  for (auto& r : results) out.results.push_back(std::move(*r));
  return out;
}

// =============================================================================
// Collectives
// =============================================================================

namespace detail {

enum class Op : int { Shift = 1, Allgather, ReduceScatter, AllgatherValues, ReduceValues, PatternCheck };

inline int tag(Op op, Axis axis) { return static_cast<int>(op) * 16 + static_cast<int>(axis); }

struct Ring {
  std::vector<int> members;
  int pos;
  int size() const noexcept { return static_cast<int>(members.size()); }
  int at(int offset) const noexcept {
    const int g = size();
    return members[static_cast<std::size_t>((((pos + offset) % g) + g) % g)];
  }
};

inline Ring ring(const RankContext& ctx, Axis axis) {
  return {ctx.grid().group(ctx.rank(), axis), ctx.grid().position(ctx.rank(), axis)};
}

inline int mod(int v, int g) { return ((v % g) + g) % g; }

// Ring reduce-scatter over a flat buffer split into g equal chunks. Chunk k
// accumulates in ring order starting at member k+1 and finishes at member k.
template <typename Wrap, typename Unwrap>
std::vector<double> ring_reduce_scatter(RankContext& ctx, std::span<const double> full, Axis axis, Op op,
                                        Wrap wrap, Unwrap unwrap) {
  const Ring rg = ring(ctx, axis);
  const int g = rg.size();
  if (full.size() % static_cast<std::size_t>(g) != 0)
    throw CollectiveError("reduce_scatter: buffer of " + std::to_string(full.size()) +
                          " words is not divisible by group size " + std::to_string(g));
  const std::size_t chunk = full.size() / static_cast<std::size_t>(g);
  auto piece = [&](int k) { return full.subspan(static_cast<std::size_t>(k) * chunk, chunk); };
  std::vector<double> acc(piece(rg.pos).begin(), piece(rg.pos).end());
  if (g == 1) return acc;
  const int t = tag(op, axis);
  const int next = rg.at(1);
  const int prev = rg.at(-1);
  acc.assign(piece(mod(rg.pos - 1, g)).begin(), piece(mod(rg.pos - 1, g)).end());
  for (int s = 0; s < g - 1; ++s) {
    ctx.send(next, t, wrap(std::move(acc)), Category::Replication);
    acc = unwrap(ctx.recv(prev, t, Category::Replication));
    if (acc.size() != chunk) throw CollectiveError("reduce_scatter: unequal buffer sizes across the group");
    const auto own = piece(mod(rg.pos - s - 2, g));
    for (std::size_t k = 0; k < chunk; ++k) acc[k] += own[k];
  }
  return acc;
}

}  // namespace detail

/// Sends `buf` `displacement` steps forward along `axis` and returns the
/// buffer arriving from the same distance behind. Displacement 0 is free.
template <typename M>
M cyclic_shift(RankContext& ctx, M buf, Axis axis, int displacement = 1, Category cat = Category::Propagation) {
  if (displacement == 0) return buf;
  const detail::Ring rg = detail::ring(ctx, axis);
  const int t = detail::tag(detail::Op::Shift, axis);
  ctx.send(rg.at(displacement), t, Payload(std::move(buf)), cat);
  return ctx.recv_as<M>(rg.at(-displacement), t, cat);
}

/// Ring all-gather; the result stacks the members' blocks by row in ring order.
inline DenseMatrix allgather(RankContext& ctx, const DenseMatrix& block, Axis axis) {
  const detail::Ring rg = detail::ring(ctx, axis);
  const int g = rg.size();
  if (g == 1) return block;
  const int t = detail::tag(detail::Op::Allgather, axis);
  DenseMatrix out(block.rows() * g, block.cols());
  out.set_block(block.rows() * rg.pos, 0, block);
  DenseMatrix cur = block;
  for (int s = 0; s < g - 1; ++s) {
    ctx.send(rg.at(1), t, Payload(std::move(cur)), Category::Replication);
    cur = ctx.recv_as<DenseMatrix>(rg.at(-1), t, Category::Replication);
    if (cur.rows() != block.rows() || cur.cols() != block.cols())
      throw CollectiveError("allgather: unequal block sizes across the group");
    out.set_block(block.rows() * detail::mod(rg.pos - s - 1, g), 0, cur);
  }
  return out;
}

/// Ring reduce-scatter by rows: member k receives the sum of row chunk k.
inline DenseMatrix reduce_scatter(RankContext& ctx, const DenseMatrix& full, Axis axis) {
  const int g = static_cast<int>(ctx.grid().group(ctx.rank(), axis).size());
  if (full.rows() % g != 0)
    throw CollectiveError("reduce_scatter: " + std::to_string(full.rows()) + " rows not divisible by group size " +
                          std::to_string(g));
  const index_t rows = full.rows() / g;
  const index_t cols = full.cols();
  auto wrap = [&](std::vector<double> v) {
    const auto n = static_cast<index_t>(v.size());
    return Payload(DenseMatrix(cols == 0 ? 0 : n / cols, cols, std::move(v)));
  };
  auto unwrap = [](Payload m) {
    if (!std::holds_alternative<DenseMatrix>(m)) throw CollectiveError("received payload of unexpected type");
    return std::move(std::get<DenseMatrix>(m).storage());
  };
  auto v = detail::ring_reduce_scatter(ctx, full.data(), axis, detail::Op::ReduceScatter, wrap, unwrap);
  return DenseMatrix(rows, cols, std::move(v));
}

/// All-gather of equal-length value arrays, concatenated in ring order.
inline std::vector<double> allgather_values(RankContext& ctx, std::span<const double> chunk, Axis axis) {
  const detail::Ring rg = detail::ring(ctx, axis);
  const int g = rg.size();
  std::vector<double> out(chunk.size() * static_cast<std::size_t>(g));
  std::copy(chunk.begin(), chunk.end(), out.begin() + static_cast<std::ptrdiff_t>(chunk.size()) * rg.pos);
  if (g == 1) return out;
  const int t = detail::tag(detail::Op::AllgatherValues, axis);
  SparseValues cur{{chunk.begin(), chunk.end()}};
  for (int s = 0; s < g - 1; ++s) {
    ctx.send(rg.at(1), t, Payload(std::move(cur)), Category::Replication);
    cur = ctx.recv_as<SparseValues>(rg.at(-1), t, Category::Replication);
    if (cur.values.size() != chunk.size()) throw CollectiveError("allgather_values: unequal chunk sizes");
    std::copy(cur.values.begin(), cur.values.end(),
              out.begin() + static_cast<std::ptrdiff_t>(chunk.size()) * detail::mod(rg.pos - s - 1, g));
  }
  return out;
}

/// Reduce-scatter of value arrays: member k receives the sum of chunk k.
inline std::vector<double> reduce_values(RankContext& ctx, std::span<const double> full, Axis axis) {
  auto wrap = [](std::vector<double> v) { return Payload(SparseValues{std::move(v)}); };
  auto unwrap = [](Payload m) {
    if (!std::holds_alternative<SparseValues>(m)) throw CollectiveError("received payload of unexpected type");
    return std::move(std::get<SparseValues>(m).values);
  };
  return detail::ring_reduce_scatter(ctx, full, axis, detail::Op::ReduceValues, wrap, unwrap);
}

/// Uncounted check that every member of the group holds the same sparsity
/// pattern. Only runs when the context has debug checks enabled.
inline void check_fiber_pattern(RankContext& ctx, const SparseMatrix& s, Axis axis) {
  if (!ctx.debug_checks()) return;
  const detail::Ring rg = detail::ring(ctx, axis);
  if (rg.size() == 1) return;
  const int t = detail::tag(detail::Op::PatternCheck, axis);
  ctx.send(rg.at(1), t, Payload(s.with_values(std::vector<double>(s.values().size(), 0.0))), Category::Control);
  const auto prev = ctx.recv_as<SparseMatrix>(rg.at(-1), t, Category::Control);
  if (!prev.same_pattern(s))
    throw CollectiveError("value-only collective: rank " + std::to_string(ctx.rank()) +
                          " holds a different sparsity pattern than rank " + std::to_string(rg.at(-1)));
}

}  // namespace dsddmm
