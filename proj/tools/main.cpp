// dsddmm command-line harness: workload generation, simulated distributed
// runs, benchmark presets and cost-model queries.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dsddmm/dsddmm.hpp"

using namespace dsddmm;
using Json = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kVerifyFail = 2, kRuntime = 3 };

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string error_name(const std::exception& e) {
  if (dynamic_cast<const DimensionMismatch*>(&e)) return "DimensionMismatch";
  if (dynamic_cast<const InvalidReplication*>(&e)) return "InvalidReplication";
  if (dynamic_cast<const IndivisibleDimensions*>(&e)) return "IndivisibleDimensions";
  if (dynamic_cast<const IncompatibleStrategy*>(&e)) return "IncompatibleStrategy";
  if (dynamic_cast<const LayoutError*>(&e)) return "LayoutError";
  if (dynamic_cast<const CollectiveError*>(&e)) return "CollectiveError";
  if (dynamic_cast<const DeadlockError*>(&e)) return "DeadlockError";
  if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
  if (dynamic_cast<const Error*>(&e)) return "Error";
  return "RuntimeError";
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json envelope(const std::string& command) {
  Json j;
  j["schema"] = 1;
  j["command"] = command;
  j["timestamp"] = timestamp();
  return j;
}

template <typename T, std::size_t N>
T parse_enum(const std::string& text, const std::array<T, N>& all, const char* what) {
  for (T v : all)
    if (to_string(v) == text) return v;
  std::string options;
  for (T v : all) options += (options.empty() ? "" : ", ") + std::string(to_string(v));
  throw UsageError(std::string("unknown ") + what + " '" + text + "' (expected one of " + options + ")");
}

constexpr std::array<KernelMode, 5> kModes = {KernelMode::SDDMM, KernelMode::SpMMA, KernelMode::SpMMB,
                                              KernelMode::FusedMMA, KernelMode::FusedMMB};

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError("invalid integer list '" + text + "'");
    }
  }
  if (out.empty()) throw UsageError("empty integer list");
  return out;
}

/// Replication factor given as an integer or "auto".
std::optional<int> parse_c(const std::string& text) {
  if (text == "auto") return std::nullopt;
  const auto v = parse_int_list(text);
  if (v.size() != 1) throw UsageError("--c takes one value or 'auto'");
  return v[0];
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << text;
}

// ---------------------------------------------------------------------------
// Memory budget

/// Rough peak bytes of a simulated run: inputs, partitioned copies,
/// replicated dense buffers and the serial oracle.
double estimate_bytes(index_t n, index_t r, index_t nnz, int c) {
  const double dense = static_cast<double>(n) * static_cast<double>(r) * 8.0;
  const double sparse = static_cast<double>(nnz) * 24.0;
  return dense * (6.0 + 2.0 * c) + sparse * (4.0 + c);
}

struct Budget {
  double mib = 2048;
  int max_p = 64;

  std::optional<std::string> exceeded(int p, index_t n, index_t r, index_t nnz, int c) const {
    if (p > max_p) return "p=" + std::to_string(p) + " exceeds --max-p " + std::to_string(max_p);
    const double need = estimate_bytes(n, r, nnz, c) / (1024.0 * 1024.0);
    if (need > mib) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "memory budget: estimated %.0f MiB > %.0f MiB", need, mib);
      return std::string(buf);
    }
    return std::nullopt;
  }
};

// ---------------------------------------------------------------------------
// Verification

struct Verdict {
  bool pass = true;
  double max_rel_error = 0.0;
};

void accumulate(Verdict& v, double got, double want) {
  const double diff = std::abs(got - want);
  if (diff > std::max(1e-10 * std::abs(want), 1e-12)) v.pass = false;
  if (want != 0.0) v.max_rel_error = std::max(v.max_rel_error, diff / std::abs(want));
  else v.max_rel_error = std::max(v.max_rel_error, diff);
}

Verdict verify(const RunResult& res, KernelMode mode, const SparseMatrix& s, const DenseMatrix& a,
               const DenseMatrix& b, const EdgeScore& score) {
  Verdict v;
  if (mode == KernelMode::SDDMM) {
    const SparseMatrix want = sddmm_scored(a, b, s, score);
    if (!res.sparse().same_pattern(want)) return {false, INFINITY};
    for (index_t k = 0; k < want.nnz(); ++k)
      accumulate(v, res.sparse().values()[static_cast<std::size_t>(k)], want.values()[static_cast<std::size_t>(k)]);
    return v;
  }
  DenseMatrix want;
  if (mode == KernelMode::SpMMA) want = spmm_a(s, b);
  else if (mode == KernelMode::SpMMB) want = spmm_b(s, a);
  else want = fusedmm_local(mode, s, a, b, score);
  const DenseMatrix& got = res.dense();
  if (got.rows() != want.rows() || got.cols() != want.cols()) return {false, INFINITY};
  for (index_t k = 0; k < want.size(); ++k)
    accumulate(v, got.data()[static_cast<std::size_t>(k)], want.data()[static_cast<std::size_t>(k)]);
  return v;
}

// ---------------------------------------------------------------------------
// Experiments

struct Workload {
  std::string matrix_path;
  index_t n = 1024;
  index_t nnz_per_row = 8;
  index_t r = 64;
  std::uint64_t seed = 1;
};

struct ExperimentSpec {
  Workload workload;
  Algorithm alg = Algorithm::D15DenseShift;
  FusionStrategy strategy = FusionStrategy::NoElision;
  KernelMode mode = KernelMode::FusedMMA;
  int p = 4;
  std::optional<int> c = 1;
  int repetitions = 1;
  bool verify = true;
  bool pad = false;
  bool debug_checks = false;
  Schedule schedule = Schedule::Threaded;
};

struct Inputs {
  SparseMatrix s, s_t;
  DenseMatrix a, b;
};

Inputs load_inputs(const Workload& w) {
  Inputs in;
  in.s = w.matrix_path.empty() ? erdos_renyi(w.n, w.n, w.nnz_per_row, w.seed) : read_matrix_market(w.matrix_path);
  in.s_t = transpose(in.s);
  in.a = random_dense(in.s.rows(), w.r, w.seed + 1);
  in.b = random_dense(in.s.cols(), w.r, w.seed + 2);
  return in;
}

std::optional<CostReport> model_for(const ExperimentSpec& spec, int c, index_t n, index_t r, double phi) {
  if (!is_fused(spec.mode) || spec.p < 2) return std::nullopt;
  return predict({spec.alg, spec.strategy, spec.p, c, n, r, phi});
}

int resolve_c(const ExperimentSpec& spec, double phi) {
  if (spec.c) return *spec.c;
  return optimal_c(spec.alg, is_fused(spec.mode) ? spec.strategy : FusionStrategy::NoElision, spec.p, phi).integer;
}

RunResult execute(const ExperimentSpec& spec, int c, const Inputs& in) {
  RunOptions opt;
  opt.pad = spec.pad;
  opt.schedule = spec.schedule;
  opt.debug_checks = spec.debug_checks;
  if (is_fused(spec.mode))
    return run_fusedmm(spec.alg, spec.strategy, spec.mode, in.s, in.s_t, in.a, in.b, spec.p, c, opt);
  return run_kernel(spec.alg, spec.mode, in.s, in.a, in.b, spec.p, c, opt);
}

Json counters_json(const Counters& c) {
  return {{"words_sent", c.words_sent},
          {"words_received", c.words_received},
          {"messages_sent", c.messages_sent},
          {"messages_received", c.messages_received}};
}

Json breakdown_json(const CommBreakdown& b) {
  return {{"max_rank_words", b.max_rank_cost},       {"propagation_words", b.propagation_words},
          {"replication_words", b.replication_words}, {"dense_words", b.dense_words},
          {"sparse_words", b.sparse_words},           {"messages", b.messages},
          {"max_rank_fma", b.max_fma},                {"total_words_sent", b.total_words_sent},
          {"total_words_received", b.total_words_received}};
}

std::string csv_per_rank(const std::vector<CommStats>& stats) {
  std::ostringstream out;
  out << "rank,category,kind,words_sent,words_received,messages_sent,messages_received\n";
  for (std::size_t r = 0; r < stats.size(); ++r)
    for (Category cat : {Category::Propagation, Category::Replication})
      for (PayloadKind k : {PayloadKind::Dense, PayloadKind::Sparse}) {
        const Counters& c = stats[r].at(cat, k);
        out << r << ',' << to_string(cat) << ',' << (k == PayloadKind::Dense ? "dense" : "sparse") << ','
            << c.words_sent << ',' << c.words_received << ',' << c.messages_sent << ',' << c.messages_received << '\n';
      }
  return out.str();
}

int cmd_run(const ExperimentSpec& spec, const Budget& budget, const std::string& format, const std::string& out_path) {
  const Inputs in = load_inputs(spec.workload);
  const index_t n = in.s.cols(), r = spec.workload.r;
  const double phi = Phi::of(in.s, r).value;
  const int c = resolve_c(spec, phi);
  if (auto why = budget.exceeded(spec.p, std::max(in.s.rows(), n), r, in.s.nnz(), c)) throw Error(*why);

  RunResult res = execute(spec, c, in);
  for (int k = 1; k < spec.repetitions; ++k) {
    RunResult again = execute(spec, c, in);
    if (!(again.stats == res.stats) || !(again.output == res.output))
      throw Error("repetition " + std::to_string(k) + " differs from the first run");
  }
  const CommBreakdown br = comm_breakdown(res.stats);
  std::optional<Verdict> verdict;
  if (spec.verify) verdict = verify(res, spec.mode, in.s, in.a, in.b, {});

  if (format == "csv") {
    emit(csv_per_rank(res.stats), out_path);
  } else {
    Json j = envelope("run");
    j["experiment"] = {{"matrix", spec.workload.matrix_path.empty() ? Json(nullptr) : Json(spec.workload.matrix_path)},
                       {"rows", in.s.rows()},
                       {"cols", in.s.cols()},
                       {"nnz", in.s.nnz()},
                       {"nnz_per_row", spec.workload.matrix_path.empty() ? Json(spec.workload.nnz_per_row) : Json(nullptr)},
                       {"r", r},
                       {"phi", phi},
                       {"seed", spec.workload.seed},
                       {"alg", to_string(spec.alg)},
                       {"strategy", is_fused(spec.mode) ? Json(to_string(spec.strategy)) : Json(nullptr)},
                       {"mode", to_string(spec.mode)},
                       {"p", spec.p},
                       {"c", c},
                       {"c_auto", !spec.c.has_value()},
                       {"repetitions", spec.repetitions},
                       {"pad", spec.pad}};
    j["summary"] = breakdown_json(br);
    Json ranks = Json::array();
    for (std::size_t k = 0; k < res.stats.size(); ++k) {
      const CommStats& st = res.stats[k];
      Json rk = {{"rank", k}, {"coord", res.grid.coord_of(static_cast<int>(k)).str()}, {"fma", st.fma}};
      for (Category cat : {Category::Propagation, Category::Replication})
        for (PayloadKind kind : {PayloadKind::Dense, PayloadKind::Sparse})
          rk[std::string(to_string(cat)) + (kind == PayloadKind::Dense ? "_dense" : "_sparse")] =
              counters_json(st.at(cat, kind));
      ranks.push_back(rk);
    }
    j["ranks"] = ranks;
    if (auto model = model_for(spec, c, n, r, phi)) {
      j["predicted"] = {{"words", model->words},
                        {"dense_words", model->dense_words},
                        {"sparse_words", model->sparse_words},
                        {"messages", model->messages},
                        {"dense_delta", static_cast<double>(br.dense_words) - model->dense_words},
                        {"words_delta", static_cast<double>(br.max_rank_cost) - model->words}};
    } else {
      j["predicted"] = nullptr;
    }
    if (verdict) j["verify"] = {{"verdict", verdict->pass ? "PASS" : "FAIL"}, {"max_rel_error", verdict->max_rel_error}};
    else j["verify"] = {{"verdict", "skipped"}};
    emit(j.dump(2) + "\n", out_path);
  }
  return verdict && !verdict->pass ? kVerifyFail : kOk;
}

// ---------------------------------------------------------------------------
// Bench presets

struct BenchOptions {
  std::string preset;
  std::vector<int> ps;
  std::vector<int> cs;  // empty: every valid c up to 16
  index_t side = 65536;
  index_t nnz_per_row = 32;
  index_t r = 128;
  KernelMode mode = KernelMode::FusedMMA;
  bool verify = true;
  std::uint64_t seed = 1;
  // sweep-phi
  std::vector<int> rs = {32, 64, 128, 256, 512};
  std::vector<int> nnz_rows = {1, 2, 4, 8, 16, 32, 64, 128, 256};
};

struct CsvRow {
  std::string preset;
  int p = 1, c = 1;
  Algorithm alg = Algorithm::D15DenseShift;
  FusionStrategy strategy = FusionStrategy::NoElision;
  KernelMode mode = KernelMode::FusedMMA;
  double predicted = 0.0;
  std::optional<CommBreakdown> measured;
  std::string verify;
  index_t n = 0, r = 0;
  double phi = 0.0;
  std::string note;
};

CsvRow make_row(const std::string& preset, int p, int c, Algorithm alg, FusionStrategy s, KernelMode mode) {
  CsvRow row;
  row.preset = preset;
  row.p = p;
  row.c = c;
  row.alg = alg;
  row.strategy = s;
  row.mode = mode;
  return row;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_header() {
  return "preset,p,c,alg,strategy,mode,predicted_words,measured_words,propagation_words,replication_words,messages,"
         "verify,n,r,phi,note\n";
}

std::string csv_line(const CsvRow& row) {
  std::ostringstream out;
  out << row.preset << ',' << row.p << ',' << row.c << ',' << to_string(row.alg) << ',' << to_string(row.strategy)
      << ',' << to_string(row.mode) << ',' << fmt_double(row.predicted) << ',';
  if (row.measured)
    out << row.measured->max_rank_cost << ',' << row.measured->propagation_words << ','
        << row.measured->replication_words << ',' << row.measured->messages;
  else out << ",,,";
  out << ',' << row.verify << ',' << row.n << ',' << row.r << ',' << fmt_double(row.phi) << ',' << row.note << '\n';
  return out.str();
}

std::vector<int> bench_cs(const BenchOptions& o, Algorithm alg, int p) {
  std::vector<int> out;
  for (int c : valid_replication_factors(alg, p))
    if (o.cs.empty() ? c <= 16 : std::find(o.cs.begin(), o.cs.end(), c) != o.cs.end()) out.push_back(c);
  return out;
}

// One measured-or-skipped row per (alg, strategy, c) at a fixed workload.
void bench_point(const BenchOptions& o, const Budget& budget, int p, index_t n, index_t per_row, std::string& out) {
  std::optional<Inputs> in;
  const double phi = Phi::of(n * per_row, n, o.r).value;
  for (Algorithm alg : kAllAlgorithms)
    for (FusionStrategy s : kAllStrategies) {
      if (!strategy_valid(alg, s)) continue;
      for (int c : bench_cs(o, alg, p)) {
        CsvRow row = make_row(o.preset, p, c, alg, s, o.mode);
        row.n = n;
        row.r = o.r;
        row.phi = phi;
        row.predicted = predict({alg, s, p, c, n, o.r, phi}).words;
        if (auto why = budget.exceeded(p, n, o.r, n * per_row, c)) {
          row.verify = "skipped";
          row.note = *why;
        } else {
          if (!in) in = load_inputs({"", n, per_row, o.r, o.seed});
          ExperimentSpec spec;
          spec.alg = alg;
          spec.strategy = s;
          spec.mode = o.mode;
          spec.p = p;
          spec.pad = true;
          try {
            const RunResult res = execute(spec, c, *in);
            row.measured = comm_breakdown(res.stats);
            row.verify = o.verify ? (verify(res, o.mode, in->s, in->a, in->b, {}).pass ? "PASS" : "FAIL") : "skipped";
          } catch (const Error& e) {
            row.verify = "error";
            row.note = error_name(e) + ": " + e.what();
          }
        }
        if (row.note.find(',') != std::string::npos) row.note = "\"" + row.note + "\"";
        out += csv_line(row);
      }
    }
}

int cmd_bench(const BenchOptions& o, const Budget& budget, const std::string& out_path) {
  std::string out = csv_header();
  if (o.preset == "weak1") {
    for (int p : o.ps) bench_point(o, budget, p, o.side * p, o.nnz_per_row, out);
  } else if (o.preset == "weak2") {
    for (int p : o.ps) {
      const int root = static_cast<int>(std::lround(std::sqrt(p)));
      if (root * root != p) throw UsageError("weak2 needs square p, got " + std::to_string(p));
      bench_point(o, budget, p, o.side * root, o.nnz_per_row * root, out);
    }
  } else if (o.preset == "sweep-phi") {
    for (int p : o.ps)
      for (int r : o.rs)
        for (int k : o.nnz_rows) {
          const index_t n = o.side;
          const double phi = Phi::of(n * k, n, r).value;
          const auto ranked = select_algorithm(p, n, r, n * k);
          for (std::size_t i = 0; i < ranked.size(); ++i) {
            CsvRow row = make_row(o.preset, p, ranked[i].c, ranked[i].alg, ranked[i].strategy, o.mode);
            row.predicted = ranked[i].words;
            row.verify = "model";
            row.n = n;
            row.r = r;
            row.phi = phi;
            row.note = "rank " + std::to_string(i + 1);
            out += csv_line(row);
          }
        }
  } else {
    throw UsageError("unknown preset '" + o.preset + "' (expected weak1, weak2, sweep-phi)");
  }
  emit(out, out_path);
  return out.find(",FAIL,") != std::string::npos ? kVerifyFail : kOk;
}

// ---------------------------------------------------------------------------
// Model queries

struct PredictOptions {
  Algorithm alg = Algorithm::D15DenseShift;
  FusionStrategy strategy = FusionStrategy::NoElision;
  int p = 16;
  std::optional<int> c;
  index_t n = 1024, r = 64;
  std::optional<double> phi;
  std::optional<index_t> nnz;
  double alpha = 0.0, beta = 1.0;
};

int cmd_predict(const PredictOptions& o, const std::string& out_path) {
  if (o.phi && o.nnz) throw UsageError("give --phi or --nnz, not both");
  const double phi = o.phi ? *o.phi : o.nnz ? Phi::of(*o.nnz, o.n, o.r).value : 0.0;
  check_strategy(o.alg, o.strategy);
  const int c = o.c ? *o.c : optimal_c(o.alg, o.strategy, o.p, phi).integer;
  const CostReport rep = predict({o.alg, o.strategy, o.p, c, o.n, o.r, phi});
  Json j = envelope("predict");
  j["query"] = {{"alg", to_string(o.alg)}, {"strategy", to_string(o.strategy)},
                {"p", o.p},                {"c", c},
                {"c_auto", !o.c.has_value()}, {"n", o.n},
                {"r", o.r},                {"phi", phi}};
  j["words"] = rep.words;
  j["dense_words"] = rep.dense_words;
  j["sparse_words"] = rep.sparse_words;
  j["messages"] = rep.messages;
  j["weighted_cost"] = {{"alpha", o.alpha}, {"beta", o.beta}, {"value", weighted_cost(rep, o.alpha, o.beta)}};
  j["optimal_c"] = {{"continuous", rep.optimal_c_continuous}, {"integer", rep.optimal_c_integer}};
  j["local_s"] = {{"rows", rep.local_s.rows}, {"cols", rep.local_s.cols}};
  j["local_b"] = {{"rows", rep.local_b.rows}, {"cols", rep.local_b.cols}};
  emit(j.dump(2) + "\n", out_path);
  return kOk;
}

int cmd_select(int p, index_t n, index_t r, index_t nnz, const std::string& out_path) {
  const auto ranked = select_algorithm(p, n, r, nnz);
  Json j = envelope("select");
  j["query"] = {{"p", p}, {"n", n}, {"r", r}, {"nnz", nnz}, {"phi", Phi::of(nnz, n, r).value}};
  Json list = Json::array();
  for (const auto& e : ranked)
    list.push_back({{"alg", to_string(e.alg)}, {"strategy", to_string(e.strategy)}, {"c", e.c}, {"words", e.words}});
  j["ranked"] = list;
  emit(j.dump(2) + "\n", out_path);
  return kOk;
}

int cmd_gen(index_t rows, index_t cols, index_t per_row, std::uint64_t seed, const std::string& out_path) {
  if (rows <= 0 || cols <= 0) throw UsageError("--rows and --cols must be positive");
  if (per_row < 0 || per_row > cols)
    throw UsageError("--nnz-per-row " + std::to_string(per_row) + " exceeds " + std::to_string(cols) + " columns");
  const SparseMatrix s = erdos_renyi(rows, cols, per_row, seed);
  if (out_path.empty() || out_path == "-") write_matrix_market(s, std::cout);
  else write_matrix_market(s, out_path);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed SDDMM / SpMM / FusedMM simulator"};
  app.require_subcommand(1);
  std::string out_path;
  Budget budget;

  std::string alg_s = "d15-dense", strategy_s = "none", mode_s = "fusedmma", c_s = "1", schedule_s = "threaded";
  std::string format = "json";

  // gen
  auto* gen = app.add_subcommand("gen", "Write an Erdos-Renyi matrix in Matrix Market format");
  index_t gen_rows = 0, gen_cols = 0, gen_per_row = 32;
  std::uint64_t gen_seed = 1;
  gen->add_option("--rows", gen_rows, "Row count")->required();
  gen->add_option("--cols", gen_cols, "Column count (default: rows)");
  gen->add_option("--nnz-per-row", gen_per_row, "Nonzeros per row");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("-o,--output", out_path, "Output file (default: stdout)");

  // run
  auto* run = app.add_subcommand("run", "Run one kernel on the simulated fabric and report counters");
  ExperimentSpec spec;
  bool no_verify = false;
  run->add_option("--matrix", spec.workload.matrix_path, "Matrix Market file (default: generate)");
  run->add_option("--n", spec.workload.n, "Generated matrix side length");
  run->add_option("--nnz-per-row", spec.workload.nnz_per_row, "Generated nonzeros per row");
  run->add_option("--r", spec.workload.r, "Dense embedding width");
  run->add_option("--seed", spec.workload.seed, "Workload seed");
  run->add_option("--alg", alg_s, "d15-dense, d15-sparse, d25-dense or d25-sparse");
  run->add_option("--strategy", strategy_s, "none, reuse or fusion (FusedMM modes)");
  run->add_option("--mode", mode_s, "sddmm, spmma, spmmb, fusedmma or fusedmmb");
  run->add_option("--p", spec.p, "Simulated rank count");
  run->add_option("--c", c_s, "Replication factor or 'auto'");
  run->add_option("--repetitions", spec.repetitions, "Repeat and require identical results")->check(CLI::PositiveNumber);
  run->add_option("--schedule", schedule_s, "threaded or sequential");
  run->add_flag("--pad", spec.pad, "Zero-pad dimensions to the grid");
  run->add_flag("--debug-checks", spec.debug_checks, "Enable uncounted consistency checks");
  run->add_flag("--no-verify", no_verify, "Skip the serial oracle check");
  run->add_option("--format", format, "json or csv (per-rank counters)")->check(CLI::IsMember({"json", "csv"}));
  run->add_option("-o,--output", out_path, "Output file (default: stdout)");

  // bench
  auto* bench = app.add_subcommand("bench", "Run an experiment preset and emit CSV");
  BenchOptions bo;
  std::string ps_s = "1,2,4", cs_s, rs_s, nnz_rows_s;
  bench->add_option("preset", bo.preset, "weak1, weak2 or sweep-phi")->required();
  bench->add_option("--p", ps_s, "Comma-separated rank counts");
  bench->add_option("--c", cs_s, "Comma-separated replication factors (default: valid c <= 16)");
  bench->add_option("--side", bo.side, "Base side length");
  bench->add_option("--nnz-per-row", bo.nnz_per_row, "Base nonzeros per row");
  bench->add_option("--r", bo.r, "Dense embedding width");
  bench->add_option("--mode", mode_s, "fusedmma or fusedmmb");
  bench->add_option("--seed", bo.seed, "Workload seed");
  bench->add_option("--r-list", rs_s, "sweep-phi: comma-separated r values");
  bench->add_option("--nnz-list", nnz_rows_s, "sweep-phi: comma-separated nonzeros per row");
  bench->add_flag("--no-verify", no_verify, "Skip the serial oracle check");
  bench->add_option("-o,--output", out_path, "Output file (default: stdout)");

  for (auto* sub : {run, bench}) {
    sub->add_option("--memory-budget", budget.mib, "Memory budget in MiB for simulated runs");
    sub->add_option("--max-p", budget.max_p, "Largest simulated p");
  }

  // predict
  auto* pred = app.add_subcommand("predict", "Evaluate the communication model");
  PredictOptions po;
  double phi_v = 0.0;
  index_t nnz_v = 0;
  pred->add_option("--alg", alg_s, "Algorithm");
  pred->add_option("--strategy", strategy_s, "Fusion strategy");
  pred->add_option("--p", po.p, "Rank count");
  pred->add_option("--c", c_s, "Replication factor or 'auto'");
  pred->add_option("--n", po.n, "Side length");
  pred->add_option("--r", po.r, "Dense width");
  auto* phi_opt = pred->add_option("--phi", phi_v, "nnz / (n r)");
  auto* nnz_opt = pred->add_option("--nnz", nnz_v, "Nonzero count");
  pred->add_option("--alpha", po.alpha, "Per-message weight for weighted_cost");
  pred->add_option("--beta", po.beta, "Per-word weight for weighted_cost");
  pred->add_option("-o,--output", out_path, "Output file (default: stdout)");

  // select
  auto* sel = app.add_subcommand("select", "Rank algorithms by predicted words");
  int sel_p = 16;
  index_t sel_n = 1024, sel_r = 64, sel_nnz = 0;
  sel->add_option("--p", sel_p, "Rank count");
  sel->add_option("--n", sel_n, "Side length");
  sel->add_option("--r", sel_r, "Dense width");
  sel->add_option("--nnz", sel_nnz, "Nonzero count")->required();
  sel->add_option("-o,--output", out_path, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen(gen_rows, gen_cols > 0 ? gen_cols : gen_rows, gen_per_row, gen_seed, out_path);
    if (*run) {
      spec.alg = parse_enum(alg_s, kAllAlgorithms, "algorithm");
      spec.strategy = parse_enum(strategy_s, kAllStrategies, "strategy");
      spec.mode = parse_enum(mode_s, kModes, "mode");
      spec.c = parse_c(c_s);
      spec.verify = !no_verify;
      if (schedule_s == "sequential") spec.schedule = Schedule::Sequential;
      else if (schedule_s != "threaded") throw UsageError("unknown schedule '" + schedule_s + "'");
      return cmd_run(spec, budget, format, out_path);
    }
    if (*bench) {
      bo.ps = parse_int_list(ps_s);
      if (!cs_s.empty()) bo.cs = parse_int_list(cs_s);
      if (!rs_s.empty()) bo.rs = parse_int_list(rs_s);
      if (!nnz_rows_s.empty()) bo.nnz_rows = parse_int_list(nnz_rows_s);
      bo.mode = parse_enum(mode_s, kModes, "mode");
      if (!is_fused(bo.mode)) throw UsageError("bench runs FusedMM modes only");
      bo.verify = !no_verify;
      return cmd_bench(bo, budget, out_path);
    }
    if (*pred) {
      po.alg = parse_enum(alg_s, kAllAlgorithms, "algorithm");
      po.strategy = parse_enum(strategy_s, kAllStrategies, "strategy");
      po.c = parse_c(pred->count("--c") == 0 ? "auto" : c_s);
      if (phi_opt->count()) po.phi = phi_v;
      if (nnz_opt->count()) po.nnz = nnz_v;
      return cmd_predict(po, out_path);
    }
    if (*sel) return cmd_select(sel_p, sel_n, sel_r, sel_nnz, out_path);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << error_name(e) << ": " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
