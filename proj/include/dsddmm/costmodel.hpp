#pragma once

// Closed-form communication model for the FusedMM algorithms.
//
// Words are per-rank, unit inverse bandwidth, for a square n x n sparse
// matrix with nnz = phi * n * r. Message counts are per rank.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dsddmm/algorithms/common.hpp"
#include "dsddmm/error.hpp"
#include "dsddmm/layout.hpp"

namespace dsddmm {

struct CostQuery {
  Algorithm alg = Algorithm::D15DenseShift;
  FusionStrategy strategy = FusionStrategy::NoElision;
  int p = 1;
  int c = 1;
  index_t n = 0;
  index_t r = 0;
  double phi = 0.0;
};

struct LocalDims {
  double rows = 0.0;
  double cols = 0.0;
};

struct CostReport {
  double words = 0.0;
  double dense_words = 0.0;
  double sparse_words = 0.0;
  double messages = 0.0;
  double optimal_c_continuous = 1.0;
  int optimal_c_integer = 1;
  LocalDims local_s;
  LocalDims local_b;
};

/// Dense and sparse word terms of one row evaluated at a real-valued c.
struct WordTerms {
  double dense = 0.0;
  double sparse = 0.0;
  double total() const noexcept { return dense + sparse; }
};

inline WordTerms model_words(Algorithm alg, FusionStrategy s, double p, double c, double n, double r, double phi) {
  check_strategy(alg, s);
  const double nr = n * r;
  const bool reuse = s == FusionStrategy::ReplicationReuse;
  switch (alg) {
    case Algorithm::D15DenseShift:
      if (s == FusionStrategy::LocalKernelFusion) return {nr * (1.0 / c + 2.0 * (c - 1.0) / p), 0.0};
      if (reuse) return {nr * (2.0 / c + (c - 1.0) / p), 0.0};
      return {nr * (2.0 * (c - 1.0) / p + 2.0 / c), 0.0};
    case Algorithm::D15SparseShift:
      return {nr * (reuse ? 1.0 : 2.0) * (c - 1.0) / p, nr * 6.0 * phi / c};
    case Algorithm::D25DenseRepl: {
      const double spc = std::sqrt(p * c);
      const double sp = std::sqrt(p);
      const double sparse = nr / spc * 6.0 * phi;
      if (reuse) return {nr / spc * (2.0 + std::pow(c, 1.5) / sp - std::sqrt(c) / sp), sparse};
      return {nr / spc * 2.0 + 2.0 * nr * (c - 1.0) / p, sparse};
    }
    case Algorithm::D25SparseRepl: {
      const double sp = std::sqrt(p);
      return {nr / sp * 4.0 / std::sqrt(c), nr / sp * 3.0 * phi * (c - 1.0) / sp};
    }
  }
  return {};
}

inline double model_messages(Algorithm alg, FusionStrategy s, double p, double c) {
  check_strategy(alg, s);
  if (is_15d(alg)) {
    if (s == FusionStrategy::LocalKernelFusion) return p / c + 2.0 * (c - 1.0);
    if (s == FusionStrategy::ReplicationReuse) return 2.0 * p / c + (c - 1.0);
    return 2.0 * p / c + 2.0 * (c - 1.0);
  }
  const double q = std::sqrt(p / c);
  if (alg == Algorithm::D25SparseRepl) return 4.0 * q + 3.0 * (c - 1.0);
  return 4.0 * q + (s == FusionStrategy::ReplicationReuse ? 1.0 : 2.0) * (c - 1.0);
}

/// Minimizer of model_words over real c, clamped to [1, p].
inline double continuous_optimal_c(Algorithm alg, FusionStrategy s, double p, double phi) {
  check_strategy(alg, s);
  double c = 1.0;
  switch (alg) {
    case Algorithm::D15DenseShift:
      if (s == FusionStrategy::LocalKernelFusion) c = std::sqrt(p / 2.0);
      else if (s == FusionStrategy::ReplicationReuse) c = std::sqrt(2.0 * p);
      else c = std::sqrt(p);
      break;
    case Algorithm::D15SparseShift:
      c = std::sqrt((s == FusionStrategy::ReplicationReuse ? 6.0 : 3.0) * p * phi);
      break;
    case Algorithm::D25DenseRepl: {
      const double k = (1.0 + 3.0 * phi) * (1.0 + 3.0 * phi);
      c = std::cbrt(s == FusionStrategy::ReplicationReuse ? p * k : p * k / 4.0);
      break;
    }
    case Algorithm::D25SparseRepl:
      c = phi > 0.0 ? std::cbrt(p) * std::pow(2.0 / (3.0 * phi), 2.0 / 3.0)
                    : std::numeric_limits<double>::infinity();
      break;
  }
  return std::clamp(c, 1.0, p);
}

struct OptimalC {
  double continuous = 1.0;
  int integer = 1;
};

/// Exhaustive argmin of predicted words over the valid replication factors;
/// ties go to the smaller c.
inline OptimalC optimal_c(Algorithm alg, FusionStrategy s, int p, double phi) {
  if (p < 1) throw InvalidReplication("optimal_c: p must be positive");
  if (phi < 0.0) throw DimensionMismatch("optimal_c: phi must be non-negative");
  OptimalC out;
  out.continuous = continuous_optimal_c(alg, s, p, phi);
  double best = std::numeric_limits<double>::infinity();
  for (int c : valid_replication_factors(alg, p)) {
    const double w = model_words(alg, s, p, c, 1.0, 1.0, phi).total();
    if (w < best) {
      best = w;
      out.integer = c;
    }
  }
  return out;
}

inline void check_query(const CostQuery& q) {
  check_strategy(q.alg, q.strategy);
  make_grid(q.alg, q.p, q.c);
  if (q.n <= 0 || q.r <= 0) throw DimensionMismatch("predict: n and r must be positive");
  if (q.phi < 0.0) throw DimensionMismatch("predict: phi must be non-negative");
}

inline CostReport predict(const CostQuery& q) {
  check_query(q);
  const double p = q.p, c = q.c, n = static_cast<double>(q.n), r = static_cast<double>(q.r);
  const WordTerms w = model_words(q.alg, q.strategy, p, c, n, r, q.phi);
  CostReport out;
  out.dense_words = w.dense;
  out.sparse_words = w.sparse;
  out.words = w.total();
  out.messages = model_messages(q.alg, q.strategy, p, c);
  const OptimalC opt = optimal_c(q.alg, q.strategy, q.p, q.phi);
  out.optimal_c_continuous = opt.continuous;
  out.optimal_c_integer = opt.integer;
  const double spc = std::sqrt(p * c), sp = std::sqrt(p), sc = std::sqrt(c);
  switch (q.alg) {
    case Algorithm::D15DenseShift:
      out.local_s = {n * c / p, n / p};
      out.local_b = {n / p, r};
      break;
    case Algorithm::D15SparseShift:
      out.local_s = {n * c / p, n};
      out.local_b = {n, r / p};
      break;
    case Algorithm::D25DenseRepl:
      out.local_s = {n * sc / sp, n / spc};
      out.local_b = {n / spc, r * sc / sp};
      break;
    case Algorithm::D25SparseRepl:
      out.local_s = {n * sc / sp, n * sc / sp};
      out.local_b = {n / spc, r * sc / sp};
      break;
  }
  return out;
}

/// alpha * messages + beta * words, for what-if comparisons.
inline double weighted_cost(const CostReport& r, double alpha, double beta) noexcept {
  return alpha * r.messages + beta * r.words;
}

struct RankedChoice {
  Algorithm alg;
  FusionStrategy strategy;
  int c;
  double words;
};

/// Every valid (algorithm, strategy) at its best integer c, cheapest first.
/// Equal costs keep algorithm declaration order; within one algorithm an
/// eliding strategy precedes no elision.
inline std::vector<RankedChoice> select_algorithm(int p, index_t n, index_t r, index_t nnz) {
  if (p < 1 || n <= 0 || r <= 0 || nnz < 0) throw DimensionMismatch("select_algorithm: invalid sizes");
  const double phi = Phi::of(nnz, n, r).value;
  std::vector<RankedChoice> out;
  for (Algorithm alg : kAllAlgorithms)
    for (FusionStrategy s : kAllStrategies) {
      if (!strategy_valid(alg, s)) continue;
      const int c = optimal_c(alg, s, p, phi).integer;
      out.push_back({alg, s, c, model_words(alg, s, p, c, static_cast<double>(n), static_cast<double>(r), phi).total()});
    }
  auto rank = [](FusionStrategy s) { return s == FusionStrategy::NoElision ? 1 : 0; };
  std::stable_sort(out.begin(), out.end(), [&](const RankedChoice& a, const RankedChoice& b) {
    if (a.words != b.words) return a.words < b.words;
    if (a.alg != b.alg) return a.alg < b.alg;
    return rank(a.strategy) < rank(b.strategy);
  });
  return out;
}

/// Cost of 1.5D dense shifting with replication reuse over no elision, each
/// at its continuous optimum.
inline double elision_ratio(double p) {
  return (1.0 - 2.0 * std::sqrt(2.0 * p)) / (2.0 - 4.0 * std::sqrt(p));
}

}  // namespace dsddmm
