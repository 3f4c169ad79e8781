#include <gtest/gtest.h>

#include <cmath>

#include "dsddmm/algorithms.hpp"
#include "dsddmm/costmodel.hpp"
#include "dsddmm/generate.hpp"

using namespace dsddmm;

namespace {

struct Row {
  Algorithm alg;
  FusionStrategy s;
};

const Row kRows[] = {
    {Algorithm::D15DenseShift, FusionStrategy::NoElision},     {Algorithm::D15DenseShift, FusionStrategy::ReplicationReuse},
    {Algorithm::D15DenseShift, FusionStrategy::LocalKernelFusion}, {Algorithm::D15SparseShift, FusionStrategy::NoElision},
    {Algorithm::D15SparseShift, FusionStrategy::ReplicationReuse}, {Algorithm::D25DenseRepl, FusionStrategy::NoElision},
    {Algorithm::D25DenseRepl, FusionStrategy::ReplicationReuse},   {Algorithm::D25SparseRepl, FusionStrategy::NoElision},
};

// Per-unit-nr word counts, restated from the cost table.
double words_per_nr(Row row, double p, double c, double phi) {
  const bool reuse = row.s == FusionStrategy::ReplicationReuse;
  switch (row.alg) {
    case Algorithm::D15DenseShift:
      if (row.s == FusionStrategy::LocalKernelFusion) return 1 / c + 2 * (c - 1) / p;
      return reuse ? 2 / c + (c - 1) / p : 2 * (c - 1) / p + 2 / c;
    case Algorithm::D15SparseShift:
      return reuse ? (c - 1) / p + 6 * phi / c : 2 * (c - 1) / p + 6 * phi / c;
    case Algorithm::D25DenseRepl:
      if (reuse) return (6 * phi + 2 + std::pow(c, 1.5) / std::sqrt(p) - std::sqrt(c) / std::sqrt(p)) / std::sqrt(p * c);
      return (6 * phi + 2) / std::sqrt(p * c) + 2 * (c - 1) / p;
    case Algorithm::D25SparseRepl:
      return (4 / std::sqrt(c) + 3 * phi * (c - 1) / std::sqrt(p)) / std::sqrt(p);
  }
  return 0;
}

bool square(int v) {
  const int s = static_cast<int>(std::lround(std::sqrt(v)));
  return s * s == v;
}

std::vector<int> candidates(Algorithm alg, int p) {
  std::vector<int> out;
  for (int c = 1; c <= p; ++c)
    if (p % c == 0 && (is_15d(alg) || square(p / c))) out.push_back(c);
  return out;
}

int brute_argmin(Row row, int p, double phi) {
  int best = 0;
  double lo = INFINITY;
  for (int c : candidates(row.alg, p)) {
    const double w = words_per_nr(row, p, c, phi);
    if (w < lo) {
      lo = w;
      best = c;
    }
  }
  return best;
}

}  // namespace

TEST(Predict, TableRowOne) {
  const auto r = predict({Algorithm::D15DenseShift, FusionStrategy::ReplicationReuse, 16, 4, 1024, 256, 0.1});
  EXPECT_DOUBLE_EQ(r.words, 180224);
  EXPECT_DOUBLE_EQ(r.messages, 11);
  EXPECT_DOUBLE_EQ(r.sparse_words, 0);
  const auto f = predict({Algorithm::D15DenseShift, FusionStrategy::LocalKernelFusion, 16, 4, 1024, 256, 0.1});
  EXPECT_DOUBLE_EQ(f.words, 163840);
  EXPECT_DOUBLE_EQ(f.messages, 10);
}

TEST(Predict, DegenerateReplication) {
  const double nr = 1024.0 * 256;
  EXPECT_DOUBLE_EQ(predict({Algorithm::D15DenseShift, FusionStrategy::ReplicationReuse, 16, 1, 1024, 256, 0.1}).words, 2 * nr);
  EXPECT_DOUBLE_EQ(
      predict({Algorithm::D15SparseShift, FusionStrategy::ReplicationReuse, 16, 1, 1024, 256, 0.125}).words, 0.75 * nr);
}

TEST(Predict, AllRowsMatchRestatedFormulas) {
  for (Row row : kRows)
    for (int p : {4, 16, 64})
      for (int c : candidates(row.alg, p))
        for (double phi : {0.0, 0.25, 2.0}) {
          const auto r = predict({row.alg, row.s, p, c, 512, 64, phi});
          EXPECT_NEAR(r.words, 512.0 * 64 * words_per_nr(row, p, c, phi), 1e-6);
        }
}

TEST(Predict, LocalDimensions) {
  const auto d = predict({Algorithm::D15DenseShift, FusionStrategy::NoElision, 16, 4, 1024, 256, 1});
  EXPECT_DOUBLE_EQ(d.local_s.rows, 256);
  EXPECT_DOUBLE_EQ(d.local_s.cols, 64);
  EXPECT_DOUBLE_EQ(d.local_b.rows, 64);
  EXPECT_DOUBLE_EQ(d.local_b.cols, 256);
  const auto s = predict({Algorithm::D25SparseRepl, FusionStrategy::NoElision, 16, 4, 1024, 256, 1});
  EXPECT_DOUBLE_EQ(s.local_s.rows, 512);
  EXPECT_DOUBLE_EQ(s.local_b.rows, 128);
  EXPECT_DOUBLE_EQ(s.local_b.cols, 128);
}

TEST(Predict, Errors) {
  EXPECT_THROW(predict({Algorithm::D25SparseRepl, FusionStrategy::ReplicationReuse, 16, 1, 64, 8, 1}),
               IncompatibleStrategy);
  EXPECT_THROW(predict({Algorithm::D15SparseShift, FusionStrategy::LocalKernelFusion, 16, 1, 64, 8, 1}),
               IncompatibleStrategy);
  EXPECT_THROW(predict({Algorithm::D25DenseRepl, FusionStrategy::NoElision, 8, 4, 64, 8, 1}), InvalidReplication);
  EXPECT_THROW(predict({Algorithm::D15DenseShift, FusionStrategy::NoElision, 8, 2, 64, 8, -1}), DimensionMismatch);
}

TEST(Predict, WeightedCost) {
  const auto r = predict({Algorithm::D15DenseShift, FusionStrategy::ReplicationReuse, 16, 4, 1024, 256, 0.1});
  EXPECT_DOUBLE_EQ(weighted_cost(r, 2.0, 0.5), 22 + 90112);
}

TEST(OptimalC, ClosedForms) {
  EXPECT_DOUBLE_EQ(optimal_c(Algorithm::D15DenseShift, FusionStrategy::NoElision, 16, 1).continuous, 4);
  EXPECT_DOUBLE_EQ(optimal_c(Algorithm::D15DenseShift, FusionStrategy::ReplicationReuse, 8, 1).continuous, 4);
  EXPECT_DOUBLE_EQ(optimal_c(Algorithm::D15DenseShift, FusionStrategy::LocalKernelFusion, 32, 1).continuous, 4);
  EXPECT_NEAR(optimal_c(Algorithm::D15SparseShift, FusionStrategy::ReplicationReuse, 64, 1.0 / 6).continuous, 8, 1e-12);
  EXPECT_NEAR(optimal_c(Algorithm::D15SparseShift, FusionStrategy::NoElision, 48, 1.0 / 9).continuous, 4, 1e-12);
  EXPECT_NEAR(optimal_c(Algorithm::D25DenseRepl, FusionStrategy::ReplicationReuse, 64, 1.0 / 3).continuous,
              std::cbrt(256.0), 1e-12);
  EXPECT_NEAR(optimal_c(Algorithm::D25DenseRepl, FusionStrategy::NoElision, 64, 1.0 / 3).continuous, 4, 1e-12);
  EXPECT_NEAR(optimal_c(Algorithm::D25SparseRepl, FusionStrategy::NoElision, 27, 2.0 / 3).continuous, 3, 1e-12);
}

TEST(OptimalC, ClampsBelowOne) {
  const auto o = optimal_c(Algorithm::D15SparseShift, FusionStrategy::ReplicationReuse, 16, 1e-4);
  EXPECT_DOUBLE_EQ(o.continuous, 1);
  EXPECT_EQ(o.integer, 1);
  EXPECT_DOUBLE_EQ(optimal_c(Algorithm::D25SparseRepl, FusionStrategy::NoElision, 16, 0).continuous, 16);
}

TEST(OptimalC, IntegerMatchesBruteForce) {
  for (Row row : kRows)
    for (int p : {4, 8, 16, 36, 64})
      for (double phi : {1.0 / 32, 1.0 / 8, 1.0 / 3, 1.0, 4.0})
        EXPECT_EQ(optimal_c(row.alg, row.s, p, phi).integer, brute_argmin(row, p, phi))
            << to_string(row.alg) << " " << to_string(row.s) << " p=" << p << " phi=" << phi;
}

TEST(OptimalC, StrategyOrdering) {
  for (int p : {4, 8, 16, 32, 64, 128, 256, 512, 1024}) {
    auto opt = [p](FusionStrategy s) { return optimal_c(Algorithm::D15DenseShift, s, p, 1); };
    const auto f = opt(FusionStrategy::LocalKernelFusion), u = opt(FusionStrategy::NoElision),
               r = opt(FusionStrategy::ReplicationReuse);
    EXPECT_LE(f.continuous, u.continuous);
    EXPECT_LE(u.continuous, r.continuous);
    EXPECT_LE(f.integer, u.integer) << "p=" << p;
    EXPECT_LE(u.integer, r.integer) << "p=" << p;
  }
}

TEST(Select, LowAndHighPhi) {
  const auto low = select_algorithm(64, 1 << 16, 128, 1 << 10);
  EXPECT_EQ(low.front().alg, Algorithm::D15SparseShift);
  EXPECT_EQ(low.front().strategy, FusionStrategy::ReplicationReuse);
  const auto high = select_algorithm(64, 1 << 16, 128, index_t{1} << 23);
  auto pos = [&](Algorithm a) {
    for (std::size_t k = 0; k < high.size(); ++k)
      if (high[k].alg == a) return k;
    return high.size();
  };
  EXPECT_LT(pos(Algorithm::D15DenseShift), pos(Algorithm::D15SparseShift));
  EXPECT_EQ(high.size(), 8u);
  for (std::size_t k = 1; k < high.size(); ++k) EXPECT_LE(high[k - 1].words, high[k].words);
}

TEST(ElisionRatio, Values) {
  EXPECT_NEAR(elision_ratio(4), (1 - 2 * std::sqrt(8.0)) / (2 - 8.0), 1e-15);
  EXPECT_NEAR(elision_ratio(4), 0.7761, 1e-4);
  EXPECT_NEAR(elision_ratio(1 << 20), 0.7072, 1e-4);
  EXPECT_NEAR(elision_ratio(1e12), 1 / std::sqrt(2.0), 1e-5);
  for (double p = 4; p < 1e9; p *= 4) EXPECT_GT(elision_ratio(p), elision_ratio(p * 4));
}

// Dense words are deterministic under divisible dimensions, so the model
// and the fabric counters must agree exactly.
TEST(ModelVsMeasured, DenseWordsAndMessages) {
  const index_t n = 256, r = 32;
  const auto s = erdos_renyi(n, n, 4, 3);
  const auto s_t = transpose(s);
  const auto a = random_dense(n, r, 1), b = random_dense(n, r, 2);
  for (Row row : kRows)
    for (int p : {4, 8, 16})
      for (int c : valid_replication_factors(row.alg, p))
        for (KernelMode m : {KernelMode::FusedMMA, KernelMode::FusedMMB}) {
          const auto br = comm_breakdown(run_fusedmm(row.alg, row.s, m, s, s_t, a, b, p, c).stats);
          const auto pr = predict({row.alg, row.s, p, c, n, r, 0.0});
          EXPECT_NEAR(static_cast<double>(br.dense_words), pr.dense_words, 1e-6)
              << to_string(row.alg) << " " << to_string(row.s) << " p=" << p << " c=" << c;
          EXPECT_NEAR(static_cast<double>(br.messages), pr.messages, 1e-9)
              << to_string(row.alg) << " " << to_string(row.s) << " p=" << p << " c=" << c << " messages";
        }
}
