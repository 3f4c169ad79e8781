#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dsddmm/generate.hpp"
#include "dsddmm/kernels.hpp"
#include "dsddmm/matrix.hpp"
#include "dsddmm/matrix_market.hpp"

using namespace dsddmm;

namespace {

// Brute-force oracles over a dense expansion of S.
DenseMatrix dense_ab_t(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows(), b.rows());
  for (index_t i = 0; i < a.rows(); ++i)
    for (index_t j = 0; j < b.rows(); ++j) {
      double acc = 0.0;
      for (index_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(j, k);
      out(i, j) = acc;
    }
  return out;
}

DenseMatrix dense_mul(const DenseMatrix& x, const DenseMatrix& y) {
  DenseMatrix out(x.rows(), y.cols());
  for (index_t i = 0; i < x.rows(); ++i)
    for (index_t k = 0; k < x.cols(); ++k)
      for (index_t j = 0; j < y.cols(); ++j) out(i, j) += x(i, k) * y(k, j);
  return out;
}

DenseMatrix dense_t(const DenseMatrix& x) {
  DenseMatrix out(x.cols(), x.rows());
  for (index_t i = 0; i < x.rows(); ++i)
    for (index_t j = 0; j < x.cols(); ++j) out(j, i) = x(i, j);
  return out;
}

void expect_close(const DenseMatrix& got, const DenseMatrix& want, double rel) {
  ASSERT_EQ(got.rows(), want.rows());
  ASSERT_EQ(got.cols(), want.cols());
  for (index_t i = 0; i < got.rows(); ++i)
    for (index_t j = 0; j < got.cols(); ++j)
      EXPECT_NEAR(got(i, j), want(i, j), rel * std::max(1.0, std::abs(want(i, j)))) << i << "," << j;
}

SparseMatrix example_s() { return SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {1, 0, 2.0}, {1, 1, 3.0}}); }
DenseMatrix example_a() { return DenseMatrix::from_rows({{1, 2}, {3, 4}}); }
DenseMatrix example_b() { return DenseMatrix::from_rows({{5, 6}, {7, 8}}); }

}  // namespace

TEST(SparseMatrix, FromTripletsSortsAndRejectsDuplicates) {
  const auto s = SparseMatrix::from_triplets(3, 3, {{2, 1, 1.0}, {0, 2, 2.0}, {0, 0, 3.0}});
  EXPECT_EQ(s.nnz(), 3);
  EXPECT_EQ(s.row_indices()[0], 0);
  EXPECT_EQ(s.col_indices()[0], 0);
  EXPECT_EQ(s.col_indices()[1], 2);
  EXPECT_THROW(SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}}), DimensionMismatch);
  EXPECT_THROW(SparseMatrix::from_triplets(2, 2, {{2, 0, 1.0}}), DimensionMismatch);
}

TEST(SparseMatrix, CsrRowPointers) {
  const auto s = example_s().to_csr();
  EXPECT_EQ(s.form(), StorageForm::CSR);
  ASSERT_EQ(s.row_pointers().size(), 3u);
  EXPECT_EQ(s.row_pointers()[0], 0);
  EXPECT_EQ(s.row_pointers()[1], 1);
  EXPECT_EQ(s.row_pointers()[2], 3);
  EXPECT_EQ(s.to_coo(), example_s());
}

TEST(Sddmm, HandExample) {
  const auto out = sddmm(example_a(), example_b(), example_s());
  ASSERT_TRUE(out.same_pattern(example_s()));
  EXPECT_DOUBLE_EQ(out.values()[0], 17.0);
  EXPECT_DOUBLE_EQ(out.values()[1], 78.0);
  EXPECT_DOUBLE_EQ(out.values()[2], 159.0);
}

TEST(Sddmm, EmptyMaskAndOnes) {
  const SparseMatrix empty(3, 5);
  EXPECT_EQ(sddmm(DenseMatrix(3, 4, 1.0), DenseMatrix(5, 4, 1.0), empty).nnz(), 0);
  auto ones = erdos_renyi(6, 6, 3, 1);
  ones = ones.with_values(std::vector<double>(static_cast<std::size_t>(ones.nnz()), 1.0));
  const auto out = sddmm(DenseMatrix(6, 4, 1.0), DenseMatrix(6, 4, 1.0), ones);
  for (double v : out.values()) EXPECT_DOUBLE_EQ(v, 4.0);
}

TEST(Sddmm, MatchesDenseOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = erdos_renyi(40, 56, 7, seed);
    const auto a = random_dense(40, 9, seed + 100);
    const auto b = random_dense(56, 9, seed + 200);
    const auto out = sddmm(a, b, s);
    ASSERT_TRUE(out.same_pattern(s));
    const DenseMatrix full = dense_ab_t(a, b);
    for (index_t k = 0; k < s.nnz(); ++k) {
      const double want = s.values()[k] * full(s.row_indices()[k], s.col_indices()[k]);
      EXPECT_NEAR(out.values()[k], want, 1e-13 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST(Sddmm, DimensionErrorsNameOperand) {
  try {
    sddmm(DenseMatrix(3, 2), DenseMatrix(2, 2), example_s());
    FAIL();
  } catch (const DimensionMismatch& e) {
    EXPECT_EQ(std::string(e.what()).rfind("A:", 0), 0u);
  }
  try {
    sddmm(DenseMatrix(2, 2), DenseMatrix(2, 3), example_s());
    FAIL();
  } catch (const DimensionMismatch& e) {
    EXPECT_EQ(std::string(e.what()).rfind("B:", 0), 0u);
  }
}

TEST(Spmm, HandExamples) {
  expect_close(spmm_a(example_s(), example_b()), DenseMatrix::from_rows({{5, 6}, {31, 36}}), 0.0);
  expect_close(spmm_b(example_s(), example_a()), DenseMatrix::from_rows({{7, 10}, {9, 12}}), 0.0);
}

TEST(Spmm, IdentityAndZero) {
  const auto b = random_dense(12, 5, 3);
  EXPECT_EQ(spmm_a(SparseMatrix::identity(12), b), b);
  EXPECT_EQ(spmm_b(SparseMatrix::identity(12), b), b);
  EXPECT_EQ(spmm_a(SparseMatrix(7, 12), b), DenseMatrix(7, 5));
}

TEST(Spmm, MatchesDenseOracleAndTransposeIdentity) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto s = erdos_renyi(30, 44, 6, seed);
    const auto b = random_dense(44, 7, seed + 1);
    const auto a = random_dense(30, 7, seed + 2);
    expect_close(spmm_a(s, b), dense_mul(to_dense(s), b), 1e-13);
    expect_close(spmm_b(s, a), dense_mul(dense_t(to_dense(s)), a), 1e-13);
    EXPECT_EQ(spmm_b(s, a), spmm_a(transpose(s), a));
  }
}

TEST(FusedMM, HandExample) {
  expect_close(fusedmm_local(KernelMode::FusedMMA, example_s(), example_a(), example_b()),
               DenseMatrix::from_rows({{85, 102}, {1503, 1740}}), 0.0);
}

TEST(FusedMM, EqualsComposition) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = erdos_renyi(64, 64, 5, seed);
    const auto a = random_dense(64, 8, seed + 7);
    const auto b = random_dense(64, 8, seed + 9);
    const auto r = sddmm(a, b, s);
    expect_close(fusedmm_local(KernelMode::FusedMMA, s, a, b), spmm_a(r, b), 1e-12);
    expect_close(fusedmm_local(KernelMode::FusedMMB, s, a, b), spmm_b(r, a), 1e-12);
  }
}

TEST(FusedMM, RejectsNonFusedModeAndEmptyMask) {
  EXPECT_THROW(fusedmm_local(KernelMode::SpMMA, example_s(), example_a(), example_b()), IncompatibleStrategy);
  EXPECT_EQ(fusedmm_local(KernelMode::FusedMMB, SparseMatrix(2, 2), example_a(), example_b()), DenseMatrix(2, 2));
}

TEST(SddmmConcat, HandExampleAndZeroWeights) {
  const auto s = SparseMatrix::from_triplets(1, 1, {{0, 0, 1.0}});
  const std::vector<double> w{5.0, 7.0};
  EXPECT_DOUBLE_EQ(sddmm_concat(DenseMatrix(1, 1, 2.0), DenseMatrix(1, 1, 3.0), s, w).values()[0], 31.0);
  const auto z = sddmm_concat(example_a(), example_b(), example_s(), std::vector<double>(4, 0.0));
  ASSERT_TRUE(z.same_pattern(example_s()));
  for (double v : z.values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(sddmm_concat(example_a(), example_b(), example_s(), w), DimensionMismatch);
}

TEST(SddmmConcat, MatchesBruteForce) {
  const auto s = erdos_renyi(16, 16, 5, 4);
  const auto a = random_dense(16, 4, 5);
  const auto b = random_dense(16, 4, 6);
  const auto w = random_dense(1, 8, 7);
  const std::vector<double> wv(w.data().begin(), w.data().end());
  const auto out = sddmm_concat(a, b, s, wv);
  const DenseMatrix sd = to_dense(s);
  for (index_t k = 0; k < s.nnz(); ++k) {
    const index_t i = s.row_indices()[k], j = s.col_indices()[k];
    double x = 0.0;
    for (index_t t = 0; t < 4; ++t) x += wv[static_cast<std::size_t>(t)] * a(i, t) + wv[static_cast<std::size_t>(4 + t)] * b(j, t);
    EXPECT_NEAR(out.values()[k], sd(i, j) * x, 1e-13);
  }
}

TEST(Transpose, InvolutionAndSwap) {
  const auto s = erdos_renyi(20, 30, 4, 2);
  EXPECT_EQ(transpose(transpose(s)), s);
  EXPECT_EQ(transpose(SparseMatrix::identity(5)), SparseMatrix::identity(5));
  const auto t = transpose(SparseMatrix::from_triplets(2, 2, {{1, 0, 2.0}}));
  EXPECT_EQ(t, SparseMatrix::from_triplets(2, 2, {{0, 1, 2.0}}));
}

TEST(OpCounter, SddmmAndSpmmTouchSameWork) {
  auto s = erdos_renyi(25, 25, 4, 11);
  s = s.with_values(std::vector<double>(static_cast<std::size_t>(s.nnz()), 1.0));
  const auto a = random_dense(25, 6, 1);
  const auto b = random_dense(25, 6, 2);
  OpCounter x, y;
  sddmm(a, b, s, &x);
  spmm_a(s, b, &y);
  EXPECT_EQ(x.fma, static_cast<std::uint64_t>(s.nnz() * 6));
  EXPECT_EQ(y.fma, x.fma);
}

TEST(Generate, ErdosRenyiCountsAndDeterminism) {
  const auto s = erdos_renyi(50, 40, 7, 99);
  EXPECT_EQ(s.nnz(), 350);
  EXPECT_EQ(erdos_renyi(50, 40, 7, 99), s);
  const auto full = erdos_renyi(4, 6, 6, 1);
  EXPECT_EQ(full.nnz(), 24);
  for (double v : s.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_THROW(erdos_renyi(3, 4, 5, 0), DimensionMismatch);
}

TEST(Generate, LargeCount) { EXPECT_EQ(erdos_renyi(65536, 65536, 32, 7).nnz(), 2097152); }

TEST(Generate, RandomPermuteRoundTrip) {
  const auto s = erdos_renyi(30, 20, 4, 5);
  const auto pm = random_permute(s, 17);
  EXPECT_EQ(pm.matrix.nnz(), s.nnz());
  EXPECT_EQ(permute(pm.matrix, inverse(pm.row_perm), inverse(pm.col_perm)), s);
  EXPECT_EQ(random_permute(s, 17).matrix, pm.matrix);

  const auto p3 = random_permute(example_s(), 3).matrix;
  std::vector<double> v(p3.values().begin(), p3.values().end());
  std::sort(v.begin(), v.end());
  EXPECT_EQ(v, (std::vector<double>{1.0, 2.0, 3.0}));
}

TEST(MatrixMarket, RoundTrip) {
  const auto s = erdos_renyi(17, 23, 5, 8);
  std::stringstream ss;
  write_matrix_market(s, ss);
  EXPECT_EQ(read_matrix_market(ss), s);
}

TEST(MatrixMarket, OneBasedAndSymmetric) {
  std::istringstream one("%%MatrixMarket matrix coordinate real general\n% c\n3 3 1\n2 3 4.5\n");
  const auto s = read_matrix_market(one);
  EXPECT_EQ(s, SparseMatrix::from_triplets(3, 3, {{1, 2, 4.5}}));
  std::istringstream sym("%%MatrixMarket matrix coordinate pattern symmetric\n3 3 2\n1 1\n3 1\n");
  EXPECT_EQ(read_matrix_market(sym), SparseMatrix::from_triplets(3, 3, {{0, 0, 1}, {2, 0, 1}, {0, 2, 1}}));
}

TEST(MatrixMarket, FormatGateAndLineNumbers) {
  std::istringstream arr("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n");
  EXPECT_THROW(read_matrix_market(arr), ParseError);
  std::istringstream bad("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n1 x\n");
  try {
    read_matrix_market(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4);
  }
}

TEST(Phi, Definition) {
  EXPECT_DOUBLE_EQ(Phi::of(32, 16, 4).value, 0.5);
  EXPECT_DOUBLE_EQ(Phi::of(example_s(), 3).value, 0.5);
}
