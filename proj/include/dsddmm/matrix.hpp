#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dsddmm/error.hpp"

namespace dsddmm {

using index_t = std::int64_t;

// =============================================================================
// Dense storage
// =============================================================================

/// Non-owning row-major view. Rows are contiguous with stride == cols.
template <typename T>
struct BasicDenseView {
  T* data = nullptr;
  index_t rows = 0;
  index_t cols = 0;

  T* row(index_t i) const noexcept { return data + i * cols; }
  T& operator()(index_t i, index_t j) const noexcept { return data[i * cols + j]; }

  /// Rows [begin, begin + count).
  BasicDenseView row_range(index_t begin, index_t count) const noexcept {
    return {data + begin * cols, count, cols};
  }

  operator BasicDenseView<const T>() const noexcept { return {data, rows, cols}; }
};

using DenseView = BasicDenseView<double>;
using ConstDenseView = BasicDenseView<const double>;

/// Row-major dense matrix of 64-bit reals.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(index_t rows, index_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows * cols), fill) {
    if (rows < 0 || cols < 0) throw DimensionMismatch("DenseMatrix: negative dimension");
  }
  DenseMatrix(index_t rows, index_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (static_cast<index_t>(data_.size()) != rows * cols)
      throw DimensionMismatch("DenseMatrix: data length " + std::to_string(data_.size()) +
                              " != " + std::to_string(rows) + "x" + std::to_string(cols));
  }

  /// Builds from nested rows; every row must have the same length.
  static DenseMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    const index_t m = static_cast<index_t>(rows.size());
    const index_t n = m == 0 ? 0 : static_cast<index_t>(rows.front().size());
    DenseMatrix out(m, n);
    for (index_t i = 0; i < m; ++i) {
      if (static_cast<index_t>(rows[i].size()) != n)
        throw DimensionMismatch("DenseMatrix::from_rows: ragged input");
      std::copy(rows[i].begin(), rows[i].end(), out.row(i).begin());
    }
    return out;
  }

  index_t rows() const noexcept { return rows_; }
  index_t cols() const noexcept { return cols_; }
  index_t size() const noexcept { return rows_ * cols_; }

  double& operator()(index_t i, index_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(index_t i, index_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> row(index_t i) noexcept { return {data_.data() + i * cols_, static_cast<std::size_t>(cols_)}; }
  std::span<const double> row(index_t i) const noexcept {
    return {data_.data() + i * cols_, static_cast<std::size_t>(cols_)};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }

  DenseView view() noexcept { return {data_.data(), rows_, cols_}; }
  ConstDenseView view() const noexcept { return {data_.data(), rows_, cols_}; }

  /// Copy of rows [begin, begin + count) and columns [col_begin, col_begin + col_count).
  DenseMatrix block(index_t begin, index_t count, index_t col_begin, index_t col_count) const {
    DenseMatrix out(count, col_count);
    for (index_t i = 0; i < count; ++i) {
      const double* src = data_.data() + (begin + i) * cols_ + col_begin;
      std::copy(src, src + col_count, out.row(i).begin());
    }
    return out;
  }

  void set_block(index_t row_begin, index_t col_begin, const DenseMatrix& src) {
    for (index_t i = 0; i < src.rows(); ++i) {
      auto r = src.row(i);
      std::copy(r.begin(), r.end(), data_.begin() + (row_begin + i) * cols_ + col_begin);
    }
  }

  bool operator==(const DenseMatrix&) const = default;

 private:
  index_t rows_ = 0;
  index_t cols_ = 0;
  std::vector<double> data_;
};

// =============================================================================
// Sparse storage
// =============================================================================

enum class StorageForm { COO, CSR };

struct Triplet {
  index_t row;
  index_t col;
  double value;
};

/// Sparse matrix kept as lexicographically sorted, duplicate-free COO.
/// The CSR form adds a row-pointer array over the same coordinate order.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(index_t rows, index_t cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw DimensionMismatch("SparseMatrix: negative dimension");
  }

  /// Sorts the triplets; duplicate coordinates and out-of-range entries are errors.
  static SparseMatrix from_triplets(index_t rows, index_t cols, std::vector<Triplet> entries) {
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseMatrix out(rows, cols);
    out.row_idx_.reserve(entries.size());
    out.col_idx_.reserve(entries.size());
    out.values_.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto& e = entries[k];
      if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols)
        throw DimensionMismatch("SparseMatrix: entry (" + std::to_string(e.row) + "," +
                                std::to_string(e.col) + ") outside " + std::to_string(rows) + "x" +
                                std::to_string(cols));
      if (k > 0 && entries[k - 1].row == e.row && entries[k - 1].col == e.col)
        throw DimensionMismatch("SparseMatrix: duplicate entry (" + std::to_string(e.row) + "," +
                                std::to_string(e.col) + ")");
      out.row_idx_.push_back(e.row);
      out.col_idx_.push_back(e.col);
      out.values_.push_back(e.value);
    }
    return out;
  }

  /// Takes ownership of coordinate arrays that must already be sorted and unique.
  static SparseMatrix from_sorted(index_t rows, index_t cols, std::vector<index_t> row_idx,
                                  std::vector<index_t> col_idx, std::vector<double> values) {
    SparseMatrix out(rows, cols);
    out.row_idx_ = std::move(row_idx);
    out.col_idx_ = std::move(col_idx);
    out.values_ = std::move(values);
    out.validate();
    return out;
  }

  static SparseMatrix identity(index_t n) {
    std::vector<index_t> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), index_t{0});
    return from_sorted(n, n, idx, idx, std::vector<double>(static_cast<std::size_t>(n), 1.0));
  }

  index_t rows() const noexcept { return rows_; }
  index_t cols() const noexcept { return cols_; }
  index_t nnz() const noexcept { return static_cast<index_t>(values_.size()); }
  StorageForm form() const noexcept { return row_ptr_.empty() ? StorageForm::COO : StorageForm::CSR; }

  std::span<const index_t> row_indices() const noexcept { return row_idx_; }
  std::span<const index_t> col_indices() const noexcept { return col_idx_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  std::span<const index_t> row_pointers() const noexcept { return row_ptr_; }

  /// Same pattern, new values.
  SparseMatrix with_values(std::vector<double> values) const {
    if (values.size() != values_.size())
      throw DimensionMismatch("SparseMatrix::with_values: expected " + std::to_string(values_.size()) +
                              " values, got " + std::to_string(values.size()));
    SparseMatrix out = *this;
    out.values_ = std::move(values);
    return out;
  }

  SparseMatrix to_csr() const {
    SparseMatrix out = *this;
    out.row_ptr_.assign(static_cast<std::size_t>(rows_ + 1), 0);
    for (index_t r : row_idx_) ++out.row_ptr_[static_cast<std::size_t>(r + 1)];
    std::partial_sum(out.row_ptr_.begin(), out.row_ptr_.end(), out.row_ptr_.begin());
    return out;
  }

  SparseMatrix to_coo() const {
    SparseMatrix out = *this;
    out.row_ptr_.clear();
    return out;
  }

  bool same_pattern(const SparseMatrix& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_ && row_idx_ == other.row_idx_ &&
           col_idx_ == other.col_idx_;
  }

  /// Equality of dimensions, coordinates and values (storage form is ignored).
  bool operator==(const SparseMatrix& other) const noexcept {
    return same_pattern(other) && values_ == other.values_;
  }

  std::vector<Triplet> triplets() const {
    std::vector<Triplet> out;
    out.reserve(values_.size());
    for (std::size_t k = 0; k < values_.size(); ++k) out.push_back({row_idx_[k], col_idx_[k], values_[k]});
    return out;
  }

 private:
  void validate() const {
    if (row_idx_.size() != col_idx_.size() || row_idx_.size() != values_.size())
      throw DimensionMismatch("SparseMatrix: coordinate and value arrays differ in length");
    for (std::size_t k = 0; k < row_idx_.size(); ++k) {
      if (row_idx_[k] < 0 || row_idx_[k] >= rows_ || col_idx_[k] < 0 || col_idx_[k] >= cols_)
        throw DimensionMismatch("SparseMatrix: coordinate out of range");
      if (k > 0) {
        const bool ordered = row_idx_[k - 1] < row_idx_[k] ||
                             (row_idx_[k - 1] == row_idx_[k] && col_idx_[k - 1] < col_idx_[k]);
        if (!ordered) throw DimensionMismatch("SparseMatrix: coordinates not sorted or not unique");
      }
    }
  }

  index_t rows_ = 0;
  index_t cols_ = 0;
  std::vector<index_t> row_idx_;
  std::vector<index_t> col_idx_;
  std::vector<double> values_;
  std::vector<index_t> row_ptr_;
};

// =============================================================================
// Kernel vocabulary
// =============================================================================

enum class KernelMode { SDDMM, SpMMA, SpMMB, FusedMMA, FusedMMB };

inline constexpr std::string_view to_string(KernelMode m) noexcept {
  switch (m) {
    case KernelMode::SDDMM: return "sddmm";
    case KernelMode::SpMMA: return "spmma";
    case KernelMode::SpMMB: return "spmmb";
    case KernelMode::FusedMMA: return "fusedmma";
    case KernelMode::FusedMMB: return "fusedmmb";
  }
  return "?";
}

inline bool is_fused(KernelMode m) noexcept { return m == KernelMode::FusedMMA || m == KernelMode::FusedMMB; }

/// nnz(S) / (n * r), with n the column count of S and r the embedding width.
struct Phi {
  double value = 0.0;

  static Phi of(index_t nnz, index_t n, index_t r) {
    if (n <= 0 || r <= 0) throw DimensionMismatch("Phi: n and r must be positive");
    return {static_cast<double>(nnz) / (static_cast<double>(n) * static_cast<double>(r))};
  }
  static Phi of(const SparseMatrix& s, index_t r) { return of(s.nnz(), s.cols(), r); }
};

}  // namespace dsddmm
