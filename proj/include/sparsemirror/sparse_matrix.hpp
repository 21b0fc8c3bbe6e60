#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparsemirror {

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// One entry of a sparse vector; vectors are kept as index-sorted lists.
struct SparseEntry {
  std::size_t index;
  double value;
};

using SparseVector = std::vector<SparseEntry>;

/// A compressed row or column: parallel index/value spans.
struct SparseView {
  std::span<const std::size_t> indices;
  std::span<const double> values;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
};

/// Sparse m x n matrix held twice: compressed rows for dot products and
/// compressed columns for propagating coordinate changes. Immutable after
/// construction.
class SparseMatrixDual {
 public:
  SparseMatrixDual() = default;

  /// Builds both views. Explicit zeros are dropped; duplicate coordinates and
  /// out-of-range indices are rejected.
  static SparseMatrixDual from_triplets(std::span<const Triplet> triplets, std::size_t m,
                                        std::size_t n) {
    SparseMatrixDual a;
    a.m_ = m;
    a.n_ = n;
    std::vector<Triplet> entries;
    entries.reserve(triplets.size());
    for (std::size_t t = 0; t < triplets.size(); ++t) {
      const Triplet& e = triplets[t];
      if (e.row >= m || e.col >= n) {
        throw std::out_of_range("triplet " + std::to_string(t) + " at (" +
                                std::to_string(e.row) + ", " + std::to_string(e.col) +
                                ") outside " + std::to_string(m) + "x" + std::to_string(n));
      }
      if (!std::isfinite(e.value)) {
        throw std::invalid_argument("triplet " + std::to_string(t) + " has a non-finite value");
      }
      if (e.value != 0.0) entries.push_back(e);
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& l, const Triplet& r) {
      return l.row != r.row ? l.row < r.row : l.col < r.col;
    });
    for (std::size_t t = 1; t < entries.size(); ++t) {
      if (entries[t].row == entries[t - 1].row && entries[t].col == entries[t - 1].col) {
        throw std::invalid_argument("duplicate entry at (" + std::to_string(entries[t].row) +
                                    ", " + std::to_string(entries[t].col) + ")");
      }
    }

    const std::size_t nnz = entries.size();
    a.row_start_.assign(m + 1, 0);
    a.col_start_.assign(n + 1, 0);
    for (const Triplet& e : entries) {
      ++a.row_start_[e.row + 1];
      ++a.col_start_[e.col + 1];
    }
    for (std::size_t k = 0; k < m; ++k) {
      a.max_row_nnz_ = std::max(a.max_row_nnz_, a.row_start_[k + 1]);
      a.row_start_[k + 1] += a.row_start_[k];
    }
    for (std::size_t j = 0; j < n; ++j) {
      a.max_col_nnz_ = std::max(a.max_col_nnz_, a.col_start_[j + 1]);
      a.col_start_[j + 1] += a.col_start_[j];
    }

    a.row_index_.resize(nnz);
    a.row_value_.resize(nnz);
    a.col_index_.resize(nnz);
    a.col_value_.resize(nnz);
    std::vector<std::size_t> col_fill(a.col_start_.begin(), a.col_start_.end() - 1);
    // entries are row-major sorted, so each column receives rows in increasing order
    for (std::size_t t = 0; t < nnz; ++t) {
      const Triplet& e = entries[t];
      a.row_index_[t] = e.col;
      a.row_value_[t] = e.value;
      const std::size_t slot = col_fill[e.col]++;
      a.col_index_[slot] = e.row;
      a.col_value_[slot] = e.value;
    }
    return a;
  }

  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }
  std::size_t nnz() const { return row_index_.size(); }
  /// s_n: largest number of nonzeros in a row.
  std::size_t max_row_nnz() const { return max_row_nnz_; }
  /// s_m: largest number of nonzeros in a column.
  std::size_t max_col_nnz() const { return max_col_nnz_; }

  SparseView row(std::size_t k) const {
    check_row(k);
    const std::size_t b = row_start_[k], e = row_start_[k + 1];
    return {std::span(row_index_).subspan(b, e - b), std::span(row_value_).subspan(b, e - b)};
  }

  SparseView col(std::size_t j) const {
    check_col(j);
    const std::size_t b = col_start_[j], e = col_start_[j + 1];
    return {std::span(col_index_).subspan(b, e - b), std::span(col_value_).subspan(b, e - b)};
  }

  /// <A_k, x> in O(nnz(row k)).
  double row_dot(std::size_t k, std::span<const double> x) const {
    check_row(k);
    if (x.size() != n_) {
      throw std::invalid_argument("row_dot: vector length " + std::to_string(x.size()) +
                                  " does not match column count " + std::to_string(n_));
    }
    double s = 0.0;
    for (std::size_t t = row_start_[k]; t < row_start_[k + 1]; ++t) {
      s += row_value_[t] * x[row_index_[t]];
    }
    return s;
  }

  /// All stored entries in row-major order.
  std::vector<Triplet> triplets() const {
    std::vector<Triplet> out;
    out.reserve(nnz());
    for (std::size_t k = 0; k < m_; ++k) {
      for (std::size_t t = row_start_[k]; t < row_start_[k + 1]; ++t) {
        out.push_back({k, row_index_[t], row_value_[t]});
      }
    }
    return out;
  }

  /// Same triplets, gathered from the column view in row-major order.
  std::vector<Triplet> triplets_from_columns() const {
    std::vector<Triplet> out;
    out.reserve(nnz());
    for (std::size_t j = 0; j < n_; ++j) {
      for (std::size_t t = col_start_[j]; t < col_start_[j + 1]; ++t) {
        out.push_back({col_index_[t], j, col_value_[t]});
      }
    }
    std::sort(out.begin(), out.end(), [](const Triplet& l, const Triplet& r) {
      return l.row != r.row ? l.row < r.row : l.col < r.col;
    });
    return out;
  }

  SparseMatrixDual transposed() const {
    std::vector<Triplet> t = triplets();
    for (Triplet& e : t) std::swap(e.row, e.col);
    return from_triplets(t, n_, m_);
  }

 private:
  void check_row(std::size_t k) const {
    if (k >= m_) {
      throw std::out_of_range("row " + std::to_string(k) + " out of range (" +
                              std::to_string(m_) + " rows)");
    }
  }
  void check_col(std::size_t j) const {
    if (j >= n_) {
      throw std::out_of_range("column " + std::to_string(j) + " out of range (" +
                              std::to_string(n_) + " columns)");
    }
  }

  std::size_t m_ = 0;
  std::size_t n_ = 0;
  std::size_t max_row_nnz_ = 0;
  std::size_t max_col_nnz_ = 0;
  std::vector<std::size_t> row_start_{0};
  std::vector<std::size_t> row_index_;
  std::vector<double> row_value_;
  std::vector<std::size_t> col_start_{0};
  std::vector<std::size_t> col_index_;
  std::vector<double> col_value_;
};

/// Cached row products <A_k, x> for a point x that changes a few coordinates
/// at a time. The cache owns its copy of x so it can recompute from scratch.
class RowDotCache {
 public:
  static constexpr std::size_t kDefaultRefreshPeriod = 10000;

  RowDotCache(const SparseMatrixDual& a, std::vector<double> x,
              std::size_t refresh_period = kDefaultRefreshPeriod)
      : a_(&a), x_(std::move(x)), refresh_period_(refresh_period) {
    if (x_.size() != a.cols()) {
      throw std::invalid_argument("RowDotCache: point has " + std::to_string(x_.size()) +
                                  " coordinates, matrix has " + std::to_string(a.cols()) +
                                  " columns");
    }
    if (refresh_period_ == 0) throw std::invalid_argument("RowDotCache: refresh period must be positive");
    values_.resize(a.rows());
    recompute();
  }

  const SparseMatrixDual& matrix() const { return *a_; }
  std::span<const double> values() const { return values_; }
  double value(std::size_t k) const { return values_.at(k); }
  std::span<const double> point() const { return x_; }

  /// x_j += delta and every row with A_kj != 0 absorbs A_kj * delta. Returns
  /// the affected rows. May trigger a full recomputation afterwards, which
  /// callers detect through refresh_count().
  std::span<const std::size_t> apply_sparse_delta(std::size_t j, double delta) {
    const SparseView column = a_->col(j);
    x_[j] += delta;
    for (std::size_t t = 0; t < column.size(); ++t) {
      values_[column.indices[t]] += column.values[t] * delta;
    }
    touched_rows_ += column.size();
    if (++updates_since_refresh_ >= refresh_period_) refresh();
    return column.indices;
  }

  /// Replaces the tracked point wholesale and recomputes every row.
  void reset(std::vector<double> x) {
    if (x.size() != x_.size()) throw std::invalid_argument("RowDotCache::reset: dimension mismatch");
    x_ = std::move(x);
    refresh();
  }

  void refresh() {
    recompute();
    ++refresh_count_;
  }

  std::size_t refresh_period() const { return refresh_period_; }
  std::size_t updates_since_refresh() const { return updates_since_refresh_; }
  std::size_t refresh_count() const { return refresh_count_; }
  /// Rows updated incrementally since construction (full refreshes excluded).
  std::size_t touched_rows() const { return touched_rows_; }

 private:
  void recompute() {
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] = a_->row_dot(k, x_);
    updates_since_refresh_ = 0;
  }

  const SparseMatrixDual* a_;
  std::vector<double> x_;
  std::vector<double> values_;
  std::size_t refresh_period_;
  std::size_t updates_since_refresh_ = 0;
  std::size_t refresh_count_ = 0;
  std::size_t touched_rows_ = 0;
};

}  // namespace sparsemirror
