#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsemirror/oracles.hpp"
#include "sparsemirror/prox.hpp"
#include "sparsemirror/sparse_matrix.hpp"

namespace sparsemirror {

/// Maintains k(x) = argmax_k sigma_k(A_k^T x) while x changes a few
/// coordinates at a time. Rows are split into contiguous blocks (one block by
/// default), each with its own max segment tree; ties resolve to the lowest
/// row index. A change of coordinate j costs O(nnz(column j) * log m).
class ArgmaxTracker {
 public:
  ArgmaxTracker(const MaxFormProblem& problem, std::vector<double> x,
                std::span<const std::size_t> boundaries = {},
                std::size_t refresh_period = RowDotCache::kDefaultRefreshPeriod)
      : problem_(&problem), cache_(problem.matrix(), std::move(x), refresh_period) {
    const std::size_t m = problem.rows();
    if (m == 0) throw std::invalid_argument("argmax tracker: no rows");
    if (boundaries.empty()) {
      boundaries_ = {0, m};
    } else {
      boundaries_.assign(boundaries.begin(), boundaries.end());
      if (boundaries_.front() != 0 || boundaries_.back() != m) {
        throw std::invalid_argument("argmax tracker: boundaries must cover [0, m)");
      }
      for (std::size_t b = 1; b < boundaries_.size(); ++b) {
        if (boundaries_[b] <= boundaries_[b - 1]) {
          throw std::invalid_argument("argmax tracker: boundaries must be strictly increasing");
        }
      }
    }
    const std::size_t r = boundaries_.size() - 1;
    capacity_.resize(r);
    base_.resize(r);
    depth_.resize(r);
    std::size_t total = 0;
    for (std::size_t b = 0; b < r; ++b) {
      capacity_[b] = std::bit_ceil(boundaries_[b + 1] - boundaries_[b]);
      depth_[b] = static_cast<std::size_t>(std::countr_zero(capacity_[b]));
      base_[b] = total;
      total += 2 * capacity_[b];
    }
    nodes_.assign(total, RowMax{});
    block_of_row_.resize(m);
    for (std::size_t b = 0; b < r; ++b) {
      for (std::size_t k = boundaries_[b]; k < boundaries_[b + 1]; ++k) block_of_row_[k] = b;
    }
    rebuild();
  }

  const MaxFormProblem& problem() const { return *problem_; }
  const RowDotCache& cache() const { return cache_; }
  std::size_t blocks() const { return capacity_.size(); }

  /// Active row of `block` and its sigma value; O(1).
  RowMax current(std::size_t block = 0) const { return nodes_[base_.at(block) + 1]; }

  /// Cached A_k^T x.
  double row_dot(std::size_t k) const { return cache_.value(k); }
  /// Leaf value sigma_k(A_k^T x).
  double leaf(std::size_t k) const {
    const std::size_t b = block_of_row_.at(k);
    return nodes_[base_[b] + capacity_[b] + (k - boundaries_[b])].value;
  }

  /// Pushes coordinate changes through the row cache and repairs the tree
  /// paths of every affected row. Returns the new maximum of block 0.
  RowMax notify(std::span<const CoordinateDelta> changes) {
    for (const CoordinateDelta& c : changes) {
      const std::size_t refreshes = cache_.refresh_count();
      const std::span<const std::size_t> rows = cache_.apply_sparse_delta(c.index, c.delta);
      if (cache_.refresh_count() != refreshes) {
        rebuild();
        continue;
      }
      for (std::size_t k : rows) update_row(k);
    }
    return current();
  }

  /// Replaces the tracked point and rebuilds every leaf.
  void reset(std::vector<double> x) {
    cache_.reset(std::move(x));
    rebuild();
  }

  /// Rows re-evaluated incrementally (initial build and refreshes excluded).
  std::size_t touched_rows() const { return touched_rows_; }
  /// Internal tree nodes recomputed by incremental updates.
  std::size_t path_updates() const { return path_updates_; }
  /// Full leaf rebuilds (construction, resets and cache refreshes).
  std::size_t full_rebuilds() const { return full_rebuilds_; }
  /// Depth of the deepest block tree, ceil(log2(largest block)).
  std::size_t max_depth() const {
    std::size_t d = 0;
    for (std::size_t v : depth_) d = std::max(d, v);
    return d;
  }

 private:
  static RowMax better(const RowMax& left, const RowMax& right) {
    if (right.row == kNoIndex) return left;
    if (left.row == kNoIndex) return right;
    return left.value >= right.value ? left : right;
  }

  void update_row(std::size_t k) {
    const std::size_t b = block_of_row_[k];
    const std::size_t base = base_[b];
    std::size_t node = capacity_[b] + (k - boundaries_[b]);
    nodes_[base + node] = {k, problem_->function(k).value(cache_.value(k))};
    ++touched_rows_;
    while (node > 1) {
      node /= 2;
      nodes_[base + node] = better(nodes_[base + 2 * node], nodes_[base + 2 * node + 1]);
      ++path_updates_;
    }
  }

  void rebuild() {
    for (std::size_t b = 0; b < capacity_.size(); ++b) {
      const std::size_t base = base_[b];
      const std::size_t cap = capacity_[b];
      for (std::size_t t = 0; t < cap; ++t) {
        const std::size_t k = boundaries_[b] + t;
        nodes_[base + cap + t] =
            k < boundaries_[b + 1] ? RowMax{k, problem_->function(k).value(cache_.value(k))} : RowMax{};
      }
      for (std::size_t node = cap; node-- > 1;) {
        nodes_[base + node] = better(nodes_[base + 2 * node], nodes_[base + 2 * node + 1]);
      }
    }
    ++full_rebuilds_;
  }

  const MaxFormProblem* problem_;
  RowDotCache cache_;
  std::vector<std::size_t> boundaries_;
  std::vector<std::size_t> capacity_;
  std::vector<std::size_t> base_;
  std::vector<std::size_t> depth_;
  std::vector<std::size_t> block_of_row_;
  std::vector<RowMax> nodes_;
  std::size_t touched_rows_ = 0;
  std::size_t path_updates_ = 0;
  std::size_t full_rebuilds_ = 0;
};

/// Two-spike sample at the tracker's current active row.
inline StochGrad maxform_two_spike(const ArgmaxTracker& tracker, UniformStream& rng, std::size_t block = 0) {
  const RowMax top = tracker.current(block);
  return maxform_two_spike(tracker.problem(), top.row, tracker.row_dot(top.row), rng);
}

}  // namespace sparsemirror
