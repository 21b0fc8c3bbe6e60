#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sparsemirror/sparse_matrix.hpp"

namespace sparsemirror {

/// Cumulative-sum binary tree over nonnegative weights. Drawing an element
/// costs one uniform variate and O(log nnz) comparisons.
class WeightTree {
 public:
  WeightTree() = default;

  explicit WeightTree(std::span<const SparseEntry> weights) {
    ids_.reserve(weights.size());
    for (const SparseEntry& w : weights) {
      if (!(w.value >= 0.0) || !std::isfinite(w.value)) {
        throw std::invalid_argument("WeightTree: weight of element " + std::to_string(w.index) +
                                    " must be finite and nonnegative");
      }
      ids_.push_back(w.index);
    }
    leaves_ = ids_.empty() ? 0 : std::bit_ceil(ids_.size());
    sums_.assign(2 * leaves_, 0.0);
    for (std::size_t t = 0; t < weights.size(); ++t) sums_[leaves_ + t] = weights[t].value;
    for (std::size_t node = leaves_; node-- > 1;) sums_[node] = sums_[2 * node] + sums_[2 * node + 1];
  }

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  double total() const { return leaves_ == 0 ? 0.0 : sums_[1]; }
  std::size_t id(std::size_t leaf) const { return ids_.at(leaf); }
  double weight(std::size_t leaf) const { return sums_.at(leaves_ + leaf); }

  /// Descends from the root: left while u*total is below the left subtree
  /// sum, otherwise subtract it and go right. Zero-weight subtrees are never
  /// entered, so the returned element always has positive weight.
  std::size_t sample(double u) const {
    if (!(total() > 0.0)) throw std::domain_error("WeightTree::sample: empty distribution");
    if (!(u >= 0.0 && u < 1.0)) throw std::domain_error("WeightTree::sample: u must lie in [0,1)");
    double target = u * total();
    std::size_t node = 1;
    while (node < leaves_) {
      const double left = sums_[2 * node];
      if (target < left || sums_[2 * node + 1] == 0.0) {
        node = 2 * node;
      } else {
        target -= left;
        node = 2 * node + 1;
      }
    }
    return ids_[node - leaves_];
  }

  /// Stored sum of heap node `node` (1 is the root); exposed for invariant checks.
  double node_sum(std::size_t node) const { return sums_.at(node); }
  std::size_t leaf_capacity() const { return leaves_; }

 private:
  std::vector<std::size_t> ids_;
  std::vector<double> sums_;
  std::size_t leaves_ = 0;
};

inline WeightTree build_weight_tree(std::span<const SparseEntry> weights) { return WeightTree(weights); }

/// The split A_k = A_k^+ - A_k^- of one matrix row, with a sampler for each
/// normalized part.
struct SignedRowSampler {
  WeightTree pos;
  WeightTree neg;
  double l1_pos = 0.0;
  double l1_neg = 0.0;

  explicit SignedRowSampler(SparseView row) {
    SparseVector plus, minus;
    for (std::size_t t = 0; t < row.size(); ++t) {
      const double v = row.values[t];
      if (v > 0.0) {
        plus.push_back({row.indices[t], v});
      } else if (v < 0.0) {
        minus.push_back({row.indices[t], -v});
      }
    }
    pos = WeightTree(plus);
    neg = WeightTree(minus);
    l1_pos = pos.total();
    l1_neg = neg.total();
  }

  double l1() const { return l1_pos + l1_neg; }
};

/// One sampler per row; total work and memory O(nnz(A)).
inline std::vector<SignedRowSampler> build_signed_row_samplers(const SparseMatrixDual& a) {
  std::vector<SignedRowSampler> out;
  out.reserve(a.rows());
  for (std::size_t k = 0; k < a.rows(); ++k) out.emplace_back(a.row(k));
  return out;
}

}  // namespace sparsemirror
