#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsemirror/oracles.hpp"

namespace sparsemirror {

// Exact expectations of the stochastic oracles, by enumerating every
// outcome of every draw with its probability. Only sensible for small
// instances; used to certify unbiasedness.

namespace detail {

inline void accumulate(std::vector<double>& acc, const StochGrad& g, double p) {
  for (const SparseEntry& e : g.entries) acc.at(e.index) += p * e.value;
}

}  // namespace detail

/// E over xi ~ x, j ~ P[xi, .] of the double-sample gradient.
inline std::vector<double> expected_double_sample(const PageRankProblem& problem, std::span<const double> x) {
  std::vector<double> acc(problem.dimension(), 0.0);
  for (std::size_t xi = 0; xi < x.size(); ++xi) {
    if (x[xi] <= 0.0) continue;
    const SparseView row = problem.transition().row(xi);
    for (std::size_t t = 0; t < row.size(); ++t) {
      detail::accumulate(acc, double_sample_gradient(problem, xi, row.indices[t]), x[xi] * row.values[t]);
    }
  }
  return acc;
}

/// E over xi uniform of n (A_xi^T x) A_xi.
inline std::vector<double> expected_sum_randomization(const PageRankProblem& problem, std::span<const double> x) {
  const std::size_t n = problem.dimension();
  std::vector<double> acc(n, 0.0);
  for (std::size_t xi = 0; xi < n; ++xi) {
    detail::accumulate(acc, sum_randomization_gradient(problem, xi, problem.system().row_dot(xi, x)),
                       1.0 / static_cast<double>(n));
  }
  return acc;
}

/// E over both spikes of the two-spike sample at row k.
inline std::vector<double> expected_two_spike(const MaxFormProblem& problem, std::size_t k, double row_value) {
  std::vector<double> acc(problem.dimension(), 0.0);
  const double s = problem.function(k).derivative(row_value);
  const SignedRowSampler& row = problem.sampler(k);
  std::vector<std::pair<std::size_t, double>> pos, neg;
  if (row.l1_pos > 0.0) {
    for (std::size_t t = 0; t < row.pos.size(); ++t) pos.emplace_back(row.pos.id(t), row.pos.weight(t) / row.l1_pos);
  } else {
    pos.emplace_back(kNoIndex, 1.0);
  }
  if (row.l1_neg > 0.0) {
    for (std::size_t t = 0; t < row.neg.size(); ++t) neg.emplace_back(row.neg.id(t), row.neg.weight(t) / row.l1_neg);
  } else {
    neg.emplace_back(kNoIndex, 1.0);
  }
  for (const auto& [i, pi] : pos) {
    for (const auto& [j, pj] : neg) detail::accumulate(acc, two_spike_gradient(problem, k, s, i, j), pi * pj);
  }
  return acc;
}

/// Two-spike expectation at the lowest-index active row of x.
inline std::vector<double> expected_two_spike(const MaxFormProblem& problem, std::span<const double> x) {
  const RowMax top = maxform_argmax(problem, x);
  return expected_two_spike(problem, top.row, problem.matrix().row_dot(top.row, x));
}

/// E over the uniform block draw and the spikes inside it.
inline std::vector<double> expected_blocksum(const BlockSumProblem& problem, std::span<const double> x) {
  std::vector<double> acc(problem.inner().dimension(), 0.0);
  const double r = static_cast<double>(problem.blocks());
  for (std::size_t b = 0; b < problem.blocks(); ++b) {
    const RowMax top = maxform_argmax(problem.inner(), x, problem.block_begin(b), problem.block_end(b));
    const std::vector<double> e =
        expected_two_spike(problem.inner(), top.row, problem.inner().matrix().row_dot(top.row, x));
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += e[i] / r;
  }
  return acc;
}

inline double max_abs_deviation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("max_abs_deviation: dimension mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace sparsemirror
