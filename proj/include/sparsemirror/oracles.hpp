#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsemirror/prox.hpp"
#include "sparsemirror/random.hpp"
#include "sparsemirror/sampling.hpp"
#include "sparsemirror/sparse_matrix.hpp"

namespace sparsemirror {

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

/// One stochastic (sub)gradient sample.
struct StochGrad {
  SparseVector entries;  // index-sorted, no explicit zeros
  /// Certified bound on the dual norm of `entries` for this sample.
  double m_bound = 0.0;
  /// Sampled indices, kNoIndex when unused: first draw (xi, active row or
  /// spike i), second draw (j or spike j), block.
  std::size_t first = kNoIndex;
  std::size_t second = kNoIndex;
  std::size_t block = kNoIndex;
};

inline double norm(const SparseVector& v, DualNorm which) {
  double s = 0.0;
  for (const SparseEntry& e : v) {
    if (which == DualNorm::L2) {
      s += e.value * e.value;
    } else {
      s = std::max(s, std::abs(e.value));
    }
  }
  return which == DualNorm::L2 ? std::sqrt(s) : s;
}

inline std::vector<double> to_dense(const SparseVector& v, std::size_t n) {
  std::vector<double> out(n, 0.0);
  for (const SparseEntry& e : v) out.at(e.index) += e.value;
  return out;
}

/// ca * a + cb * b for index-sorted sparse inputs; exact zeros are dropped.
inline SparseVector combine(SparseView a, double ca, SparseView b, double cb) {
  SparseVector out;
  out.reserve(a.size() + b.size());
  std::size_t p = 0, q = 0;
  auto push = [&out](std::size_t i, double v) {
    if (v != 0.0) out.push_back({i, v});
  };
  while (p < a.size() || q < b.size()) {
    if (q == b.size() || (p < a.size() && a.indices[p] < b.indices[q])) {
      push(a.indices[p], ca * a.values[p]);
      ++p;
    } else if (p == a.size() || b.indices[q] < a.indices[p]) {
      push(b.indices[q], cb * b.values[q]);
      ++q;
    } else {
      push(a.indices[p], ca * a.values[p] + cb * b.values[q]);
      ++p;
      ++q;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// PageRank: f(x) = 1/2 |A x|_2^2 over the simplex, A = P^T - I.

class PageRankProblem {
 public:
  static constexpr double kRowSumTolerance = 1e-9;

  /// Validates that P is square, nonnegative and row-stochastic; rows that
  /// do not sum to one (dangling rows included) are rejected.
  explicit PageRankProblem(SparseMatrixDual transition) : p_(std::move(transition)) {
    if (p_.rows() != p_.cols()) {
      throw std::invalid_argument("PageRank matrix must be square, got " + std::to_string(p_.rows()) +
                                  "x" + std::to_string(p_.cols()));
    }
    if (p_.rows() == 0) throw std::invalid_argument("PageRank matrix is empty");
    const std::size_t n = p_.rows();
    row_samplers_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const SparseView row = p_.row(i);
      double sum = 0.0;
      SparseVector weights;
      weights.reserve(row.size());
      for (std::size_t t = 0; t < row.size(); ++t) {
        if (row.values[t] < 0.0) {
          throw std::invalid_argument("non-stochastic row " + std::to_string(i) + ": negative entry");
        }
        sum += row.values[t];
        weights.push_back({row.indices[t], row.values[t]});
      }
      if (std::abs(sum - 1.0) > kRowSumTolerance) {
        throw std::invalid_argument("non-stochastic row " + std::to_string(i) + ": sums to " +
                                    std::to_string(sum));
      }
      row_samplers_.emplace_back(weights);
    }
    std::vector<Triplet> t;
    t.reserve(p_.nnz() + n);
    std::vector<double> diag(n, 0.0);
    for (const Triplet& e : p_.triplets()) {
      if (e.row == e.col) {
        diag[e.row] = e.value;
      } else {
        t.push_back({e.col, e.row, e.value});
      }
    }
    for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, diag[i] - 1.0});
    a_ = SparseMatrixDual::from_triplets(t, n, n);
  }

  std::size_t dimension() const { return p_.rows(); }
  const SparseMatrixDual& transition() const { return p_; }
  /// A = P^T - I. Row k of A is column k of P - I.
  const SparseMatrixDual& system() const { return a_; }
  const WeightTree& row_sampler(std::size_t i) const { return row_samplers_.at(i); }

 private:
  SparseMatrixDual p_;
  SparseMatrixDual a_;
  std::vector<WeightTree> row_samplers_;
};

inline std::vector<double> multiply(const SparseMatrixDual& a, std::span<const double> x) {
  std::vector<double> y(a.rows());
  for (std::size_t k = 0; k < a.rows(); ++k) y[k] = a.row_dot(k, x);
  return y;
}

inline std::vector<double> multiply_transposed(const SparseMatrixDual& a, std::span<const double> y) {
  if (y.size() != a.rows()) throw std::invalid_argument("multiply_transposed: dimension mismatch");
  std::vector<double> out(a.cols(), 0.0);
  for (std::size_t j = 0; j < a.cols(); ++j) {
    const SparseView c = a.col(j);
    for (std::size_t t = 0; t < c.size(); ++t) out[j] += c.values[t] * y[c.indices[t]];
  }
  return out;
}

/// 1/2 |(P^T - I) x|_2^2 in O(nnz).
inline double pagerank_objective(const PageRankProblem& problem, std::span<const double> x) {
  double s = 0.0;
  for (double v : multiply(problem.system(), x)) s += v * v;
  return 0.5 * s;
}

/// |(P^T - I) x|_inf, the max-form residual.
inline double pagerank_residual_inf(const PageRankProblem& problem, std::span<const double> x) {
  double s = 0.0;
  for (double v : multiply(problem.system(), x)) s = std::max(s, std::abs(v));
  return s;
}

/// Exact gradient A^T A x.
inline std::vector<double> pagerank_gradient(const PageRankProblem& problem, std::span<const double> x) {
  return multiply_transposed(problem.system(), multiply(problem.system(), x));
}

/// Column j of (P - I) minus column xi of (P - I). Column j of P - I is row j
/// of A, so this is A_j - A_xi. Every entry lies in [-2, 2].
inline StochGrad double_sample_gradient(const PageRankProblem& problem, std::size_t xi, std::size_t j) {
  StochGrad g;
  g.first = xi;
  g.second = j;
  g.m_bound = 2.0;
  if (j != xi) g.entries = combine(problem.system().row(j), 1.0, problem.system().row(xi), -1.0);
  return g;
}

/// Inverse-CDF draw of an index with probability x_i from a point on the simplex.
inline std::size_t sample_from_simplex(std::span<const double> x, double u) {
  double cumulative = 0.0;
  std::size_t last_positive = kNoIndex;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] <= 0.0) continue;
    cumulative += x[i];
    last_positive = i;
    if (u < cumulative) return i;
  }
  if (last_positive == kNoIndex) throw std::domain_error("sample_from_simplex: point has no positive mass");
  return last_positive;
}

/// Draws xi ~ x (one uniform, cumulative scan) and j ~ row xi of P (one
/// uniform, tree descent). Unbiased for A^T A x.
inline StochGrad pagerank_double_sample(const PageRankProblem& problem, std::span<const double> x,
                                        UniformStream& rng) {
  const std::size_t xi = sample_from_simplex(x, rng.next());
  const WeightTree& row = problem.row_sampler(xi);
  if (row.empty()) throw std::domain_error("non-stochastic row " + std::to_string(xi));
  const std::size_t j = row.sample(rng.next());
  return double_sample_gradient(problem, xi, j);
}

/// n (A_xi^T x) A_xi with the row product supplied by the caller.
inline StochGrad sum_randomization_gradient(const PageRankProblem& problem, std::size_t xi, double row_value) {
  StochGrad g;
  g.first = xi;
  const double n = static_cast<double>(problem.dimension());
  const double scale = n * row_value;
  const SparseView row = problem.system().row(xi);
  double row_inf = 0.0;
  if (scale != 0.0) {
    g.entries.reserve(row.size());
    for (std::size_t t = 0; t < row.size(); ++t) {
      row_inf = std::max(row_inf, std::abs(row.values[t]));
      g.entries.push_back({row.indices[t], scale * row.values[t]});
    }
  }
  g.m_bound = std::abs(scale) * row_inf;
  return g;
}

/// xi uniform on the rows (one uniform); the row product A_xi^T x is read
/// from a cache over problem.system(), multiplied by `value_scale` (1 when
/// the cache tracks x itself, 1/Z when it tracks unnormalized weights).
inline StochGrad pagerank_sum_randomization(const PageRankProblem& problem, const RowDotCache& cache,
                                            UniformStream& rng, double value_scale = 1.0) {
  const std::size_t n = problem.dimension();
  const std::size_t xi = std::min(n - 1, static_cast<std::size_t>(rng.next() * static_cast<double>(n)));
  return sum_randomization_gradient(problem, xi, cache.value(xi) * value_scale);
}

// ---------------------------------------------------------------------------
// Max-form objectives max_k sigma_k(A_k^T x).

enum class RowFunctionKind { Affine, Absolute, Hinge };

/// Scalar convex sigma(t) with a fixed subgradient choice:
///   Affine    c (t - b)            sigma' = c
///   Absolute  c |t - b|  (c >= 0)  sigma' = c sign(t - b), 0 at the kink
///   Hinge     c max(0, t - b)      sigma' = c [t > b]
struct RowFunction {
  RowFunctionKind kind = RowFunctionKind::Affine;
  double offset = 0.0;
  double scale = 1.0;

  double value(double t) const {
    const double r = t - offset;
    switch (kind) {
      case RowFunctionKind::Affine: return scale * r;
      case RowFunctionKind::Absolute: return scale * std::abs(r);
      case RowFunctionKind::Hinge: return scale * std::max(0.0, r);
    }
    return 0.0;
  }

  double derivative(double t) const {
    const double r = t - offset;
    switch (kind) {
      case RowFunctionKind::Affine: return scale;
      case RowFunctionKind::Absolute: return r > 0.0 ? scale : (r < 0.0 ? -scale : 0.0);
      case RowFunctionKind::Hinge: return r > 0.0 ? scale : 0.0;
    }
    return 0.0;
  }

  double lipschitz() const { return std::abs(scale); }
};

inline RowFunctionKind parse_row_function_kind(const std::string& name) {
  if (name == "affine") return RowFunctionKind::Affine;
  if (name == "abs") return RowFunctionKind::Absolute;
  if (name == "hinge") return RowFunctionKind::Hinge;
  throw std::invalid_argument("unknown row function '" + name + "' (affine, abs, hinge)");
}

class MaxFormProblem {
 public:
  MaxFormProblem(SparseMatrixDual a, std::vector<RowFunction> functions)
      : a_(std::move(a)), functions_(std::move(functions)) {
    if (functions_.size() != a_.rows()) {
      throw std::invalid_argument("max-form problem: " + std::to_string(functions_.size()) +
                                  " row functions for " + std::to_string(a_.rows()) + " rows");
    }
    for (std::size_t k = 0; k < functions_.size(); ++k) {
      const RowFunction& f = functions_[k];
      if (!std::isfinite(f.offset) || !std::isfinite(f.scale)) {
        throw std::invalid_argument("row function " + std::to_string(k) + " has non-finite parameters");
      }
      if (f.kind != RowFunctionKind::Affine && f.scale < 0.0) {
        throw std::invalid_argument("row function " + std::to_string(k) + " is not convex (negative scale)");
      }
      lipschitz_ = std::max(lipschitz_, f.lipschitz());
    }
    samplers_ = build_signed_row_samplers(a_);
  }

  /// sigma_k(t) = t - b_k.
  static MaxFormProblem affine(SparseMatrixDual a, std::span<const double> offsets) {
    if (offsets.size() != a.rows()) throw std::invalid_argument("affine max-form: offset count mismatch");
    std::vector<RowFunction> f(a.rows());
    for (std::size_t k = 0; k < f.size(); ++k) f[k] = {RowFunctionKind::Affine, offsets[k], 1.0};
    return MaxFormProblem(std::move(a), std::move(f));
  }

  const SparseMatrixDual& matrix() const { return a_; }
  std::size_t rows() const { return a_.rows(); }
  std::size_t dimension() const { return a_.cols(); }
  const RowFunction& function(std::size_t k) const { return functions_.at(k); }
  const SignedRowSampler& sampler(std::size_t k) const { return samplers_.at(k); }
  /// M: uniform Lipschitz bound of the row functions.
  double lipschitz() const { return lipschitz_; }

  /// max_k |A_k|_1 and max_k |A_k|_2.
  double max_row_l1() const {
    double s = 0.0;
    for (const SignedRowSampler& r : samplers_) s = std::max(s, r.l1());
    return s;
  }
  double max_row_l2() const {
    double s = 0.0;
    for (std::size_t k = 0; k < a_.rows(); ++k) {
      double r = 0.0;
      for (double v : a_.row(k).values) r += v * v;
      s = std::max(s, r);
    }
    return std::sqrt(s);
  }

  /// True when every sigma_k is c (t - 0) with c > 0: argmax over rows of
  /// the unnormalized simplex weights then equals the argmax over x.
  bool homogeneous_increasing() const {
    return std::all_of(functions_.begin(), functions_.end(), [](const RowFunction& f) {
      return f.kind == RowFunctionKind::Affine && f.offset == 0.0 && f.scale > 0.0;
    });
  }

 private:
  SparseMatrixDual a_;
  std::vector<RowFunction> functions_;
  std::vector<SignedRowSampler> samplers_;
  double lipschitz_ = 0.0;
};

/// The max-form residual max_k A_k^T x of a PageRank instance.
inline MaxFormProblem pagerank_max_form(const PageRankProblem& problem) {
  std::vector<double> zeros(problem.dimension(), 0.0);
  return MaxFormProblem::affine(problem.system(), zeros);
}

struct RowMax {
  std::size_t row = kNoIndex;
  double value = -std::numeric_limits<double>::infinity();
};

/// Argmax over rows [begin, end) with the lowest-index tie-break.
inline RowMax maxform_argmax(const MaxFormProblem& problem, std::span<const double> x, std::size_t begin,
                             std::size_t end) {
  RowMax best;
  for (std::size_t k = begin; k < end; ++k) {
    const double v = problem.function(k).value(problem.matrix().row_dot(k, x));
    if (best.row == kNoIndex || v > best.value) best = {k, v};
  }
  return best;
}

inline RowMax maxform_argmax(const MaxFormProblem& problem, std::span<const double> x) {
  if (problem.rows() == 0) throw std::invalid_argument("max-form problem has no rows");
  return maxform_argmax(problem, x, 0, problem.rows());
}

inline double maxform_objective(const MaxFormProblem& problem, std::span<const double> x) {
  return maxform_argmax(problem, x).value;
}

/// sigma'_k(A_k^T x) A_k, checked against the Lipschitz bound.
inline SparseVector row_subgradient(const MaxFormProblem& problem, std::size_t k, double row_value) {
  const double s = problem.function(k).derivative(row_value);
  if (std::abs(s) > problem.lipschitz()) throw std::logic_error("row function derivative exceeds M");
  SparseVector out;
  if (s == 0.0) return out;
  const SparseView row = problem.matrix().row(k);
  out.reserve(row.size());
  for (std::size_t t = 0; t < row.size(); ++t) out.push_back({row.indices[t], s * row.values[t]});
  return out;
}

/// Deterministic subgradient at the lowest-index active row.
inline SparseVector exact_subgradient(const MaxFormProblem& problem, std::span<const double> x) {
  const RowMax top = maxform_argmax(problem, x);
  return row_subgradient(problem, top.row, problem.matrix().row_dot(top.row, x));
}

inline SparseVector exact_subgradient(const PageRankProblem& problem, std::span<const double> x) {
  const std::vector<double> g = pagerank_gradient(problem, x);
  SparseVector out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] != 0.0) out.push_back({i, g[i]});
  }
  return out;
}

/// s (|A_k^+|_1 e_i - |A_k^-|_1 e_j) for given spikes; pass kNoIndex for a
/// spike whose part of the row is empty.
inline StochGrad two_spike_gradient(const MaxFormProblem& problem, std::size_t k, double s, std::size_t i,
                                    std::size_t j) {
  const SignedRowSampler& row = problem.sampler(k);
  StochGrad g;
  g.first = i;
  g.second = j;
  g.m_bound = std::abs(s) * row.l1();
  if (s == 0.0) return g;
  if (i != kNoIndex) g.entries.push_back({i, s * row.l1_pos});
  if (j != kNoIndex) g.entries.push_back({j, -s * row.l1_neg});
  if (g.entries.size() == 2 && g.entries[1].index < g.entries[0].index) std::swap(g.entries[0], g.entries[1]);
  return g;
}

/// Two-spike sample at active row k with A_k^T x = row_value. Consumes one
/// uniform per non-empty part of the row (at most two). Expectation
/// sigma'_k(row_value) A_k.
inline StochGrad maxform_two_spike(const MaxFormProblem& problem, std::size_t k, double row_value,
                                   UniformStream& rng) {
  const double s = problem.function(k).derivative(row_value);
  if (std::abs(s) > problem.lipschitz()) throw std::logic_error("row function derivative exceeds M");
  const SignedRowSampler& row = problem.sampler(k);
  const std::size_t i = row.l1_pos > 0.0 ? row.pos.sample(rng.next()) : kNoIndex;
  const std::size_t j = row.l1_neg > 0.0 ? row.neg.sample(rng.next()) : kNoIndex;
  return two_spike_gradient(problem, k, s, i, j);
}

// ---------------------------------------------------------------------------
// Block sums (1/r) sum_b max_{l in block b} sigma_l(A_l^T x).

class BlockSumProblem {
 public:
  /// `boundaries` = {0, b_1, ..., b_r = m}, strictly increasing.
  BlockSumProblem(MaxFormProblem inner, std::vector<std::size_t> boundaries)
      : inner_(std::move(inner)), boundaries_(std::move(boundaries)) {
    if (boundaries_.size() < 2 || boundaries_.front() != 0 || boundaries_.back() != inner_.rows()) {
      throw std::invalid_argument("block boundaries must start at 0 and end at m = " +
                                  std::to_string(inner_.rows()));
    }
    for (std::size_t b = 1; b < boundaries_.size(); ++b) {
      if (boundaries_[b] <= boundaries_[b - 1]) {
        throw std::invalid_argument("block boundaries must be strictly increasing (position " +
                                    std::to_string(b) + ")");
      }
    }
  }

  const MaxFormProblem& inner() const { return inner_; }
  std::size_t blocks() const { return boundaries_.size() - 1; }
  std::size_t block_begin(std::size_t b) const { return boundaries_.at(b); }
  std::size_t block_end(std::size_t b) const { return boundaries_.at(b + 1); }
  std::span<const std::size_t> boundaries() const { return boundaries_; }

 private:
  MaxFormProblem inner_;
  std::vector<std::size_t> boundaries_;
};

inline double blocksum_objective(const BlockSumProblem& problem, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t b = 0; b < problem.blocks(); ++b) {
    s += maxform_argmax(problem.inner(), x, problem.block_begin(b), problem.block_end(b)).value;
  }
  return s / static_cast<double>(problem.blocks());
}

/// (1/r) sum_b sigma'(.) A_{k_b} with lowest-index argmax per block.
inline SparseVector exact_subgradient(const BlockSumProblem& problem, std::span<const double> x) {
  const double r = static_cast<double>(problem.blocks());
  std::vector<double> dense(problem.inner().dimension(), 0.0);
  for (std::size_t b = 0; b < problem.blocks(); ++b) {
    const RowMax top = maxform_argmax(problem.inner(), x, problem.block_begin(b), problem.block_end(b));
    const double t = problem.inner().matrix().row_dot(top.row, x);
    for (const SparseEntry& e : row_subgradient(problem.inner(), top.row, t)) dense[e.index] += e.value / r;
  }
  SparseVector out;
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0.0) out.push_back({i, dense[i]});
  }
  return out;
}

/// Uniform block index from one variate.
inline std::size_t draw_block(const BlockSumProblem& problem, UniformStream& rng) {
  const std::size_t r = problem.blocks();
  return std::min(r - 1, static_cast<std::size_t>(rng.next() * static_cast<double>(r)));
}

/// Uniform block draw followed by the two-spike sample at that block's
/// active row. `active(b)` returns the block's RowMax with `value` holding
/// A_k^T x. Not rescaled by r: the 1/r of the objective and the 1/r draw
/// probability cancel. At most three variates.
template <class ActiveRow>
StochGrad blocksum_oracle(const BlockSumProblem& problem, ActiveRow&& active, UniformStream& rng) {
  const std::size_t b = draw_block(problem, rng);
  const RowMax top = active(b);
  StochGrad g = maxform_two_spike(problem.inner(), top.row, top.value, rng);
  g.block = b;
  return g;
}

}  // namespace sparsemirror
