#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sparsemirror/argmax_tracker.hpp"
#include "sparsemirror/iterate.hpp"
#include "sparsemirror/oracles.hpp"
#include "sparsemirror/random.hpp"

namespace sparsemirror {

/// Work counters reported by stateful oracles.
struct OracleCounters {
  std::size_t touched_rows = 0;
  std::size_t path_updates = 0;
  std::size_t full_rebuilds = 0;
};

/// Oracle bound to one trajectory: prepared at the start point, sampled at
/// the current iterate, and told about every step so that trackers stay in
/// sync. Oracles never share mutable state between trajectories.
template <class O>
concept TrajectoryOracle = requires(O& o, const O& co, const Iterate& it, const StepOutcome& s,
                                    UniformStream& rng, ProxKind kind) {
  { co.supports(kind) } -> std::convertible_to<bool>;
  o.start(it);
  { o.sample(it, rng) } -> std::convertible_to<StochGrad>;
  o.observe(it, s);
  { co.counters() } -> std::convertible_to<OracleCounters>;
};

/// PageRank double-sampling oracle on the simplex.
class DoubleSampleOracle {
 public:
  explicit DoubleSampleOracle(const PageRankProblem& problem) : problem_(&problem) {}

  bool supports(ProxKind kind) const { return kind == ProxKind::EntropySimplex; }
  void start(const Iterate&) {}
  StochGrad sample(const Iterate& it, UniformStream& rng) const {
    return pagerank_double_sample(*problem_, it.point(), rng);
  }
  void observe(const Iterate&, const StepOutcome&) {}
  OracleCounters counters() const { return {}; }

 private:
  const PageRankProblem* problem_;
};

/// PageRank sum-randomization oracle; keeps the row products of A = P^T - I
/// current through sparse updates.
class SumRandomizationOracle {
 public:
  explicit SumRandomizationOracle(const PageRankProblem& problem) : problem_(&problem) {}

  bool supports(ProxKind kind) const { return kind == ProxKind::EntropySimplex; }
  void start(const Iterate& it) { cache_.emplace(problem_->system(), it.observed_point()); }
  StochGrad sample(const Iterate& it, UniformStream& rng) const {
    return pagerank_sum_randomization(*problem_, *cache_, rng, it.observed_scale());
  }
  void observe(const Iterate& it, const StepOutcome& s) {
    if (s.resync) {
      cache_->reset(it.observed_point());
      return;
    }
    for (const CoordinateDelta& c : s.changes) cache_->apply_sparse_delta(c.index, c.delta);
  }
  OracleCounters counters() const {
    return {cache_ ? cache_->touched_rows() : 0, 0, cache_ ? cache_->refresh_count() : 0};
  }

 private:
  const PageRankProblem* problem_;
  std::optional<RowDotCache> cache_;
};

/// Shared machinery of the tracker-driven oracles: an ArgmaxTracker over
/// the rows of a max-form problem, optionally split into blocks.
class TrackedMaxForm {
 public:
  explicit TrackedMaxForm(const MaxFormProblem& problem) : problem_(&problem), boundaries_{0, problem.rows()} {}
  explicit TrackedMaxForm(const BlockSumProblem& problem)
      : problem_(&problem.inner()),
        block_problem_(&problem),
        boundaries_(problem.boundaries().begin(), problem.boundaries().end()) {}

  /// Euclidean setups always; the simplex only when every row function is
  /// c t with c > 0, so that the argmax over unnormalized weights equals the
  /// argmax over x.
  bool supports(ProxKind kind) const {
    return kind != ProxKind::EntropySimplex || problem_->homogeneous_increasing();
  }

  void start(const Iterate& it) {
    if (!supports(it.setup().kind())) {
      throw std::invalid_argument("max-form tracker on the simplex needs row functions c*t with c > 0");
    }
    tracker_.emplace(*problem_, it.observed_point(), boundaries_);
  }

  void observe(const Iterate& it, const StepOutcome& s) {
    if (s.resync) {
      tracker_->reset(it.observed_point());
      return;
    }
    tracker_->notify(s.changes);
  }

  OracleCounters counters() const {
    if (!tracker_) return {};
    return {tracker_->touched_rows(), tracker_->path_updates(), tracker_->full_rebuilds()};
  }

  const ArgmaxTracker& tracker() const { return *tracker_; }
  const MaxFormProblem& problem() const { return *problem_; }
  std::size_t blocks() const { return boundaries_.size() - 1; }

  /// Active row of block b with `value` set to A_k^T x (not sigma).
  RowMax active(const Iterate& it, std::size_t b) const {
    const std::size_t k = tracker_->current(b).row;
    return {k, tracker_->row_dot(k) * it.observed_scale()};
  }

  /// Objective at the current iterate from the tree roots, O(r).
  double objective(const Iterate& it) const {
    double s = 0.0;
    for (std::size_t b = 0; b < blocks(); ++b) {
      const RowMax a = active(it, b);
      s += problem_->function(a.row).value(a.value);
    }
    return s / static_cast<double>(blocks());
  }

 protected:
  const MaxFormProblem* problem_;
  const BlockSumProblem* block_problem_ = nullptr;
  std::vector<std::size_t> boundaries_;
  std::optional<ArgmaxTracker> tracker_;
};

/// Two-spike oracle for max-form problems, and its block-sum extension
/// (uniform block draw first) when built from a BlockSumProblem.
class TwoSpikeOracle : public TrackedMaxForm {
 public:
  using TrackedMaxForm::TrackedMaxForm;

  StochGrad sample(const Iterate& it, UniformStream& rng) const {
    if (block_problem_) {
      return blocksum_oracle(*block_problem_, [&](std::size_t b) { return active(it, b); }, rng);
    }
    const RowMax a = active(it, 0);
    return maxform_two_spike(*problem_, a.row, a.value, rng);
  }
};

/// Deterministic subgradient (1/r) sum_b sigma'(A_k^T x) A_{k_b} read off
/// the tracker: each step costs O(s_n s_m log m) instead of a full pass.
class ActiveRowOracle : public TrackedMaxForm {
 public:
  using TrackedMaxForm::TrackedMaxForm;

  StochGrad sample(const Iterate& it, UniformStream&) const {
    StochGrad g;
    const std::size_t r = blocks();
    if (r == 1) {
      const RowMax a = active(it, 0);
      g.entries = row_subgradient(*problem_, a.row, a.value);
      g.first = a.row;
    } else {
      std::vector<double> dense(problem_->dimension(), 0.0);
      for (std::size_t b = 0; b < r; ++b) {
        const RowMax a = active(it, b);
        for (const SparseEntry& e : row_subgradient(*problem_, a.row, a.value)) {
          dense[e.index] += e.value / static_cast<double>(r);
        }
      }
      for (std::size_t i = 0; i < dense.size(); ++i) {
        if (dense[i] != 0.0) g.entries.push_back({i, dense[i]});
      }
    }
    g.m_bound = norm(g.entries, DualNorm::L2);
    g.m_bound = std::max(g.m_bound, norm(g.entries, DualNorm::LInf));
    return g;
  }
};

/// Deterministic oracle from a callable x -> subgradient. Used for exact
/// baselines and for analytic test problems.
class FunctionOracle {
 public:
  using Gradient = std::function<SparseVector(std::span<const double>)>;

  explicit FunctionOracle(Gradient gradient) : gradient_(std::move(gradient)) {}

  bool supports(ProxKind) const { return true; }
  void start(const Iterate&) {}
  StochGrad sample(const Iterate& it, UniformStream&) const {
    StochGrad g;
    g.entries = gradient_(it.point());
    g.m_bound = std::max(norm(g.entries, DualNorm::L2), norm(g.entries, DualNorm::LInf));
    return g;
  }
  void observe(const Iterate&, const StepOutcome&) {}
  OracleCounters counters() const { return {}; }

 private:
  Gradient gradient_;
};

/// Always returns the zero vector.
inline FunctionOracle zero_oracle() {
  return FunctionOracle([](std::span<const double>) { return SparseVector{}; });
}

/// Constant gradient c (the oracle of a linear objective c^T x).
inline FunctionOracle constant_oracle(std::vector<double> c) {
  SparseVector g;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] != 0.0) g.push_back({i, c[i]});
  }
  return FunctionOracle([g = std::move(g)](std::span<const double>) { return g; });
}

}  // namespace sparsemirror
