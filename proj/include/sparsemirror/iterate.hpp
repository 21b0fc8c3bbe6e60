#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "sparsemirror/prox.hpp"
#include "sparsemirror/sparse_matrix.hpp"

namespace sparsemirror {

/// What a mirror step changed, in the coordinates incremental observers
/// track: x itself for the Euclidean setups, the unnormalized weights
/// exp(log_weight) on the simplex. `resync` means the change was not sparse
/// (a log-weight rebase) and observers must reload observed_point().
struct StepOutcome {
  std::span<const CoordinateDelta> changes;
  bool resync = false;
};

/// Current point of one trajectory under a given setup.
class Iterate {
 public:
  explicit Iterate(const ProxSetup& setup, std::size_t simplex_refresh = SimplexState::kDefaultRefreshPeriod)
      : setup_(setup), x_(start_point(setup)) {
    if (!setup.euclidean()) simplex_.emplace(setup.dimension(), simplex_refresh);
  }

  const ProxSetup& setup() const { return setup_; }
  std::size_t dimension() const { return x_.size(); }
  bool on_simplex() const { return simplex_.has_value(); }
  const SimplexState& simplex_state() const { return simplex_.value(); }

  /// The point x^k. On the simplex it is materialized after every step.
  std::span<const double> point() const { return x_; }

  /// Vector that incremental observers track (see StepOutcome).
  std::vector<double> observed_point() const {
    return simplex_ ? simplex_->weights() : x_;
  }
  /// Factor turning observed row products into row products with x.
  double observed_scale() const { return simplex_ ? 1.0 / simplex_->normalizer() : 1.0; }

  StepOutcome step(const SparseVector& g, double alpha) {
    changes_.clear();
    if (!simplex_) {
      euclidean_mirror_step(setup_, x_, g, alpha, &changes_);
      for (const CoordinateDelta& c : changes_) {
        if (!std::isfinite(x_[c.index])) throw std::runtime_error("non-finite iterate");
      }
      return {changes_, false};
    }
    const bool rebased = simplex_->step(g, alpha, &changes_);
    if (!std::isfinite(simplex_->normalizer())) throw std::runtime_error("non-finite iterate");
    simplex_->materialize(x_);
    return {changes_, rebased};
  }

  /// Membership in Q up to `tol` (sum constraint on the simplex).
  bool feasible(double tol = 1e-12) const {
    switch (setup_.kind()) {
      case ProxKind::EuclideanFree: return true;
      case ProxKind::EuclideanOrthant:
        for (double v : x_) {
          if (v < 0.0) return false;
        }
        return true;
      case ProxKind::EntropySimplex: {
        double s = 0.0;
        for (double v : x_) {
          if (v < 0.0) return false;
          s += v;
        }
        return std::abs(s - 1.0) <= tol;
      }
    }
    return false;
  }

 private:
  ProxSetup setup_;
  std::vector<double> x_;
  std::optional<SimplexState> simplex_;
  std::vector<CoordinateDelta> changes_;
};

}  // namespace sparsemirror
