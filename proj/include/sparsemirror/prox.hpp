#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sparsemirror/sparse_matrix.hpp"

namespace sparsemirror {

enum class ProxKind { EuclideanFree, EuclideanOrthant, EntropySimplex };

/// Norm in which oracle samples are measured (the dual of the prox norm).
enum class DualNorm { L2, LInf };

inline const char* to_string(ProxKind kind) {
  switch (kind) {
    case ProxKind::EuclideanFree: return "euclidean-free";
    case ProxKind::EuclideanOrthant: return "euclidean-orthant";
    case ProxKind::EntropySimplex: return "entropy";
  }
  return "?";
}

/// A change of one coordinate made by a mirror step.
struct CoordinateDelta {
  std::size_t index;
  double delta;
};

/// Mirror-map configuration: the feasible set, its prox-function and the
/// paired norm.
///   EuclideanFree     Q = R^n,      d(x) = |x|_2^2 / 2,              start 0
///   EuclideanOrthant  Q = R^n_+,    d(x) = |x - anchor|_2^2 / 2,     start anchor
///   EntropySimplex    Q = simplex,  d(x) = ln n + sum x_i ln x_i,    start 1/n
class ProxSetup {
 public:
  static ProxSetup euclidean_free(std::size_t n) { return ProxSetup(ProxKind::EuclideanFree, n, {}); }

  static ProxSetup euclidean_orthant(std::vector<double> anchor) {
    for (std::size_t i = 0; i < anchor.size(); ++i) {
      if (!(anchor[i] > 0.0) || !std::isfinite(anchor[i])) {
        throw std::invalid_argument("orthant anchor must be strictly positive (coordinate " +
                                    std::to_string(i) + ")");
      }
    }
    const std::size_t n = anchor.size();
    return ProxSetup(ProxKind::EuclideanOrthant, n, std::move(anchor));
  }

  static ProxSetup entropy_simplex(std::size_t n) {
    if (n == 0) throw std::invalid_argument("simplex dimension must be positive");
    return ProxSetup(ProxKind::EntropySimplex, n, {});
  }

  ProxKind kind() const { return kind_; }
  std::size_t dimension() const { return n_; }
  std::span<const double> anchor() const { return anchor_; }
  bool euclidean() const { return kind_ != ProxKind::EntropySimplex; }
  DualNorm dual_norm() const { return euclidean() ? DualNorm::L2 : DualNorm::LInf; }

 private:
  ProxSetup(ProxKind kind, std::size_t n, std::vector<double> anchor)
      : kind_(kind), n_(n), anchor_(std::move(anchor)) {}

  ProxKind kind_;
  std::size_t n_;
  std::vector<double> anchor_;
};

/// argmin of the prox-function over Q.
inline std::vector<double> start_point(const ProxSetup& setup) {
  switch (setup.kind()) {
    case ProxKind::EuclideanFree: return std::vector<double>(setup.dimension(), 0.0);
    case ProxKind::EuclideanOrthant: return {setup.anchor().begin(), setup.anchor().end()};
    case ProxKind::EntropySimplex:
      return std::vector<double>(setup.dimension(), 1.0 / static_cast<double>(setup.dimension()));
  }
  return {};
}

namespace detail {

inline void check_step_inputs(const SparseVector& g, double alpha, std::size_t n) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("mirror step: step size must be positive and finite");
  }
  for (const SparseEntry& e : g) {
    if (e.index >= n) {
      throw std::out_of_range("mirror step: gradient index " + std::to_string(e.index) +
                              " outside dimension " + std::to_string(n));
    }
    if (!std::isfinite(e.value)) {
      throw std::invalid_argument("mirror step: non-finite gradient entry at index " +
                                  std::to_string(e.index));
    }
  }
}

}  // namespace detail

/// Euclidean mirror step x <- x - alpha g (clipped at 0 on the orthant).
/// Only coordinates in the support of g can change; the actual changes are
/// appended to `changes` when it is non-null.
inline void euclidean_mirror_step(const ProxSetup& setup, std::span<double> x, const SparseVector& g,
                                  double alpha, std::vector<CoordinateDelta>* changes = nullptr) {
  if (!setup.euclidean()) throw std::invalid_argument("euclidean_mirror_step: entropy setup");
  if (x.size() != setup.dimension()) throw std::invalid_argument("euclidean_mirror_step: dimension mismatch");
  detail::check_step_inputs(g, alpha, x.size());
  const bool clip = setup.kind() == ProxKind::EuclideanOrthant;
  for (const SparseEntry& e : g) {
    const double old = x[e.index];
    double updated = old - alpha * e.value;
    if (clip && updated < 0.0) updated = 0.0;
    if (updated != old) {
      x[e.index] = updated;
      if (changes) changes->push_back({e.index, updated - old});
    }
  }
}

/// Entropy-simplex iterate held as log-weights with a running normalizer:
///   x_i = exp(log_weight_i) / Z,   Z = sum_l exp(log_weight_l).
/// A sparse gradient touches only its support and updates Z in O(|support|)
/// with compensated summation, falling back to a dense recomputation when Z
/// collapses far below its largest term. The log-weights are shifted by
/// their maximum whenever an updated entry exceeds kRebaseLimit or Z leaves
/// [exp(-kRebaseLimit), exp(kRebaseLimit)]; the shift leaves x unchanged.
class SimplexState {
 public:
  static constexpr double kRebaseLimit = 300.0;
  static constexpr std::size_t kDefaultRefreshPeriod = 10000;
  static constexpr double kCancellationRatio = 1e-6;

  explicit SimplexState(std::size_t n, std::size_t refresh_period = kDefaultRefreshPeriod)
      : log_weights_(n, 0.0), refresh_period_(refresh_period) {
    if (n == 0) throw std::invalid_argument("SimplexState: dimension must be positive");
    if (refresh_period_ == 0) throw std::invalid_argument("SimplexState: refresh period must be positive");
    z_sum_ = static_cast<double>(n);
    z_scale_ = z_sum_;
  }

  std::size_t dimension() const { return log_weights_.size(); }
  std::span<const double> log_weights() const { return log_weights_; }
  double normalizer() const { return z_sum_ + z_comp_; }
  double log_normalizer() const { return std::log(normalizer()); }
  /// log Z recomputed densely from the log-weights (diagnostic).
  double dense_log_normalizer() const {
    const double top = *std::max_element(log_weights_.begin(), log_weights_.end());
    double s = 0.0;
    for (double lw : log_weights_) s += std::exp(lw - top);
    return top + std::log(s);
  }

  /// Unnormalized weight exp(log_weight_i).
  double weight(std::size_t i) const { return std::exp(log_weights_.at(i)); }
  double coordinate(std::size_t i) const { return std::exp(log_weights_.at(i)) / normalizer(); }

  void materialize(std::vector<double>& x) const {
    x.resize(log_weights_.size());
    const double z = normalizer();
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::exp(log_weights_[i]) / z;
  }
  std::vector<double> materialize() const {
    std::vector<double> x;
    materialize(x);
    return x;
  }

  std::vector<double> weights() const {
    std::vector<double> w(log_weights_.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights_[i]);
    return w;
  }

  /// log_weight_i -= alpha g_i on the support of g. Appends the changes of
  /// the unnormalized weights to `weight_changes` (if non-null). Returns true
  /// when the log-weights were rebased; all weights then changed by a common
  /// factor and incremental observers must resynchronize.
  bool step(const SparseVector& g, double alpha, std::vector<CoordinateDelta>* weight_changes = nullptr) {
    detail::check_step_inputs(g, alpha, log_weights_.size());
    bool rebased = false;
    for (const SparseEntry& e : g) {
      if (log_weights_[e.index] - alpha * e.value > kRebaseLimit) {
        rebase();
        rebased = true;
        break;
      }
    }
    for (const SparseEntry& e : g) {
      const double old_lw = log_weights_[e.index];
      const double new_lw = old_lw - alpha * e.value;
      if (new_lw == old_lw) continue;
      const double old_w = std::exp(old_lw);
      const double new_w = std::exp(new_lw);
      log_weights_[e.index] = new_lw;
      add_to_normalizer(-old_w);  // separately: the difference itself would round
      add_to_normalizer(new_w);
      if (weight_changes) weight_changes->push_back({e.index, new_w - old_w});
    }
    // Z far below the terms it was built from means cancellation ate its
    // precision; recompute densely (no weight changes, so no resync).
    if (++updates_since_refresh_ >= refresh_period_ || normalizer() < kCancellationRatio * z_scale_) {
      refresh_normalizer();
    }
    const double z = normalizer();
    if (!std::isfinite(z) || z > std::exp(kRebaseLimit) || z < std::exp(-kRebaseLimit)) {
      rebase();
      rebased = true;
    }
    return rebased;
  }

  /// Recomputes Z from the log-weights.
  void refresh_normalizer() {
    z_sum_ = 0.0;
    z_comp_ = 0.0;
    for (double lw : log_weights_) add_to_normalizer(std::exp(lw));
    z_scale_ = normalizer();
    updates_since_refresh_ = 0;
  }

  std::size_t rebase_count() const { return rebase_count_; }

 private:
  void rebase() {
    const double top = *std::max_element(log_weights_.begin(), log_weights_.end());
    for (double& lw : log_weights_) lw -= top;
    refresh_normalizer();
    ++rebase_count_;
  }

  // Neumaier summation
  void add_to_normalizer(double v) {
    z_scale_ = std::max(z_scale_, std::abs(v));
    const double t = z_sum_ + v;
    if (std::abs(z_sum_) >= std::abs(v)) {
      z_comp_ += (z_sum_ - t) + v;
    } else {
      z_comp_ += (v - t) + z_sum_;
    }
    z_sum_ = t;
  }

  std::vector<double> log_weights_;
  double z_sum_ = 0.0;
  double z_comp_ = 0.0;
  double z_scale_ = 0.0;
  std::size_t refresh_period_;
  std::size_t updates_since_refresh_ = 0;
  std::size_t rebase_count_ = 0;
};

/// Bregman distance V_x(y) of the setup's prox-function (diagnostic only).
inline double bregman_distance(const ProxSetup& setup, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("bregman_distance: dimension mismatch");
  double s = 0.0;
  if (setup.euclidean()) {
    for (std::size_t i = 0; i < x.size(); ++i) s += (y[i] - x[i]) * (y[i] - x[i]);
    return 0.5 * s;
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (y[i] > 0.0) s += y[i] * std::log(y[i] / x[i]);
  }
  return s;
}

/// alpha = (R / M) sqrt(2 / N); on the simplex pass R = sqrt(ln n).
struct FixedHorizon {
  double radius;
  double M;
  std::size_t N;
};

/// alpha = eps / M^2.
struct TargetAccuracy {
  double epsilon;
  double M;
};

using StepRule = std::variant<FixedHorizon, TargetAccuracy>;

inline double step_size(const StepRule& rule) {
  return std::visit(
      [](const auto& r) -> double {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, FixedHorizon>) {
          if (!(r.radius > 0.0) || !(r.M > 0.0) || r.N == 0) {
            throw std::invalid_argument("fixed-horizon step: R, M and N must be positive");
          }
          return r.radius / r.M * std::sqrt(2.0 / static_cast<double>(r.N));
        } else {
          if (!(r.epsilon > 0.0) || !(r.M > 0.0)) {
            throw std::invalid_argument("target-accuracy step: eps and M must be positive");
          }
          return r.epsilon / (r.M * r.M);
        }
      },
      rule);
}

/// Simplex fixed-horizon step alpha = M^-1 sqrt(2 ln n / N), with ln n given directly.
inline double simplex_step_size(double log_n, double M, std::size_t N) {
  if (!(log_n > 0.0)) throw std::invalid_argument("simplex step: ln n must be positive");
  return step_size(FixedHorizon{std::sqrt(log_n), M, N});
}

}  // namespace sparsemirror
