#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sparsemirror/iterate.hpp"
#include "sparsemirror/prox.hpp"
#include "sparsemirror/random.hpp"
#include "sparsemirror/trajectory_oracles.hpp"

namespace sparsemirror {

/// Smallest integer >= v, treating values within 1e-9 (relative) of an
/// integer as that integer so that e.g. 2/0.1^2 maps to 200, not 201.
inline std::size_t ceil_count(double v) {
  if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("ceil_count: invalid value");
  const double r = std::nearbyint(v);
  if (std::abs(v - r) <= 1e-9 * std::max(1.0, v)) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::ceil(v));
}

/// Iteration budget N = ceil(2 M^2 R^2 / eps^2); the constrained scheme adds one.
inline std::size_t derive_horizon(double epsilon, double M, double radius, bool constrained = false) {
  if (!(epsilon > 0.0) || !(M > 0.0) || !(radius > 0.0)) {
    throw std::invalid_argument("derive_horizon: eps, M and R must be positive");
  }
  const std::size_t n = ceil_count(2.0 * M * M * radius * radius / (epsilon * epsilon));
  return constrained ? n + 1 : std::max<std::size_t>(n, 1);
}

/// Number of independent trajectories for confidence level sigma: ceil(log2(1/sigma)).
inline std::size_t trajectories_for_confidence(double sigma) {
  if (!(sigma > 0.0 && sigma < 1.0)) throw std::invalid_argument("sigma must lie in (0, 1)");
  return std::max<std::size_t>(1, ceil_count(std::log2(1.0 / sigma)));
}

using Objective = std::function<double(std::span<const double>)>;

struct SolverConfig {
  ProxSetup prox;
  /// Target accuracy eps (eps_g for the constrained scheme); 0 when N is given instead.
  double epsilon = 0.0;
  /// Independent eps_f for the constrained scheme; 0 keeps eps_f = (M_f/M_g) eps_g.
  double epsilon_f = 0.0;
  /// Oracle bound M (M_g for the constrained scheme).
  double M = 0.0;
  /// Bound M_f on the objective oracle (constrained only).
  double M_f = 0.0;
  /// R with R^2 = d(x_*); defaults to sqrt(ln n) on the simplex, unknown otherwise.
  double radius = 0.0;
  /// Iteration budget N; derived from eps when 0.
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  /// Trajectory index; selects an independent random stream of `seed`.
  std::uint64_t stream = 0;
  /// Record x~ = argmin_k f(x^k) (deterministic oracles); costs one f per step.
  bool keep_best = false;
  /// Trace period T; 0 means max(1, N / 1000).
  std::size_t trace_every = 0;
  /// Refresh period of the simplex normalizer.
  std::size_t simplex_refresh = SimplexState::kDefaultRefreshPeriod;
};

struct TraceRow {
  std::size_t iteration;
  double f;
  double g;
  std::size_t touched_rows;
};

struct RunCounters {
  std::size_t oracle_calls = 0;
  std::uint64_t uniforms = 0;
  std::size_t touched_rows = 0;
  std::size_t path_updates = 0;
  std::size_t full_rebuilds = 0;
  /// Largest per-iteration increments of touched_rows / path_updates.
  std::size_t max_step_touched_rows = 0;
  std::size_t max_step_path_updates = 0;
};

struct RunReport {
  std::vector<double> x_bar;
  /// f and g at x_bar (NaN when no evaluator was supplied).
  double f_bar = std::numeric_limits<double>::quiet_NaN();
  double g_bar = std::numeric_limits<double>::quiet_NaN();
  std::optional<std::vector<double>> x_best;
  double f_best = std::numeric_limits<double>::quiet_NaN();
  std::size_t best_iteration = 0;
  std::vector<TraceRow> trace;
  RunCounters counters;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::size_t iterations = 0;
  double epsilon = 0.0;
  /// Step on f (and on g for the constrained scheme).
  double step_f = 0.0;
  double step_g = 0.0;
  std::size_t productive_steps = 0;
  std::size_t constraint_steps = 0;
};

/// Thrown by the constrained scheme when no iterate satisfied g(x^k) <= eps_g.
class NoProductiveSteps : public std::runtime_error {
 public:
  explicit NoProductiveSteps(RunReport report)
      : std::runtime_error("no productive steps: g(x^k) > eps_g at all " +
                           std::to_string(report.iterations) + " iterations"),
        report_(std::move(report)) {}
  const RunReport& report() const { return report_; }

 private:
  RunReport report_;
};

namespace detail {

/// Running mean of a subset of iterates. Euclidean trajectories change a
/// few coordinates per step, so each coordinate is charged lazily for the
/// number of included iterates it kept its value; simplex iterates change
/// densely and are added in full.
class IterateMean {
 public:
  explicit IterateMean(const Iterate& it)
      : lazy_(!it.on_simplex()), sum_(it.dimension(), 0.0), mark_(lazy_ ? it.dimension() : 0, 0) {}

  void include(const Iterate& it) {
    ++count_;
    if (lazy_) return;
    const std::span<const double> x = it.point();
    for (std::size_t i = 0; i < x.size(); ++i) sum_[i] += x[i];
  }

  /// Call before a step whose changes are confined to the support of g.
  void before_step(const Iterate& it, const SparseVector& g) {
    if (!lazy_) return;
    const std::span<const double> x = it.point();
    for (const SparseEntry& e : g) flush(e.index, x[e.index]);
  }

  std::size_t count() const { return count_; }

  std::vector<double> mean(const Iterate& it) const {
    std::vector<double> out = sum_;
    if (count_ == 0) return out;
    const std::span<const double> x = it.point();
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (lazy_) out[i] += x[i] * static_cast<double>(count_ - mark_[i]);
      out[i] /= static_cast<double>(count_);
    }
    return out;
  }

 private:
  void flush(std::size_t j, double value) {
    sum_[j] += value * static_cast<double>(count_ - mark_[j]);
    mark_[j] = count_;
  }

  bool lazy_;
  std::vector<double> sum_;
  std::vector<std::size_t> mark_;
  std::size_t count_ = 0;
};

struct Schedule {
  std::size_t iterations;
  double epsilon;
  double alpha;
};

inline double default_radius(const SolverConfig& cfg) {
  if (cfg.radius > 0.0) return cfg.radius;
  if (cfg.prox.kind() == ProxKind::EntropySimplex && cfg.prox.dimension() > 1) {
    return std::sqrt(std::log(static_cast<double>(cfg.prox.dimension())));
  }
  return 0.0;
}

/// N and alpha for the unconstrained method. With eps: alpha = eps / M^2 and
/// N from eps when not given. Without eps: alpha = (R / M) sqrt(2 / N).
inline Schedule unconstrained_schedule(const SolverConfig& cfg) {
  if (!(cfg.M > 0.0)) throw std::invalid_argument("solver: M must be positive");
  const double radius = default_radius(cfg);
  if (cfg.epsilon > 0.0) {
    std::size_t n = cfg.horizon;
    if (radius > 0.0) {
      const std::size_t derived = derive_horizon(cfg.epsilon, cfg.M, radius);
      if (n == 0) {
        n = derived;
      } else if (n != derived) {
        throw std::invalid_argument("solver: N = " + std::to_string(n) + " inconsistent with eps (expects " +
                                    std::to_string(derived) + ")");
      }
    }
    if (n == 0) throw std::invalid_argument("solver: N cannot be derived without R on this set");
    return {n, cfg.epsilon, step_size(TargetAccuracy{cfg.epsilon, cfg.M})};
  }
  if (cfg.horizon == 0 || !(radius > 0.0)) {
    throw std::invalid_argument("solver: need eps, or N together with R");
  }
  const double alpha = step_size(FixedHorizon{radius, cfg.M, cfg.horizon});
  return {cfg.horizon, cfg.M * radius * std::sqrt(2.0 / static_cast<double>(cfg.horizon)), alpha};
}

inline std::size_t trace_period(const SolverConfig& cfg, std::size_t n) {
  return cfg.trace_every > 0 ? cfg.trace_every : std::max<std::size_t>(1, n / 1000);
}

template <class O>
void check_pairing(const O& oracle, const ProxSetup& prox) {
  if (!oracle.supports(prox.kind())) {
    throw std::invalid_argument(std::string("incompatible oracle / prox pairing (prox ") + to_string(prox.kind()) +
                                ")");
  }
}

inline void count_step(RunCounters& c, const OracleCounters& before, const OracleCounters& after) {
  c.max_step_touched_rows = std::max(c.max_step_touched_rows, after.touched_rows - before.touched_rows);
  c.max_step_path_updates = std::max(c.max_step_path_updates, after.path_updates - before.path_updates);
}

inline void finish_counters(RunCounters& c, const OracleCounters& total, const UniformStream& rng) {
  c.touched_rows = total.touched_rows;
  c.path_updates = total.path_updates;
  c.full_rebuilds = total.full_rebuilds;
  c.uniforms = rng.consumed();
}

}  // namespace detail

/// Mirror descent x^{k+1} = Mirr_{x^k}(alpha g_k), k = 1..N, from the
/// setup's start point with a constant step. Returns the mean of x^1..x^N.
/// Deterministic for a given (seed, stream).
template <TrajectoryOracle O>
RunReport mirror_descent(const SolverConfig& cfg, O& oracle, const Objective& f = {}) {
  detail::check_pairing(oracle, cfg.prox);
  const detail::Schedule plan = detail::unconstrained_schedule(cfg);
  if (cfg.keep_best && !f) throw std::invalid_argument("solver: best-iterate tracking needs an objective");

  RunReport report;
  report.seed = cfg.seed;
  report.stream = cfg.stream;
  report.iterations = plan.iterations;
  report.epsilon = plan.epsilon;
  report.step_f = plan.alpha;

  Iterate it(cfg.prox, cfg.simplex_refresh);
  UniformStream rng(cfg.seed, cfg.stream);
  detail::IterateMean mean(it);
  oracle.start(it);
  const std::size_t period = detail::trace_period(cfg, plan.iterations);

  for (std::size_t k = 1; k <= plan.iterations; ++k) {
    assert(it.feasible(1e-9));
    mean.include(it);
    if (f && (cfg.keep_best || (k - 1) % period == 0 || k == plan.iterations)) {
      const double fk = f(it.point());
      if ((k - 1) % period == 0 || k == plan.iterations) {
        report.trace.push_back({k, fk, std::numeric_limits<double>::quiet_NaN(), oracle.counters().touched_rows});
      }
      if (cfg.keep_best && (!report.x_best || fk < report.f_best)) {
        report.x_best.emplace(it.point().begin(), it.point().end());
        report.f_best = fk;
        report.best_iteration = k;
      }
    }
    const StochGrad g = oracle.sample(it, rng);
    ++report.counters.oracle_calls;
    assert(norm(g.entries, cfg.prox.dual_norm()) <= g.m_bound * (1.0 + 1e-12) + 1e-300);
    mean.before_step(it, g.entries);
    StepOutcome outcome;
    try {
      outcome = it.step(g.entries, plan.alpha);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(std::string(e.what()) + " at iteration " + std::to_string(k));
    }
    const OracleCounters before = oracle.counters();
    oracle.observe(it, outcome);
    detail::count_step(report.counters, before, oracle.counters());
  }
  report.x_bar = mean.mean(it);
  report.productive_steps = plan.iterations;
  detail::finish_counters(report.counters, oracle.counters(), rng);
  if (f) report.f_bar = f(report.x_bar);
  return report;
}

/// Switching scheme for f -> min subject to g(x) <= 0 on Q: step on f with
/// h_f while g(x^k) <= eps_g, otherwise step on g with h_g; average only the
/// productive iterates. `g_value(it)` must return the exact g at the iterate.
/// Throws NoProductiveSteps when no iterate was productive.
template <TrajectoryOracle F, TrajectoryOracle G, class GValue>
RunReport constrained_mirror_descent(const SolverConfig& cfg, F& f_oracle, G& g_oracle, GValue&& g_value,
                                     const Objective& f = {}) {
  detail::check_pairing(f_oracle, cfg.prox);
  detail::check_pairing(g_oracle, cfg.prox);
  const double eps_g = cfg.epsilon;
  const double m_g = cfg.M;
  const double m_f = cfg.M_f;
  if (!(eps_g > 0.0) || !(m_g > 0.0) || !(m_f > 0.0)) {
    throw std::invalid_argument("constrained solver: eps_g, M_g and M_f must be positive");
  }
  std::size_t n = cfg.horizon;
  if (n == 0) {
    const double radius = detail::default_radius(cfg);
    if (!(radius > 0.0)) throw std::invalid_argument("constrained solver: N cannot be derived without R");
    n = derive_horizon(eps_g, m_g, radius, true);
  }
  const double h_g = eps_g / (m_g * m_g);
  const double h_f = cfg.epsilon_f > 0.0 ? cfg.epsilon_f / (m_f * m_f) : eps_g / (m_f * m_g);

  RunReport report;
  report.seed = cfg.seed;
  report.stream = cfg.stream;
  report.iterations = n;
  report.epsilon = eps_g;
  report.step_f = h_f;
  report.step_g = h_g;

  Iterate it(cfg.prox, cfg.simplex_refresh);
  UniformStream rng(cfg.seed, cfg.stream);
  detail::IterateMean mean(it);
  f_oracle.start(it);
  g_oracle.start(it);
  const std::size_t period = detail::trace_period(cfg, n);
  auto touched = [&] { return f_oracle.counters().touched_rows + g_oracle.counters().touched_rows; };

  for (std::size_t k = 1; k <= n; ++k) {
    assert(it.feasible(1e-9));
    const double gk = g_value(static_cast<const Iterate&>(it));
    const bool productive = gk <= eps_g;
    const bool traced = (k - 1) % period == 0 || k == n;
    if (f && (traced || (cfg.keep_best && productive))) {
      const double fk = f(it.point());
      if (traced) report.trace.push_back({k, fk, gk, touched()});
      if (cfg.keep_best && productive && (!report.x_best || fk < report.f_best)) {
        report.x_best.emplace(it.point().begin(), it.point().end());
        report.f_best = fk;
        report.best_iteration = k;
      }
    }
    StochGrad g;
    double alpha;
    if (productive) {
      mean.include(it);
      ++report.productive_steps;
      g = f_oracle.sample(it, rng);
      alpha = h_f;
    } else {
      ++report.constraint_steps;
      g = g_oracle.sample(it, rng);
      alpha = h_g;
    }
    ++report.counters.oracle_calls;
    mean.before_step(it, g.entries);
    StepOutcome outcome;
    try {
      outcome = it.step(g.entries, alpha);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(std::string(e.what()) + " at iteration " + std::to_string(k));
    }
    const OracleCounters bf = f_oracle.counters();
    const OracleCounters bg = g_oracle.counters();
    f_oracle.observe(it, outcome);
    g_oracle.observe(it, outcome);
    const OracleCounters af = f_oracle.counters();
    const OracleCounters ag = g_oracle.counters();
    detail::count_step(report.counters,
                       {bf.touched_rows + bg.touched_rows, bf.path_updates + bg.path_updates, 0},
                       {af.touched_rows + ag.touched_rows, af.path_updates + ag.path_updates, 0});
  }
  const OracleCounters cf = f_oracle.counters();
  const OracleCounters cg = g_oracle.counters();
  detail::finish_counters(report.counters,
                          {cf.touched_rows + cg.touched_rows, cf.path_updates + cg.path_updates,
                           cf.full_rebuilds + cg.full_rebuilds},
                          rng);
  if (report.productive_steps == 0) throw NoProductiveSteps(std::move(report));
  report.x_bar = mean.mean(it);
  if (f) report.f_bar = f(report.x_bar);
  return report;
}

struct AmplifiedRun {
  std::size_t best = 0;
  double best_value = 0.0;
  std::vector<double> values;
  std::vector<RunReport> reports;
};

/// Runs ceil(log2(1/sigma)) independent trajectories (`run(stream)` for
/// stream = 0, 1, ...), evaluates f exactly at each output and returns the
/// minimizer (lowest stream on ties). Parallel execution gives the same
/// result as sequential execution.
template <class Trajectory, class Exact>
AmplifiedRun amplify(double sigma, Trajectory&& run, Exact&& f_exact, bool parallel = false) {
  const std::size_t t = trajectories_for_confidence(sigma);
  AmplifiedRun out;
  out.reports.resize(t);
  out.values.resize(t);
  auto one = [&](std::size_t s) {
    out.reports[s] = run(static_cast<std::uint64_t>(s));
    out.values[s] = f_exact(std::span<const double>(out.reports[s].x_bar));
  };
  if (parallel && t > 1) {
    std::vector<std::exception_ptr> errors(t);
    {
      std::vector<std::jthread> workers;
      workers.reserve(t);
      for (std::size_t s = 0; s < t; ++s) {
        workers.emplace_back([&, s] {
          try {
            one(s);
          } catch (...) {
            errors[s] = std::current_exception();
          }
        });
      }
    }
    for (const std::exception_ptr& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  } else {
    for (std::size_t s = 0; s < t; ++s) one(s);
  }
  for (std::size_t s = 1; s < t; ++s) {
    if (out.values[s] < out.values[out.best]) out.best = s;
  }
  out.best_value = out.values[out.best];
  return out;
}

}  // namespace sparsemirror
