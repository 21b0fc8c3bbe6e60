// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sparsemirror/sparsemirror.hpp"
#include "test_helpers.hpp"

using namespace sparsemirror;
namespace th = sparsemirror::testing;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Exhaustive expectation equals the exact (sub)gradient.
Verdict unbiasedness() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  int pairs = 0;

  std::vector<PageRankProblem> chains;
  chains.emplace_back(th::from_dense({{0, 1}, {1, 0}}));
  chains.emplace_back(th::from_dense({{0, 0.5, 0.5}, {0, 0, 1}, {1, 0, 0}}));
  chains.emplace_back(th::from_dense({{0.5, 0.5, 0, 0}, {0, 0, 1, 0}, {0, 0.25, 0, 0.75}, {1, 0, 0, 0}}));
  chains.emplace_back(th::random_stochastic(5, 2, rng));
  chains.emplace_back(th::random_stochastic(6, 3, rng));
  for (const PageRankProblem& p : chains) {
    for (int point = 0; point < 3; ++point) {
      const std::vector<double> x = th::random_simplex_point(p.dimension(), rng);
      const std::vector<double> exact = th::dense_pagerank_gradient(th::to_dense(p.transition()), x);
      worst = std::max(worst, max_abs_deviation(expected_double_sample(p, x), exact));
      worst = std::max(worst, max_abs_deviation(expected_sum_randomization(p, x), exact));
      pairs += 2;
    }
  }

  std::vector<MaxFormProblem> forms;
  forms.push_back(MaxFormProblem::affine(th::from_dense({{-1, 1}}), std::vector<double>{0}));
  forms.push_back(MaxFormProblem::affine(th::from_dense({{2, -3, 5}, {1, 0, -1}}), std::vector<double>{0, 0.5}));
  forms.push_back(MaxFormProblem(th::from_dense({{1, -2, 0, 1}, {0, 3, -1, 0}, {-1, 0, 0, 2}}),
                                 {{RowFunctionKind::Absolute, 0.5, 1.0},
                                  {RowFunctionKind::Hinge, -0.2, 2.0},
                                  {RowFunctionKind::Affine, 0.1, 1.5}}));
  for (std::size_t m : {5u, 6u}) {
    const SparseMatrixDual a = th::random_small(m, 6, 0.6, rng);
    std::vector<double> b(m);
    std::normal_distribution<double> v(0.0, 1.0);
    for (double& e : b) e = v(rng);
    forms.push_back(MaxFormProblem::affine(a, b));
  }
  std::normal_distribution<double> v(0.0, 1.0);
  for (const MaxFormProblem& p : forms) {
    const std::vector<std::size_t> bounds =
        p.rows() > 1 ? std::vector<std::size_t>{0, (p.rows() + 1) / 2, p.rows()} : std::vector<std::size_t>{0, 1};
    const BlockSumProblem b(p, bounds);
    for (int point = 0; point < 3; ++point) {
      std::vector<double> x(p.dimension());
      for (double& e : x) e = v(rng);
      const std::vector<double> exact = to_dense(exact_subgradient(p, x), p.dimension());
      worst = std::max(worst, max_abs_deviation(expected_two_spike(p, x), exact));
      worst = std::max(worst, max_abs_deviation(expected_blocksum(b, x),
                                                to_dense(exact_subgradient(b, x), p.dimension())));
      pairs += 2;
    }
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-12 && t < 1.0,
          fmt("max deviation %.3g over %d oracle/instance/point checks (%zu PageRank, %zu max-form instances), %.3f s",
              worst, pairs, chains.size(), forms.size(), t)};
}

// 2. Double-sample samples stay within the l-infinity bound 2.
Verdict double_sample_bound() {
  std::mt19937_64 gen(7);
  const PageRankProblem p(th::random_stochastic(200, 5, gen));
  UniformStream rng(7);
  std::size_t violations = 0, draws = 0;
  double largest = 0.0;
  for (int point = 0; point < 1000; ++point) {
    const std::vector<double> x = th::random_simplex_point(200, gen);
    for (int d = 0; d < 1000; ++d) {
      const StochGrad g = pagerank_double_sample(p, x, rng);
      const double n = norm(g.entries, DualNorm::LInf);
      largest = std::max(largest, n);
      violations += n > 2.0 || g.m_bound > 2.0;
      ++draws;
    }
  }
  return {violations == 0, fmt("%zu draws at n = 200, max |g|_inf = %.3g, %zu violations", draws, largest, violations)};
}

RunReport pagerank_run(const PageRankProblem& p, double eps, std::uint64_t seed, std::uint64_t stream = 0,
                       std::size_t horizon = 0) {
  DoubleSampleOracle o(p);
  SolverConfig cfg{.prox = ProxSetup::entropy_simplex(p.dimension()), .M = 2.0, .seed = seed, .stream = stream};
  if (horizon == 0) {
    cfg.epsilon = eps;
  } else {
    cfg.horizon = horizon;
  }
  return mirror_descent(cfg, o, [&](std::span<const double> x) { return pagerank_objective(p, x); });
}

// 3. PageRank convergence at N = ceil(2 M^2 ln n / eps^2).
Verdict pagerank_convergence() {
  std::mt19937_64 gen(31);
  const PageRankProblem cycle(th::from_dense({{0, 1}, {1, 0}}));
  const PageRankProblem chain(th::random_stochastic(100, 3, gen));
  const double eps = 0.05;
  bool pass = true;
  std::string detail;
  for (const PageRankProblem* p : {&cycle, &chain}) {
    const std::size_t n = p->dimension();
    const std::size_t want = ceil_count(2.0 * 4.0 * std::log(static_cast<double>(n)) / (eps * eps));
    int ok = 0;
    double worst = 0.0;
    std::size_t iterations = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const RunReport r = pagerank_run(*p, eps, seed);
      iterations = r.iterations;
      ok += r.f_bar <= eps;
      worst = std::max(worst, r.f_bar);
    }
    pass = pass && ok >= 18 && iterations == want;
    detail += fmt("%sn = %zu: N = %zu, %d/20 seeds with f <= %.2f (worst %.3g)", detail.empty() ? "" : "; ", n,
                  iterations, ok, eps, worst);
  }
  return {pass, detail};
}

// 4. Switching scheme on the LP toy.
Verdict constrained_lp() {
  const double eps_g = 0.05, m = std::sqrt(2.0);
  int f_ok = 0, feasible = 0, runs_with_productive = 0;
  double worst_g = -1.0, worst_f = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    FunctionOracle fo = constant_oracle({1, 1});
    FunctionOracle go = constant_oracle({-1, 0});
    const SolverConfig cfg{.prox = ProxSetup::euclidean_orthant({0.5, 0.5}),
                           .epsilon = eps_g,
                           .M = m,
                           .M_f = m,
                           .radius = 0.5,
                           .seed = seed};
    const RunReport r = constrained_mirror_descent(
        cfg, fo, go, [](const Iterate& it) { return 1.0 - it.point()[0]; },
        [](std::span<const double> x) { return x[0] + x[1]; });
    if (r.productive_steps == 0) continue;
    ++runs_with_productive;
    const double g = 1.0 - r.x_bar[0];
    const double eps_f = (cfg.M_f / cfg.M) * eps_g;
    worst_g = std::max(worst_g, g);
    worst_f = std::max(worst_f, r.f_bar - 1.0);
    const bool feas = g <= eps_g + 1e-12;
    feasible += feas;
    f_ok += feas && r.f_bar - 1.0 <= eps_f + 0.02;
  }
  return {f_ok >= 9 && feasible == runs_with_productive && runs_with_productive == 10,
          fmt("N = %zu; %d/10 seeds meet both bounds, feasible %d/%d (max g = %.4g, max f - f* = %.4g)",
              derive_horizon(eps_g, m, 0.5, true), f_ok, feasible, runs_with_productive, worst_g, worst_f)};
}

struct CounterRun {
  RunReport report;
  std::size_t s_m;
  std::size_t depth;
};

CounterRun counter_run(std::size_t m, std::size_t n, std::size_t per_column, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const SparseMatrixDual a = th::random_column_sparse(m, n, per_column, gen);
  std::vector<double> b(m);
  std::normal_distribution<double> v(0.0, 1.0);
  for (double& e : b) e = v(gen);
  const MaxFormProblem p = MaxFormProblem::affine(a, b);
  TwoSpikeOracle o(p);
  const SolverConfig cfg{
      .prox = ProxSetup::euclidean_free(n), .epsilon = 0.01, .M = p.max_row_l1(), .horizon = 10000, .seed = seed};
  RunReport r = mirror_descent(cfg, o);
  return {std::move(r), a.max_col_nnz(), static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(m))))};
}

// 5. Per-step work of the two-spike oracle scales with s_m, not with m or n.
Verdict sparsity_counters() {
  const CounterRun base = counter_run(10000, 10000, 10, 5);
  const CounterRun wide = counter_run(20000, 20000, 10, 6);
  const RunCounters& c = base.report.counters;
  const bool rows_ok = c.max_step_touched_rows <= 2 * base.s_m;
  const bool path_ok = c.max_step_path_updates <= 2 * base.s_m * base.depth;
  const double mean_base = static_cast<double>(c.touched_rows) / static_cast<double>(base.report.iterations);
  const double mean_wide =
      static_cast<double>(wide.report.counters.touched_rows) / static_cast<double>(wide.report.iterations);
  const double change = std::abs(mean_wide - mean_base) / mean_base;
  return {rows_ok && path_ok && change < 0.05 && wide.s_m == base.s_m,
          fmt("s_m = %zu: max rows/step %zu <= %zu, max path updates/step %zu <= %zu; mean rows/step %.3f vs %.3f "
              "after doubling (%.2f%% change)",
              base.s_m, c.max_step_touched_rows, 2 * base.s_m, c.max_step_path_updates, 2 * base.s_m * base.depth,
              mean_base, mean_wide, 100.0 * change)};
}

// 6. Tracker against from-scratch recomputation.
Verdict tracker_fuzz() {
  std::mt19937_64 rng(66);
  std::normal_distribution<double> v(0.0, 1.0);
  std::uniform_int_distribution<int> kind(0, 2);
  std::size_t failures = 0, steps = 0;
  for (int instance = 0; instance < 5; ++instance) {
    const std::size_t m = 20 + rng() % 81, n = 20 + rng() % 81;
    std::vector<RowFunction> f(m);
    for (RowFunction& r : f) r = {static_cast<RowFunctionKind>(kind(rng)), v(rng), 0.5 + std::abs(v(rng))};
    const MaxFormProblem p(th::random_small(m, n, 0.08, rng), f);
    std::vector<double> x(n);
    for (double& e : x) e = v(rng);
    ArgmaxTracker t(p, x, {}, 1000);
    std::uniform_int_distribution<std::size_t> col(0, n - 1);
    std::uniform_int_distribution<int> count(0, 3);
    for (int s = 0; s < 10000; ++s, ++steps) {
      std::vector<CoordinateDelta> d(count(rng));
      for (CoordinateDelta& c : d) {
        c = {col(rng), v(rng)};
        x[c.index] += c.delta;
      }
      const RowMax got = t.notify(d);
      double best = -INFINITY;
      for (std::size_t k = 0; k < m; ++k) best = std::max(best, p.function(k).value(p.matrix().row_dot(k, x)));
      const double tol = 1e-9 * std::max(1.0, std::abs(best));
      const double at_index = p.function(got.row).value(p.matrix().row_dot(got.row, x));
      failures += std::abs(got.value - best) > tol || std::abs(at_index - best) > tol;
    }
  }
  return {failures == 0, fmt("%zu notify steps on 5 random instances, %zu mismatches", steps, failures)};
}

// 7. Amplification selects the best trajectory and meets the 2 eps guarantee.
Verdict amplification() {
  const PageRankProblem p(th::from_dense({{0, 1}, {1, 0}}));
  const std::size_t horizon = 100;
  std::vector<double> single;
  for (std::uint64_t seed = 1; seed <= 401; ++seed) single.push_back(pagerank_run(p, 0.0, seed, 0, horizon).f_bar);
  std::nth_element(single.begin(), single.begin() + 200, single.end());
  const double two_eps = single[200];

  const auto f = [&](std::span<const double> x) { return pagerank_objective(p, x); };
  int successes = 0;
  bool selection = true;
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    const AmplifiedRun a = amplify(
        1.0 / 16, [&](std::uint64_t stream) { return pagerank_run(p, 0.0, 10000 + trial, stream, horizon); }, f, true);
    selection = selection && a.values.size() == 4 &&
                a.best_value == *std::min_element(a.values.begin(), a.values.end()) &&
                a.values[a.best] == a.best_value;
    successes += a.best_value <= two_eps;
  }
  return {selection && successes >= 45,
          fmt("2 eps = %.3g (median of 401 single runs, N = %zu); %d/50 amplified trials with f <= 2 eps; "
              "selection invariant %s",
              two_eps, horizon, successes, selection ? "held" : "violated")};
}

// 8. Entropy prox keeps x on the simplex and Z in sync.
Verdict entropy_invariants() {
  std::mt19937_64 rng(88);
  const std::size_t n = 50;
  Iterate it(ProxSetup::entropy_simplex(n));
  std::uniform_int_distribution<std::size_t> idx(0, n - 1);
  std::uniform_int_distribution<int> support(1, 3);
  std::normal_distribution<double> v(0.0, 5.0);
  std::uniform_real_distribution<double> alpha(0.001, 1.0);
  double worst_sum = 0.0, worst_z = 0.0, min_x = 1.0;
  for (int step = 0; step < 100000; ++step) {
    SparseVector g;
    for (int s = support(rng); s > 0; --s) g.push_back({idx(rng), v(rng)});
    it.step(g, alpha(rng));
    double sum = 0.0;
    for (double x : it.point()) {
      sum += x;
      min_x = std::min(min_x, x);
    }
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    const SimplexState& s = it.simplex_state();
    worst_z = std::max(worst_z, std::abs(s.log_normalizer() - s.dense_log_normalizer()));
  }
  return {worst_sum <= 1e-12 && min_x >= 0.0 && worst_z <= 1e-10,
          fmt("1e5 steps: max |sum x - 1| = %.3g, min x = %.3g, max |log Z - log Z_dense| = %.3g, %zu rebases",
              worst_sum, min_x, worst_z, it.simplex_state().rebase_count())};
}

// 9. Identical spec and seed give byte-identical traces.
Verdict replay() {
  std::mt19937_64 gen(9);
  const PageRankProblem pr(th::random_stochastic(30, 3, gen));
  const MaxFormProblem mf = MaxFormProblem::affine(th::random_column_sparse(200, 100, 4, gen), std::vector<double>(200, 0.1));
  std::vector<std::function<std::string()>> specs = {
      [&] {
        const RunReport r = pagerank_run(pr, 0.1, 5);
        std::ostringstream o;
        write_trace(o, r);
        return o.str();
      },
      [&] {
        SumRandomizationOracle o(pr);
        const SolverConfig cfg{.prox = ProxSetup::entropy_simplex(30), .epsilon = 0.1, .M = 2.0, .seed = 5, .trace_every = 1};
        const RunReport r = mirror_descent(cfg, o, [&](std::span<const double> x) { return pagerank_objective(pr, x); });
        std::ostringstream out;
        write_trace(out, r);
        return out.str();
      },
      [&] {
        TwoSpikeOracle o(mf);
        const SolverConfig cfg{.prox = ProxSetup::euclidean_free(100), .epsilon = 0.05, .M = mf.max_row_l1(),
                               .horizon = 5000, .seed = 5, .trace_every = 1};
        const RunReport r = mirror_descent(cfg, o, [&](std::span<const double> x) { return maxform_objective(mf, x); });
        std::ostringstream out;
        write_trace(out, r);
        return out.str();
      }};
  int identical = 0;
  std::size_t bytes = 0;
  for (const auto& run : specs) {
    const std::string a = run(), b = run();
    identical += a == b && !a.empty();
    bytes += a.size();
  }
  return {identical == static_cast<int>(specs.size()),
          fmt("%d/%zu specs replayed byte-identically (%zu trace bytes)", identical, specs.size(), bytes)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Verdict (*)()>> checks = {
      {"oracle unbiasedness", unbiasedness},        {"double-sample bound", double_sample_bound},
      {"pagerank convergence", pagerank_convergence}, {"constrained scheme", constrained_lp},
      {"sparsity counters", sparsity_counters},     {"argmax tracker fuzz", tracker_fuzz},
      {"amplification", amplification},             {"entropy prox invariants", entropy_invariants},
      {"replay", replay}};
  int failed = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v{false, ""};
    try {
      v = checks[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("AC%zu %s  %s: %s [%.2f s]\n", i + 1, v.pass ? "PASS" : "FAIL", checks[i].first, v.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
