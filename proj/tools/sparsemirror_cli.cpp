#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sparsemirror/sparsemirror.hpp"

using namespace sparsemirror;

namespace {

constexpr std::size_t kVerifyLimit = 8;

const char* kCompatibility = R"(Supported pairings:
  problem         oracle                    prox
  pagerank        double-sample, sum-rand   entropy
  pagerank        deterministic             entropy
  maxform         two-spike, deterministic  euclidean-free, euclidean-orthant,
                                            entropy (affine rows with b = 0 only)
  blocksum        two-spike, deterministic  as maxform
  constrained-lp  two-spike, deterministic  as maxform; the oracle is used for
                  (for the constraints)     the constraint max_k(A_k x - b_k)
Defaults: prox entropy for pagerank, euclidean-free for maxform/blocksum,
euclidean-orthant for constrained-lp. --M defaults to the oracle's bound
(2 for PageRank oracles). The seed falls back to $SPARSEMIRROR_SEED.)";

struct RunSpec {
  std::string problem = "pagerank";
  std::string matrix;
  std::string rhs;
  std::string objective;
  std::string eq_matrix;
  std::string eq_rhs;
  std::string point;
  std::string oracle;
  std::string prox;
  std::string row_fn = "affine";
  std::string anchor = "1";
  std::string trace_path;
  std::string report_path;
  double eps = 0.0;
  double eps_f = 0.0;
  double sigma = 0.0;
  double M = 0.0;
  double R = 0.0;
  std::size_t iterations = 0;
  std::size_t trace_every = 0;
  std::size_t blocks = 0;
  std::optional<std::uint64_t> seed;
};

std::uint64_t resolve_seed(const RunSpec& s) {
  if (s.seed) return *s.seed;
  if (const char* env = std::getenv("SPARSEMIRROR_SEED")) {
    try {
      std::size_t used = 0;
      const std::uint64_t v = std::stoull(env, &used);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw std::invalid_argument(std::string("SPARSEMIRROR_SEED is not an unsigned integer: '") + env + "'");
  }
  return 0;
}

std::vector<double> parse_list(const std::string& text, std::size_t n, const std::string& what) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw std::invalid_argument(what + ": cannot parse '" + item + "'");
    }
  }
  if (out.size() == 1 && n > 1) out.assign(n, out[0]);
  if (out.size() != n) {
    throw std::invalid_argument(what + ": expected " + std::to_string(n) + " values, got " +
                                std::to_string(out.size()));
  }
  return out;
}

ProxSetup make_prox(const RunSpec& s, std::size_t n) {
  std::string kind = s.prox;
  if (kind.empty()) {
    kind = s.problem == "pagerank" ? "entropy" : (s.problem == "constrained-lp" ? "euclidean-orthant" : "euclidean-free");
  }
  if (kind == "entropy") return ProxSetup::entropy_simplex(n);
  if (kind == "euclidean-free") return ProxSetup::euclidean_free(n);
  if (kind == "euclidean-orthant") return ProxSetup::euclidean_orthant(parse_list(s.anchor, n, "--anchor"));
  throw std::invalid_argument("unknown prox '" + kind + "'");
}

std::vector<double> read_offsets(const RunSpec& s, std::size_t m) {
  if (s.rhs.empty()) return std::vector<double>(m, 0.0);
  std::vector<double> b = read_vector_market(s.rhs);
  if (b.size() != m) {
    throw std::invalid_argument("--rhs has " + std::to_string(b.size()) + " entries for " + std::to_string(m) +
                                " rows");
  }
  return b;
}

MaxFormProblem make_maxform(const RunSpec& s, SparseMatrixDual a) {
  const std::vector<double> b = read_offsets(s, a.rows());
  const RowFunctionKind kind = parse_row_function_kind(s.row_fn);
  std::vector<RowFunction> f(a.rows());
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = {kind, b[k], 1.0};
  return MaxFormProblem(std::move(a), std::move(f));
}

std::vector<std::size_t> even_blocks(std::size_t m, std::size_t r) {
  if (r == 0) r = 1;
  if (r > m) throw std::invalid_argument("--blocks " + std::to_string(r) + " exceeds the " + std::to_string(m) + " rows");
  std::vector<std::size_t> bounds(r + 1);
  for (std::size_t i = 0; i <= r; ++i) bounds[i] = i * m / r;
  return bounds;
}

/// Oracle bound for the tracker-driven oracles; valid in both dual norms.
double maxform_bound(const MaxFormProblem& p, const std::string& oracle) {
  return p.lipschitz() * (oracle == "two-spike" ? p.max_row_l1() : p.max_row_l2());
}

void require_oracle(const std::string& oracle, std::initializer_list<const char*> allowed, const std::string& problem) {
  for (const char* a : allowed) {
    if (oracle == a) return;
  }
  std::string list;
  for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
  throw std::invalid_argument("incompatible pairing: problem " + problem + " takes oracle " + list + ", got '" +
                              oracle + "'");
}

struct Outcome {
  RunReport report;
  ReportFields extra;
};

/// Runs one trajectory, or ceil(log2(1/sigma)) of them when sigma is set.
template <class MakeOracle>
Outcome run_unconstrained(const RunSpec& s, SolverConfig cfg, MakeOracle make, const Objective& f) {
  if (s.sigma == 0.0) {
    auto oracle = make();
    return {mirror_descent(cfg, oracle, f), {}};
  }
  const auto trajectory = [&](std::uint64_t stream) {
    SolverConfig c = cfg;
    c.stream = stream;
    auto oracle = make();
    return mirror_descent(c, oracle, f);
  };
  AmplifiedRun amp = amplify(s.sigma, trajectory, f, true);
  std::ostringstream values;
  values << std::setprecision(17);
  for (std::size_t t = 0; t < amp.values.size(); ++t) values << (t ? " " : "") << amp.values[t];
  Outcome out{std::move(amp.reports[amp.best]), {}};
  out.extra = {{"sigma", detail::format_real(s.sigma)},
               {"trajectories", std::to_string(amp.values.size())},
               {"selected_stream", std::to_string(amp.best)},
               {"trajectory_f", values.str()}};
  return out;
}

SolverConfig base_config(const RunSpec& s, ProxSetup prox, ReportFields& header) {
  header.push_back({"prox", to_string(prox.kind())});
  SolverConfig cfg{.prox = std::move(prox)};
  cfg.epsilon = s.eps;
  cfg.epsilon_f = s.eps_f;
  cfg.radius = s.R;
  cfg.horizon = s.iterations;
  cfg.seed = resolve_seed(s);
  cfg.trace_every = s.trace_every;
  return cfg;
}

Outcome solve_pagerank(const RunSpec& s, ReportFields& header) {
  const PageRankProblem p(read_matrix_market(s.matrix));
  const std::string oracle = s.oracle.empty() ? "double-sample" : s.oracle;
  require_oracle(oracle, {"double-sample", "sum-rand", "deterministic"}, s.problem);
  SolverConfig cfg = base_config(s, make_prox(s, p.dimension()), header);
  cfg.M = s.M > 0.0 ? s.M : 2.0;
  header.push_back({"oracle", oracle});
  header.push_back({"M", detail::format_real(cfg.M)});
  const Objective f = [&](std::span<const double> x) { return pagerank_objective(p, x); };
  if (oracle == "double-sample") return run_unconstrained(s, cfg, [&] { return DoubleSampleOracle(p); }, f);
  if (oracle == "sum-rand") return run_unconstrained(s, cfg, [&] { return SumRandomizationOracle(p); }, f);
  cfg.keep_best = true;
  return run_unconstrained(
      s, cfg, [&] { return FunctionOracle([&](std::span<const double> x) { return exact_subgradient(p, x); }); }, f);
}

Outcome solve_maxform(const RunSpec& s, ReportFields& header, bool blocksum) {
  const MaxFormProblem p = make_maxform(s, read_matrix_market(s.matrix));
  const std::string oracle = s.oracle.empty() ? "two-spike" : s.oracle;
  require_oracle(oracle, {"two-spike", "deterministic"}, s.problem);
  SolverConfig cfg = base_config(s, make_prox(s, p.dimension()), header);
  cfg.M = s.M > 0.0 ? s.M : maxform_bound(p, oracle);
  header.push_back({"oracle", oracle});
  header.push_back({"row_fn", s.row_fn});
  header.push_back({"M", detail::format_real(cfg.M)});
  cfg.keep_best = oracle == "deterministic";
  if (!blocksum) {
    const Objective f = [&](std::span<const double> x) { return maxform_objective(p, x); };
    if (oracle == "two-spike") return run_unconstrained(s, cfg, [&] { return TwoSpikeOracle(p); }, f);
    return run_unconstrained(s, cfg, [&] { return ActiveRowOracle(p); }, f);
  }
  const BlockSumProblem b(p, even_blocks(p.rows(), s.blocks));
  header.push_back({"blocks", std::to_string(b.blocks())});
  const Objective f = [&](std::span<const double> x) { return blocksum_objective(b, x); };
  if (oracle == "two-spike") return run_unconstrained(s, cfg, [&] { return TwoSpikeOracle(b); }, f);
  return run_unconstrained(s, cfg, [&] { return ActiveRowOracle(b); }, f);
}

/// Stacks A, C and -C so that Ax <= b, Cx = d becomes one max-form constraint.
MaxFormProblem lp_constraints(const RunSpec& s) {
  const SparseMatrixDual a = read_matrix_market(s.matrix);
  std::vector<double> b = read_offsets(s, a.rows());
  std::vector<Triplet> t = a.triplets();
  std::size_t rows = a.rows();
  if (!s.eq_matrix.empty() || !s.eq_rhs.empty()) {
    if (s.eq_matrix.empty() || s.eq_rhs.empty()) throw std::invalid_argument("--eq-matrix and --eq-rhs go together");
    const SparseMatrixDual c = read_matrix_market(s.eq_matrix);
    const std::vector<double> d = read_vector_market(s.eq_rhs);
    if (c.cols() != a.cols()) throw std::invalid_argument("--eq-matrix column count differs from --matrix");
    if (d.size() != c.rows()) throw std::invalid_argument("--eq-rhs size differs from --eq-matrix rows");
    for (const Triplet& e : c.triplets()) {
      t.push_back({rows + e.row, e.col, e.value});
      t.push_back({rows + c.rows() + e.row, e.col, -e.value});
    }
    b.insert(b.end(), d.begin(), d.end());
    for (double v : d) b.push_back(-v);
    rows += 2 * c.rows();
  }
  return MaxFormProblem::affine(SparseMatrixDual::from_triplets(t, rows, a.cols()), b);
}

Outcome solve_constrained(const RunSpec& s, ReportFields& header) {
  if (s.sigma != 0.0) throw std::invalid_argument("--sigma is not available for constrained-lp");
  if (s.objective.empty()) throw std::invalid_argument("constrained-lp needs --objective");
  const MaxFormProblem g = lp_constraints(s);
  const std::vector<double> c = read_vector_market(s.objective);
  if (c.size() != g.dimension()) throw std::invalid_argument("--objective size differs from the matrix columns");
  const std::string oracle = s.oracle.empty() ? "two-spike" : s.oracle;
  require_oracle(oracle, {"two-spike", "deterministic"}, s.problem);

  SolverConfig cfg = base_config(s, make_prox(s, g.dimension()), header);
  cfg.M = s.M > 0.0 ? s.M : maxform_bound(g, oracle);
  SparseVector cs;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] != 0.0) cs.push_back({i, c[i]});
  }
  cfg.M_f = norm(cs, cfg.prox.dual_norm());
  if (!(cfg.M_f > 0.0)) throw std::invalid_argument("--objective must be nonzero");
  header.push_back({"oracle", oracle});
  header.push_back({"M_g", detail::format_real(cfg.M)});
  header.push_back({"M_f", detail::format_real(cfg.M_f)});
  header.push_back({"constraint_rows", std::to_string(g.rows())});

  const Objective f = [&](std::span<const double> x) {
    double v = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) v += c[i] * x[i];
    return v;
  };
  FunctionOracle f_oracle = constant_oracle(c);
  auto run = [&](auto& g_oracle) {
    RunReport r = constrained_mirror_descent(
        cfg, f_oracle, g_oracle, [&](const Iterate& it) { return g_oracle.objective(it); }, f);
    r.g_bar = maxform_objective(g, r.x_bar);
    return r;
  };
  if (oracle == "two-spike") {
    TwoSpikeOracle o(g);
    return {run(o), {}};
  }
  ActiveRowOracle o(g);
  return {run(o), {}};
}

int cmd_solve(const RunSpec& s) {
  ReportFields header{{"command", "solve"}, {"problem", s.problem}, {"matrix", s.matrix}};
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  bool constrained = false;
  if (s.problem == "pagerank") {
    out = solve_pagerank(s, header);
  } else if (s.problem == "maxform" || s.problem == "blocksum") {
    out = solve_maxform(s, header, s.problem == "blocksum");
  } else {
    constrained = true;
    try {
      out = solve_constrained(s, header);
    } catch (const NoProductiveSteps& e) {
      std::cerr << "sparsemirror: " << e.what() << '\n';
      return 3;
    }
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  header.insert(header.end(), out.extra.begin(), out.extra.end());

  if (!s.trace_path.empty()) {
    std::ofstream trace(s.trace_path);
    if (!trace) throw std::runtime_error("cannot write trace file '" + s.trace_path + "'");
    write_trace(trace, out.report);
  }
  if (s.report_path.empty()) {
    write_report(std::cout, header, out.report, constrained, wall);
  } else {
    std::ofstream report(s.report_path);
    if (!report) throw std::runtime_error("cannot write report file '" + s.report_path + "'");
    write_report(report, header, out.report, constrained, wall);
  }
  return 0;
}

void check_size(std::size_t m, std::size_t n) {
  if (m > kVerifyLimit || n > kVerifyLimit) {
    throw std::invalid_argument("instance too large for exhaustive enumeration: m = " + std::to_string(m) +
                                ", n = " + std::to_string(n) + " (limit " + std::to_string(kVerifyLimit) + ")");
  }
}

std::vector<double> verify_point(const RunSpec& s, std::size_t n, bool simplex) {
  if (!s.point.empty()) {
    std::vector<double> x = read_vector_market(s.point);
    if (x.size() != n) throw std::invalid_argument("--point size differs from the matrix columns");
    return x;
  }
  // a generic point: distinct coordinates, on the simplex when required
  std::vector<double> x(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += x[i] = static_cast<double>(i + 1);
  for (double& v : x) v = simplex ? v / total : v / static_cast<double>(n + 1);
  return x;
}

int cmd_verify(const RunSpec& s) {
  const SparseMatrixDual a = read_matrix_market(s.matrix);
  check_size(a.rows(), a.cols());
  std::vector<double> expected, exact;
  std::string oracle = s.oracle;
  if (s.problem == "pagerank") {
    if (oracle.empty()) oracle = "double-sample";
    require_oracle(oracle, {"double-sample", "sum-rand"}, s.problem);
    const PageRankProblem p(a);
    const std::vector<double> x = verify_point(s, p.dimension(), true);
    expected = oracle == "double-sample" ? expected_double_sample(p, x) : expected_sum_randomization(p, x);
    exact = to_dense(exact_subgradient(p, x), p.dimension());
  } else if (s.problem == "maxform" || s.problem == "blocksum") {
    if (oracle.empty()) oracle = "two-spike";
    require_oracle(oracle, {"two-spike"}, s.problem);
    const MaxFormProblem p = make_maxform(s, a);
    const std::vector<double> x = verify_point(s, p.dimension(), false);
    if (s.problem == "maxform") {
      expected = expected_two_spike(p, x);
      exact = to_dense(exact_subgradient(p, x), p.dimension());
    } else {
      const BlockSumProblem b(p, even_blocks(p.rows(), s.blocks));
      expected = expected_blocksum(b, x);
      exact = to_dense(exact_subgradient(b, x), p.dimension());
    }
  } else {
    throw std::invalid_argument("verify-oracle supports pagerank, maxform and blocksum");
  }
  const double dev = max_abs_deviation(expected, exact);
  const bool ok = dev <= 1e-12;
  std::cout << "problem: " << s.problem << "\noracle: " << oracle << "\nmax_abs_deviation: " << std::setprecision(17)
            << dev << "\nresult: " << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? 0 : 1;
}

void add_problem_options(CLI::App* cmd, RunSpec& s) {
  cmd->add_option("--problem", s.problem, "Problem kind")
      ->check(CLI::IsMember({"pagerank", "maxform", "blocksum", "constrained-lp"}));
  cmd->add_option("--matrix", s.matrix, "Matrix Market file (P, A)")->required();
  cmd->add_option("--rhs", s.rhs, "Offsets b as a Matrix Market vector");
  cmd->add_option("--oracle", s.oracle, "Gradient oracle")
      ->check(CLI::IsMember({"double-sample", "sum-rand", "two-spike", "deterministic"}));
  cmd->add_option("--row-fn", s.row_fn, "Row function sigma_k: affine, abs or hinge")
      ->check(CLI::IsMember({"affine", "abs", "hinge"}));
  cmd->add_option("--blocks", s.blocks, "Number of contiguous row blocks (blocksum)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse randomized mirror descent"};
  app.footer(kCompatibility);
  app.require_subcommand(1);
  RunSpec spec;

  CLI::App* solve = app.add_subcommand("solve", "Run mirror descent and write a report");
  add_problem_options(solve, spec);
  solve->add_option("--objective", spec.objective, "Objective vector c (constrained-lp)");
  solve->add_option("--eq-matrix", spec.eq_matrix, "Equality constraints C (constrained-lp)");
  solve->add_option("--eq-rhs", spec.eq_rhs, "Equality right-hand side d (constrained-lp)");
  solve->add_option("--prox", spec.prox, "Prox setup")
      ->check(CLI::IsMember({"entropy", "euclidean-free", "euclidean-orthant"}));
  solve->add_option("--anchor", spec.anchor, "Orthant start point: one value or a comma list");
  solve->add_option("--eps", spec.eps, "Target accuracy (eps_g for constrained-lp)")->check(CLI::PositiveNumber);
  solve->add_option("--eps-f", spec.eps_f, "Separate objective accuracy (constrained-lp)")->check(CLI::PositiveNumber);
  solve->add_option("--sigma", spec.sigma, "Confidence level; runs ceil(log2(1/sigma)) trajectories")
      ->check(CLI::Range(0.0, 1.0));
  solve->add_option("--seed", spec.seed, "Master seed (default $SPARSEMIRROR_SEED, else 0)");
  solve->add_option("--M", spec.M, "Oracle bound override")->check(CLI::PositiveNumber);
  solve->add_option("--R", spec.R, "Distance bound R, R^2 >= d(x*)")->check(CLI::PositiveNumber);
  solve->add_option("--iterations", spec.iterations, "Iteration budget N");
  solve->add_option("--trace", spec.trace_path, "Write a CSV trace here");
  solve->add_option("--trace-every", spec.trace_every, "Trace period (default max(1, N/1000))");
  solve->add_option("--report", spec.report_path, "Write the report here instead of stdout");

  CLI::App* verify = app.add_subcommand("verify-oracle", "Exhaustive unbiasedness check on a small instance");
  add_problem_options(verify, spec);
  verify->add_option("--point", spec.point, "Evaluation point as a Matrix Market vector");

  CLI11_PARSE(app, argc, argv);
  try {
    if (solve->parsed()) return cmd_solve(spec);
    return cmd_verify(spec);
  } catch (const std::exception& e) {
    std::cerr << "sparsemirror: error: " << e.what() << '\n';
    return 1;
  }
}
