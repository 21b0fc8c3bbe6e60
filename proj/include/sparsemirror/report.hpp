#pragma once

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sparsemirror/solvers.hpp"

namespace sparsemirror {

namespace detail {

inline std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

}  // namespace detail

using ReportFields = std::vector<std::pair<std::string, std::string>>;

/// "key: value" lines. Everything except wall_time_s is a deterministic
/// function of the run.
inline void write_report(std::ostream& out, const ReportFields& header, const RunReport& r, bool constrained,
                         double wall_time_s) {
  for (const auto& [k, v] : header) out << k << ": " << v << '\n';
  out << "seed: " << r.seed << '\n';
  out << "iterations: " << r.iterations << '\n';
  out << "epsilon: " << detail::format_real(r.epsilon) << '\n';
  out << "step_f: " << detail::format_real(r.step_f) << '\n';
  if (constrained) out << "step_g: " << detail::format_real(r.step_g) << '\n';
  out << "f_final: " << detail::format_real(r.f_bar) << '\n';
  if (constrained) {
    out << "g_final: " << detail::format_real(r.g_bar) << '\n';
    out << "productive_steps: " << r.productive_steps << '\n';
    out << "constraint_steps: " << r.constraint_steps << '\n';
  }
  if (r.x_best) {
    out << "f_best: " << detail::format_real(r.f_best) << '\n';
    out << "best_iteration: " << r.best_iteration << '\n';
  }
  out << "oracle_calls: " << r.counters.oracle_calls << '\n';
  out << "uniforms: " << r.counters.uniforms << '\n';
  out << "touched_rows: " << r.counters.touched_rows << '\n';
  out << "path_updates: " << r.counters.path_updates << '\n';
  out << "full_rebuilds: " << r.counters.full_rebuilds << '\n';
  out << "max_step_touched_rows: " << r.counters.max_step_touched_rows << '\n';
  out << "max_step_path_updates: " << r.counters.max_step_path_updates << '\n';
  out << "wall_time_s: " << detail::format_real(wall_time_s) << '\n';
}

/// Comma-separated trace: iteration,f,g,touched_rows (g empty when unconstrained).
inline void write_trace(std::ostream& out, const RunReport& r) {
  out << "iteration,f,g,touched_rows\n";
  for (const TraceRow& row : r.trace) {
    out << row.iteration << ',' << detail::format_real(row.f) << ',';
    if (!std::isnan(row.g)) out << detail::format_real(row.g);
    out << ',' << row.touched_rows << '\n';
  }
}

}  // namespace sparsemirror
