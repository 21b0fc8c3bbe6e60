#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsemirror/sparse_matrix.hpp"

namespace sparsemirror {

namespace detail {

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

struct MatrixMarketHeader {
  bool coordinate = true;
};

inline MatrixMarketHeader parse_banner(const std::string& line, const std::string& source) {
  std::istringstream in(line);
  std::string banner, object, format, field, symmetry;
  in >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket") {
    throw std::runtime_error(source + ": missing %%MatrixMarket banner");
  }
  object = lowercase(object);
  format = lowercase(format);
  field = lowercase(field);
  symmetry = lowercase(symmetry);
  if (object != "matrix") throw std::runtime_error(source + ": unsupported object '" + object + "'");
  if (format != "coordinate" && format != "array") {
    throw std::runtime_error(source + ": unsupported format '" + format + "'");
  }
  if (field != "real" && field != "integer") {
    throw std::runtime_error(source + ": unsupported field '" + field + "' (real or integer only)");
  }
  if (symmetry != "general") {
    throw std::runtime_error(source + ": unsupported symmetry '" + symmetry + "' (general only)");
  }
  return {format == "coordinate"};
}

/// Next line that is neither blank nor a '%' comment.
inline bool next_data_line(std::istream& in, std::string& line, std::size_t& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '%') continue;
    return true;
  }
  return false;
}

}  // namespace detail

namespace detail {

inline SparseMatrixDual read_coordinate_body(std::istream& in, const std::string& source,
                                             std::size_t& line_no) {
  std::string line;
  if (!next_data_line(in, line, line_no)) throw std::runtime_error(source + ": missing size line");
  std::size_t m = 0, n = 0, nnz = 0;
  {
    std::istringstream size_line(line);
    if (!(size_line >> m >> n >> nnz)) {
      throw std::runtime_error(source + ":" + std::to_string(line_no) + ": malformed size line");
    }
  }
  std::vector<Triplet> triplets;
  triplets.reserve(nnz);
  while (triplets.size() < nnz) {
    if (!next_data_line(in, line, line_no)) {
      throw std::runtime_error(source + ": expected " + std::to_string(nnz) + " entries, found " +
                               std::to_string(triplets.size()));
    }
    std::istringstream entry(line);
    long long i = 0, j = 0;
    double v = 0.0;
    if (!(entry >> i >> j >> v)) {
      throw std::runtime_error(source + ":" + std::to_string(line_no) + ": malformed entry");
    }
    if (i < 1 || j < 1 || static_cast<std::size_t>(i) > m || static_cast<std::size_t>(j) > n) {
      throw std::runtime_error(source + ":" + std::to_string(line_no) + ": index (" +
                               std::to_string(i) + ", " + std::to_string(j) + ") out of range");
    }
    triplets.push_back({static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1), v});
  }
  try {
    return SparseMatrixDual::from_triplets(triplets, m, n);
  } catch (const std::exception& e) {
    throw std::runtime_error(source + ": " + e.what());
  }
}

}  // namespace detail

/// Reads a "%%MatrixMarket matrix coordinate real general" file. Indices in
/// the file are 1-based; '%' comment lines are skipped.
inline SparseMatrixDual read_matrix_market(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw std::runtime_error(source + ": empty input");
  ++line_no;
  if (!detail::parse_banner(line, source).coordinate) {
    throw std::runtime_error(source + ": expected coordinate format for a matrix");
  }
  return detail::read_coordinate_body(in, source, line_no);
}

inline SparseMatrixDual read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open matrix file '" + path + "'");
  return read_matrix_market(in, path);
}

/// Reads a dense vector stored either as an n x 1 "array" file or as an
/// n x 1 coordinate file (missing entries are zero).
inline std::vector<double> read_vector_market(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw std::runtime_error(source + ": empty input");
  ++line_no;
  const bool coordinate = detail::parse_banner(line, source).coordinate;
  if (coordinate) {
    const SparseMatrixDual v = detail::read_coordinate_body(in, source, line_no);
    if (v.cols() != 1) throw std::runtime_error(source + ": vector file must have one column");
    std::vector<double> out(v.rows(), 0.0);
    for (const Triplet& t : v.triplets()) out[t.row] = t.value;
    return out;
  }
  if (!detail::next_data_line(in, line, line_no)) throw std::runtime_error(source + ": missing size line");
  std::size_t rows = 0, cols = 0;
  {
    std::istringstream size_line(line);
    if (!(size_line >> rows >> cols) || cols != 1) {
      throw std::runtime_error(source + ":" + std::to_string(line_no) + ": expected 'n 1' size line");
    }
  }
  std::vector<double> out;
  out.reserve(rows);
  while (out.size() < rows) {
    if (!detail::next_data_line(in, line, line_no)) {
      throw std::runtime_error(source + ": expected " + std::to_string(rows) + " values");
    }
    std::istringstream entry(line);
    double v = 0.0;
    if (!(entry >> v)) throw std::runtime_error(source + ":" + std::to_string(line_no) + ": malformed value");
    out.push_back(v);
  }
  return out;
}

inline std::vector<double> read_vector_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vector file '" + path + "'");
  return read_vector_market(in, path);
}

inline void write_matrix_market(std::ostream& out, const SparseMatrixDual& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nnz() << '\n';
  out << std::setprecision(17);
  for (const Triplet& t : a.triplets()) out << t.row + 1 << ' ' << t.col + 1 << ' ' << t.value << '\n';
}

inline void write_vector_market(std::ostream& out, std::span<const double> v) {
  out << "%%MatrixMarket matrix array real general\n";
  out << v.size() << " 1\n";
  out << std::setprecision(17);
  for (double x : v) out << x << '\n';
}

}  // namespace sparsemirror
