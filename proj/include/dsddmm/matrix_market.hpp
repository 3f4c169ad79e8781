#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "dsddmm/error.hpp"
#include "dsddmm/matrix.hpp"

namespace dsddmm {

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return s;
}

}  // namespace detail

/// Reads a coordinate-format Matrix Market stream (real, integer or pattern;
/// general, symmetric or skew-symmetric). Symmetric files are expanded to
/// both triangles. Indices are converted to 0-based.
inline SparseMatrix read_matrix_market(std::istream& in) {
  std::string line;
  long lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty input", 0);
  ++lineno;

  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (tag != "%%MatrixMarket") throw ParseError("missing %%MatrixMarket banner", lineno);
  object = detail::lower(object);
  format = detail::lower(format);
  field = detail::lower(field);
  symmetry = detail::lower(symmetry);
  if (object != "matrix") throw ParseError("unsupported object '" + object + "'", lineno);
  if (format != "coordinate") throw ParseError("unsupported format '" + format + "' (only coordinate)", lineno);
  if (field != "real" && field != "integer" && field != "pattern" && field != "double")
    throw ParseError("unsupported field '" + field + "'", lineno);
  if (symmetry != "general" && symmetry != "symmetric" && symmetry != "skew-symmetric")
    throw ParseError("unsupported symmetry '" + symmetry + "'", lineno);
  const bool pattern = field == "pattern";

  // Size line, after any comments.
  index_t rows = -1, cols = -1, entries = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '%') continue;
    std::istringstream sz(line);
    if (!(sz >> rows >> cols >> entries) || rows < 0 || cols < 0 || entries < 0)
      throw ParseError("malformed size line", lineno);
    break;
  }
  if (rows < 0) throw ParseError("missing size line", lineno);

  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(symmetry == "general" ? entries : 2 * entries));
  index_t seen = 0;
  while (seen < entries && std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '%') continue;
    std::istringstream es(line);
    index_t i = 0, j = 0;
    double v = 1.0;
    if (!(es >> i >> j)) throw ParseError("malformed entry", lineno);
    if (!pattern && !(es >> v)) throw ParseError("missing value", lineno);
    if (i < 1 || i > rows || j < 1 || j > cols) throw ParseError("index out of range", lineno);
    t.push_back({i - 1, j - 1, v});
    if (symmetry != "general" && i != j) t.push_back({j - 1, i - 1, symmetry == "skew-symmetric" ? -v : v});
    ++seen;
  }
  if (seen < entries)
    throw ParseError("expected " + std::to_string(entries) + " entries, found " + std::to_string(seen), lineno);
  try {
    return SparseMatrix::from_triplets(rows, cols, std::move(t));
  } catch (const DimensionMismatch& e) {
    throw ParseError(e.what(), 0);
  }
}

inline SparseMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return read_matrix_market(in);
}

/// Writes "coordinate real general" with round-trip-exact values.
inline void write_matrix_market(const SparseMatrix& s, std::ostream& out) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << s.rows() << ' ' << s.cols() << ' ' << s.nnz() << '\n';
  const auto ri = s.row_indices();
  const auto ci = s.col_indices();
  const auto v = s.values();
  char buf[64];
  for (std::size_t k = 0; k < ri.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", v[k]);
    out << ri[k] + 1 << ' ' << ci[k] + 1 << ' ' << buf << '\n';
  }
}

inline void write_matrix_market(const SparseMatrix& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_matrix_market(s, out);
  if (!out) throw Error("write to '" + path + "' failed");
}

}  // namespace dsddmm
