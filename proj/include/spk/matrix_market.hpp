#pragma once

// Matrix Market reader/writer: coordinate real/integer matrices (general or
// symmetric) and dense "array" vectors. Used for test fixtures and for
// exporting assembled systems from the benchmark CLI.

#include <cctype>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "spk/linalg.hpp"

namespace spk::mm {

namespace detail {

struct Header {
  std::string format;    // coordinate | array
  std::string field;     // real | integer | pattern
  std::string symmetry;  // general | symmetric
};

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline Header read_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("matrix market: empty input");
  std::istringstream hs(line);
  std::string banner, object;
  Header h;
  hs >> banner >> object >> h.format >> h.field >> h.symmetry;
  if (banner != "%%MatrixMarket" || lower(object) != "matrix")
    throw ParseError("matrix market: missing %%MatrixMarket matrix banner");
  h.format = lower(h.format);
  h.field = lower(h.field);
  h.symmetry = lower(h.symmetry);
  if (h.format != "coordinate" && h.format != "array") throw ParseError("matrix market: unknown format " + h.format);
  if (h.field != "real" && h.field != "integer" && h.field != "pattern" && h.field != "double")
    throw ParseError("matrix market: unsupported field " + h.field);
  if (h.symmetry != "general" && h.symmetry != "symmetric")
    throw ParseError("matrix market: unsupported symmetry " + h.symmetry);
  return h;
}

inline std::string next_data_line(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    const auto p = line.find_first_not_of(" \t\r");
    if (p == std::string::npos || line[p] == '%') continue;
    return line;
  }
  throw ParseError("matrix market: unexpected end of input");
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("matrix market: cannot open " + path + " for writing");
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("matrix market: cannot open " + path);
  return in;
}

}  // namespace detail

inline SparseMatrix read_sparse(std::istream& in) {
  const auto h = detail::read_header(in);
  if (h.format != "coordinate") throw ParseError("matrix market: expected coordinate format for a sparse matrix");
  std::istringstream size_line(detail::next_data_line(in));
  Index rows = 0, cols = 0, entries = 0;
  if (!(size_line >> rows >> cols >> entries)) throw ParseError("matrix market: bad size line");
  std::vector<Triplet> t;
  t.reserve(h.symmetry == "symmetric" ? 2 * entries : entries);
  for (Index k = 0; k < entries; ++k) {
    std::istringstream ls(detail::next_data_line(in));
    Index i = 0, j = 0;
    double v = 1.0;
    if (!(ls >> i >> j)) throw ParseError("matrix market: bad entry line");
    if (h.field != "pattern" && !(ls >> v)) throw ParseError("matrix market: missing value");
    if (i == 0 || j == 0 || i > rows || j > cols) throw ParseError("matrix market: index out of range");
    t.push_back({i - 1, j - 1, v});
    if (h.symmetry == "symmetric" && i != j) t.push_back({j - 1, i - 1, v});
  }
  return SparseMatrix(rows, cols, std::move(t));
}

inline void write_sparse(std::ostream& out, const SparseMatrix& a) {
  out << std::setprecision(17) << std::scientific;
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nnz() << '\n';
  for (const auto& t : a.triplets()) out << t.row + 1 << ' ' << t.col + 1 << ' ' << t.value << '\n';
}

// Dense column vector stored in "array" format (n x 1). A coordinate file
// with a single column is accepted too.
inline Vector read_vector(std::istream& in) {
  const auto h = detail::read_header(in);
  std::istringstream size_line(detail::next_data_line(in));
  if (h.format == "array") {
    Index rows = 0, cols = 0;
    if (!(size_line >> rows >> cols) || cols != 1) throw ParseError("matrix market: vector must be n x 1");
    Vector v(rows);
    for (Index i = 0; i < rows; ++i) {
      std::istringstream ls(detail::next_data_line(in));
      if (!(ls >> v[i])) throw ParseError("matrix market: bad vector entry");
    }
    return v;
  }
  Index rows = 0, cols = 0, entries = 0;
  if (!(size_line >> rows >> cols >> entries) || cols != 1) throw ParseError("matrix market: vector must be n x 1");
  Vector v(rows, 0.0);
  for (Index k = 0; k < entries; ++k) {
    std::istringstream ls(detail::next_data_line(in));
    Index i = 0, j = 0;
    double x = 0.0;
    if (!(ls >> i >> j >> x) || i == 0 || i > rows) throw ParseError("matrix market: bad vector entry");
    v[i - 1] += x;
  }
  return v;
}

inline void write_vector(std::ostream& out, std::span<const double> v) {
  out << std::setprecision(17) << std::scientific;
  out << "%%MatrixMarket matrix array real general\n";
  out << v.size() << " 1\n";
  for (double x : v) out << x << '\n';
}

inline SparseMatrix load_sparse(const std::string& path) {
  auto in = detail::open_in(path);
  return read_sparse(in);
}

inline Vector load_vector(const std::string& path) {
  auto in = detail::open_in(path);
  return read_vector(in);
}

inline void save_sparse(const std::string& path, const SparseMatrix& a) {
  auto out = detail::open_out(path);
  write_sparse(out, a);
}

inline void save_vector(const std::string& path, std::span<const double> v) {
  auto out = detail::open_out(path);
  write_vector(out, v);
}

}  // namespace spk::mm
