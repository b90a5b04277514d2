#pragma once

// Mesh and nodal-field file formats:
//
//  * custom text:  "dim nv nc", then nv lines of `dim` coordinates, then nc
//    lines of dim+1 zero-based vertex indices. '#' starts a comment.
//  * legacy VTK ASCII UNSTRUCTURED_GRID with line (3), triangle (5) or
//    tetra (10) cells and optional POINT_DATA scalars.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "eikcouple/mesh.hpp"

namespace eikcouple {

enum class MeshFormat { legacy_vtk_ascii, custom_text };

inline MeshFormat mesh_format_from_path(const std::string& path) {
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".vtk") == 0 ? MeshFormat::legacy_vtk_ascii
                                                                            : MeshFormat::custom_text;
}

/// printf-style %.Ng with "inf"/"-inf" for infinities.
inline std::string format_number(double x, int significant_digits) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", significant_digits, x);
  return buf;
}

inline constexpr int kCoordinateDigits = 17;
inline constexpr int kTimeDigits = 9;

namespace detail {

struct Token {
  std::string_view text;
  std::size_t line;
};

/// Whitespace tokenizer over a whole file that remembers line numbers.
class TokenStream {
 public:
  TokenStream(std::string path, std::string content) : path_(std::move(path)), content_(std::move(content)) {
    std::size_t line = 1;
    std::size_t i = 0;
    while (i < content_.size()) {
      const char ch = content_[i];
      if (ch == '\n') {
        ++line;
        ++i;
      } else if (ch == '#') {
        while (i < content_.size() && content_[i] != '\n') ++i;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++i;
      } else {
        const std::size_t start = i;
        while (i < content_.size() && !std::isspace(static_cast<unsigned char>(content_[i]))) ++i;
        tokens_.push_back({std::string_view(content_).substr(start, i - start), line});
      }
    }
  }

  bool done() const { return pos_ >= tokens_.size(); }
  std::size_t line() const { return done() ? (tokens_.empty() ? 1 : tokens_.back().line) : tokens_[pos_].line; }
  const std::string& path() const { return path_; }

  std::string_view next(const char* what) {
    if (done()) throw ParseError(path_, line(), std::string("unexpected end of file, expected ") + what);
    return tokens_[pos_++].text;
  }

  std::string_view peek() const { return done() ? std::string_view{} : tokens_[pos_].text; }

  double number(const char* what) {
    const std::size_t at = line();
    const auto tok = next(what);
    double value = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
      throw ParseError(path_, at, std::string("expected ") + what + ", got '" + std::string(tok) + "'");
    return value;
  }

  long long integer(const char* what) {
    const std::size_t at = line();
    const auto tok = next(what);
    long long value = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
      throw ParseError(path_, at, std::string("expected ") + what + ", got '" + std::string(tok) + "'");
    return value;
  }

  std::size_t count(const char* what) {
    const std::size_t at = line();
    const long long v = integer(what);
    if (v < 0) throw ParseError(path_, at, std::string(what) + " must be non-negative");
    return static_cast<std::size_t>(v);
  }

 private:
  std::string path_;
  std::string content_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Builds the mesh, translating cell-level validation failures into
/// file locations.
inline SimplicialMesh make_located_mesh(const std::string& path, int dim, std::vector<Point> verts,
                                        std::vector<Index> cells, const std::vector<std::size_t>& cell_lines) {
  try {
    return SimplicialMesh(dim, std::move(verts), std::move(cells));
  } catch (const ValidationError& e) {
    if (e.entity() != ValidationError::npos && e.entity() < cell_lines.size())
      throw ValidationError(path + ":" + std::to_string(cell_lines[e.entity()]) + ": " + e.what(), e.entity());
    throw ValidationError(path + ": " + e.what());
  }
}

inline int dim_of_vtk_cell(int type) {
  switch (type) {
    case 3: return 1;
    case 5: return 2;
    case 10: return 3;
    default: return 0;
  }
}

inline int vtk_cell_of_dim(int dim) { return dim == 1 ? 3 : dim == 2 ? 5 : 10; }

}  // namespace detail

inline SimplicialMesh read_text_mesh(const std::string& path) {
  detail::TokenStream ts(path, detail::read_file(path));
  const std::size_t header = ts.line();
  const long long dim = ts.integer("dimension");
  if (dim < 1 || dim > 3) throw ParseError(path, header, "dimension must be 1, 2 or 3");
  const std::size_t nv = ts.count("vertex count");
  const std::size_t nc = ts.count("cell count");
  std::vector<Point> verts(nv, Point{0.0, 0.0, 0.0});
  for (std::size_t v = 0; v < nv; ++v)
    for (long long k = 0; k < dim; ++k) verts[v][k] = ts.number("coordinate");
  std::vector<Index> cells;
  std::vector<std::size_t> lines;
  for (std::size_t c = 0; c < nc; ++c) {
    lines.push_back(ts.line());
    for (long long k = 0; k <= dim; ++k) {
      const std::size_t at = ts.line();
      const long long idx = ts.integer("vertex index");
      if (idx < 0) throw ParseError(path, at, "negative vertex index");
      cells.push_back(static_cast<Index>(idx));
    }
  }
  if (!ts.done()) throw ParseError(path, ts.line(), "trailing content after last cell");
  return detail::make_located_mesh(path, static_cast<int>(dim), std::move(verts), std::move(cells), lines);
}

struct VtkData {
  SimplicialMesh mesh;
  std::map<std::string, std::vector<double>> point_scalars;
};

inline VtkData read_vtk(const std::string& path) {
  const std::string content = detail::read_file(path);
  // header: version line, title line, format line
  std::size_t p = 0;
  std::vector<std::string> head;
  while (head.size() < 3 && p < content.size()) {
    const std::size_t e = content.find('\n', p);
    head.push_back(content.substr(p, e == std::string::npos ? std::string::npos : e - p));
    p = e == std::string::npos ? content.size() : e + 1;
  }
  if (head.size() < 3 || head[0].rfind("# vtk DataFile", 0) != 0)
    throw ParseError(path, 1, "missing '# vtk DataFile' header");
  if (head[2].rfind("ASCII", 0) != 0) throw ParseError(path, 3, "only ASCII legacy VTK is supported");

  detail::TokenStream ts(path, std::string(3, '\n') + content.substr(p));
  std::vector<Point> verts;
  std::vector<Index> cells;
  std::vector<std::size_t> cell_lines;
  std::vector<int> types;
  std::size_t ncells = 0;
  std::map<std::string, std::vector<double>> scalars;

  while (!ts.done()) {
    const std::size_t at = ts.line();
    const std::string kw(ts.next("keyword"));
    if (kw == "DATASET") {
      if (ts.next("dataset type") != "UNSTRUCTURED_GRID")
        throw ParseError(path, at, "only UNSTRUCTURED_GRID datasets are supported");
    } else if (kw == "POINTS") {
      const std::size_t n = ts.count("point count");
      ts.next("point data type");
      verts.assign(n, Point{});
      for (auto& v : verts)
        for (double& x : v) x = ts.number("coordinate");
    } else if (kw == "CELLS") {
      ncells = ts.count("cell count");
      ts.count("cell list size");
      for (std::size_t c = 0; c < ncells; ++c) {
        cell_lines.push_back(ts.line());
        const std::size_t k = ts.count("cell vertex count");
        for (std::size_t i = 0; i < k; ++i) {
          const std::size_t vat = ts.line();
          const long long idx = ts.integer("vertex index");
          if (idx < 0) throw ParseError(path, vat, "negative vertex index");
          cells.push_back(static_cast<Index>(idx));
        }
      }
    } else if (kw == "CELL_TYPES") {
      const std::size_t n = ts.count("cell type count");
      if (n != ncells) throw ParseError(path, at, "CELL_TYPES count differs from CELLS count");
      for (std::size_t c = 0; c < n; ++c) types.push_back(static_cast<int>(ts.integer("cell type")));
    } else if (kw == "POINT_DATA") {
      const std::size_t n = ts.count("point data count");
      if (n != verts.size()) throw ParseError(path, at, "POINT_DATA count differs from POINTS count");
    } else if (kw == "SCALARS") {
      const std::string name(ts.next("scalar name"));
      ts.next("scalar type");
      if (ts.peek() != "LOOKUP_TABLE") {
        if (ts.integer("component count") != 1) throw ParseError(path, at, "only 1-component scalars are supported");
      }
      if (ts.next("LOOKUP_TABLE") != "LOOKUP_TABLE") throw ParseError(path, at, "expected LOOKUP_TABLE");
      ts.next("lookup table name");
      std::vector<double> values(verts.size());
      for (double& x : values) x = ts.number("scalar value");
      scalars[name] = std::move(values);
    } else if (kw == "CELL_DATA") {
      break;  // cell data is not used
    } else {
      throw ParseError(path, at, "unsupported keyword '" + kw + "'");
    }
  }
  if (verts.empty() || types.empty()) throw ParseError(path, ts.line(), "missing POINTS or CELL_TYPES section");
  const int dim = detail::dim_of_vtk_cell(types.front());
  if (dim == 0) throw ParseError(path, cell_lines.front(), "unsupported VTK cell type " + std::to_string(types.front()));
  for (std::size_t c = 0; c < types.size(); ++c)
    if (types[c] != types.front()) throw ParseError(path, cell_lines[c], "mixed cell types are not supported");
  if (cells.size() != ncells * static_cast<std::size_t>(dim + 1))
    throw ParseError(path, cell_lines.front(), "cell vertex counts do not match the cell type");
  return VtkData{detail::make_located_mesh(path, dim, std::move(verts), std::move(cells), cell_lines),
                 std::move(scalars)};
}

inline SimplicialMesh load_mesh(const std::string& path, MeshFormat format) {
  return format == MeshFormat::legacy_vtk_ascii ? read_vtk(path).mesh : read_text_mesh(path);
}

inline SimplicialMesh load_mesh(const std::string& path) { return load_mesh(path, mesh_format_from_path(path)); }

inline void write_text_mesh(const std::string& path, const SimplicialMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << mesh.dim() << ' ' << mesh.num_vertices() << ' ' << mesh.num_cells() << '\n';
  for (const auto& v : mesh.vertices()) {
    for (int k = 0; k < mesh.dim(); ++k) out << (k ? " " : "") << format_number(v[k], kCoordinateDigits);
    out << '\n';
  }
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    auto vs = mesh.cell(c);
    for (std::size_t k = 0; k < vs.size(); ++k) out << (k ? " " : "") << vs[k];
    out << '\n';
  }
}

struct NamedField {
  std::string name;
  const std::vector<double>* values;
  int significant_digits = kTimeDigits;
};

inline void write_vtk(const std::string& path, const SimplicialMesh& mesh, const std::vector<NamedField>& fields = {},
                      const std::string& title = "eikcouple") {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (const auto& v : mesh.vertices())
    out << format_number(v[0], kCoordinateDigits) << ' ' << format_number(v[1], kCoordinateDigits) << ' '
        << format_number(v[2], kCoordinateDigits) << '\n';
  const std::size_t nvc = mesh.vertices_per_cell();
  out << "CELLS " << mesh.num_cells() << ' ' << mesh.num_cells() * (nvc + 1) << '\n';
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    out << nvc;
    for (Index v : mesh.cell(c)) out << ' ' << v;
    out << '\n';
  }
  out << "CELL_TYPES " << mesh.num_cells() << '\n';
  const int type = detail::vtk_cell_of_dim(mesh.dim());
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) out << type << '\n';
  if (fields.empty()) return;
  out << "POINT_DATA " << mesh.num_vertices() << '\n';
  for (const auto& f : fields) {
    if (f.values->size() != mesh.num_vertices()) throw ValidationError("field '" + f.name + "' has wrong length");
    out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
    for (double x : *f.values) out << format_number(x, f.significant_digits) << '\n';
  }
}

/// `vertex,x,y,z,u_ms` with times converted from seconds.
inline void write_activation_csv(const std::string& path, const SimplicialMesh& mesh, const ActivationField& u) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "vertex,x,y,z,u_ms\n";
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    const auto& p = mesh.vertex(v);
    out << v << ',' << format_number(p[0], kCoordinateDigits) << ',' << format_number(p[1], kCoordinateDigits)
        << ',' << format_number(p[2], kCoordinateDigits) << ',' << format_number(u[v] * 1e3, kTimeDigits) << '\n';
  }
}

inline std::vector<double> to_milliseconds(const std::vector<double>& seconds) {
  std::vector<double> ms(seconds.size());
  for (std::size_t i = 0; i < seconds.size(); ++i) ms[i] = seconds[i] * 1e3;
  return ms;
}

}  // namespace eikcouple
