#pragma once

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "topopt/error.hpp"
#include "topopt/mesh.hpp"

namespace topopt::io {

namespace detail {
inline std::string fmt_float(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(static_cast<float>(v)));
  return buf;
}
}  // namespace detail

/// Legacy VTK 3.0 ASCII with one cell scalar named `name`. Box grids use
/// STRUCTURED_POINTS, triangle meshes UNSTRUCTURED_GRID.
inline std::string format_vtk(const Mesh& mesh, std::span<const double> cell_values,
                              const std::string& name = "density", const std::string& title = "density") {
  if (cell_values.size() != mesh.n_elements()) throw InvalidArgument("VTK cell data length does not match mesh");
  using detail::fmt_float;
  std::ostringstream o;
  o << "# vtk DataFile Version 3.0\n" << title << "\nASCII\n";
  if (mesh.element_type == ElementType::tri3) {
    o << "DATASET UNSTRUCTURED_GRID\n";
    o << "POINTS " << mesh.n_nodes() << " float\n";
    for (std::size_t n = 0; n < mesh.n_nodes(); ++n) {
      auto p = mesh.node(n);
      o << fmt_float(p[0]) << ' ' << fmt_float(p[1]) << " 0\n";
    }
    o << "CELLS " << mesh.n_elements() << ' ' << mesh.n_elements() * 4 << "\n";
    for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
      auto c = mesh.element(e);
      o << "3 " << c[0] << ' ' << c[1] << ' ' << c[2] << "\n";
    }
    o << "CELL_TYPES " << mesh.n_elements() << "\n";
    for (std::size_t e = 0; e < mesh.n_elements(); ++e) o << "5\n";
  } else {
    const int nz = mesh.dim == 3 ? mesh.cells[2] : 0;
    o << "DATASET STRUCTURED_POINTS\n";
    o << "DIMENSIONS " << mesh.cells[0] + 1 << ' ' << mesh.cells[1] + 1 << ' ' << nz + 1 << "\n";
    o << "ORIGIN " << fmt_float(mesh.origin[0]) << ' ' << fmt_float(mesh.origin[1]) << ' '
      << fmt_float(mesh.dim == 3 ? mesh.origin[2] : 0.0) << "\n";
    o << "SPACING " << fmt_float(mesh.spacing[0]) << ' ' << fmt_float(mesh.spacing[1]) << ' '
      << fmt_float(mesh.dim == 3 ? mesh.spacing[2] : 1.0) << "\n";
  }
  o << "CELL_DATA " << mesh.n_elements() << "\n";
  o << "SCALARS " << name << " float 1\nLOOKUP_TABLE default\n";
  for (double v : cell_values) o << fmt_float(v) << "\n";
  return o.str();
}

inline void write_vtk(const std::string& path, const Mesh& mesh, std::span<const double> cell_values,
                      const std::string& name = "density") {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path + "'");
  f << format_vtk(mesh, cell_values, name);
  if (!f) throw Error("failed writing '" + path + "'");
}

/// Parsed contents of a legacy ASCII file as written above.
struct VtkData {
  std::string title;
  std::string dataset;
  std::array<int, 3> dimensions{0, 0, 0};
  std::array<double, 3> origin{0, 0, 0};
  std::array<double, 3> spacing{0, 0, 0};
  std::vector<double> points;
  std::vector<std::vector<int>> cells;
  std::vector<int> cell_types;
  std::string scalar_name;
  std::vector<double> cell_scalars;
};

/// Reader for the subset of legacy ASCII VTK used here (STRUCTURED_POINTS
/// and UNSTRUCTURED_GRID with one float cell scalar). Throws Error on any
/// malformed or inconsistent section.
inline VtkData parse_vtk(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto fail = [](const std::string& m) -> void { throw Error("VTK parse error: " + m); };
  if (!std::getline(in, line) || line.rfind("# vtk DataFile Version", 0) != 0) fail("missing version header");
  VtkData d;
  if (!std::getline(in, d.title)) fail("missing title");
  if (!std::getline(in, line) || line != "ASCII") fail("only ASCII files are supported");
  std::string tok;
  if (!(in >> tok) || tok != "DATASET" || !(in >> d.dataset)) fail("missing DATASET");
  if (d.dataset != "STRUCTURED_POINTS" && d.dataset != "UNSTRUCTURED_GRID") fail("unsupported dataset " + d.dataset);

  std::size_t expected_cells = 0;
  while (in >> tok) {
    if (tok == "DIMENSIONS") {
      for (int& v : d.dimensions)
        if (!(in >> v) || v < 1) fail("bad DIMENSIONS");
    } else if (tok == "ORIGIN") {
      for (double& v : d.origin)
        if (!(in >> v)) fail("bad ORIGIN");
    } else if (tok == "SPACING") {
      for (double& v : d.spacing)
        if (!(in >> v)) fail("bad SPACING");
    } else if (tok == "POINTS") {
      std::size_t n;
      std::string type;
      if (!(in >> n >> type)) fail("bad POINTS header");
      d.points.resize(3 * n);
      for (double& v : d.points)
        if (!(in >> v)) fail("truncated POINTS");
    } else if (tok == "CELLS") {
      std::size_t n, total;
      if (!(in >> n >> total)) fail("bad CELLS header");
      std::size_t seen = 0;
      d.cells.resize(n);
      for (auto& c : d.cells) {
        int k;
        if (!(in >> k) || k < 1) fail("bad cell size");
        c.resize(k);
        for (int& v : c)
          if (!(in >> v) || v < 0 || static_cast<std::size_t>(v) >= d.points.size() / 3) fail("bad cell index");
        seen += k + 1;
      }
      if (seen != total) fail("CELLS size mismatch");
    } else if (tok == "CELL_TYPES") {
      std::size_t n;
      if (!(in >> n) || n != d.cells.size()) fail("CELL_TYPES count mismatch");
      d.cell_types.resize(n);
      for (int& v : d.cell_types)
        if (!(in >> v)) fail("truncated CELL_TYPES");
    } else if (tok == "CELL_DATA") {
      if (!(in >> expected_cells)) fail("bad CELL_DATA");
    } else if (tok == "SCALARS") {
      std::string type;
      int comps = 1;
      if (!(in >> d.scalar_name >> type)) fail("bad SCALARS header");
      in >> std::ws;
      if (in.peek() != 'L') in >> comps;
      if (comps != 1) fail("only single-component scalars are supported");
      std::string lt, table;
      if (!(in >> lt >> table) || lt != "LOOKUP_TABLE") fail("missing LOOKUP_TABLE");
      d.cell_scalars.resize(expected_cells);
      for (double& v : d.cell_scalars)
        if (!(in >> v)) fail("truncated SCALARS");
    } else {
      fail("unexpected token '" + tok + "'");
    }
  }
  std::size_t n_cells = d.cells.size();
  if (d.dataset == "STRUCTURED_POINTS") {
    n_cells = 1;
    for (int v : d.dimensions) n_cells *= std::max(1, v - 1);
  }
  if (expected_cells != n_cells) fail("CELL_DATA count does not match the geometry");
  if (d.cell_scalars.size() != n_cells) fail("missing cell scalars");
  return d;
}

inline VtkData read_vtk(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_vtk(ss.str());
}

}  // namespace topopt::io
