#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "topopt/error.hpp"

namespace topopt {

enum class ElementType { quad4, tri3, hex8 };

inline int nodes_per_element(ElementType t) {
  switch (t) {
    case ElementType::quad4: return 4;
    case ElementType::tri3: return 3;
    case ElementType::hex8: return 8;
  }
  return 0;
}

inline int element_dim(ElementType t) { return t == ElementType::hex8 ? 3 : 2; }

inline std::string to_string(ElementType t) {
  switch (t) {
    case ElementType::quad4: return "quad4";
    case ElementType::tri3: return "tri3";
    case ElementType::hex8: return "hex8";
  }
  return "?";
}

/// Linear-element mesh. Coordinates and connectivity are stored flat:
/// node n occupies coords[n*dim .. n*dim+dim), element e occupies
/// connectivity[e*npe .. e*npe+npe).
///
/// Structured grids (quad4/hex8 from build_uniform_grid, tri3 from
/// triangulate_box) also record cells/spacing/origin; nodes are numbered
/// lexicographically with x fastest.
struct Mesh {
  int dim = 2;
  ElementType element_type = ElementType::quad4;
  std::vector<double> node_coords;
  std::vector<int> elements;
  std::array<int, 3> cells{0, 0, 0};
  std::array<double, 3> spacing{0.0, 0.0, 0.0};
  std::array<double, 3> origin{0.0, 0.0, 0.0};

  [[nodiscard]] int npe() const { return nodes_per_element(element_type); }
  [[nodiscard]] std::size_t n_nodes() const { return node_coords.size() / dim; }
  [[nodiscard]] std::size_t n_elements() const { return elements.size() / npe(); }

  [[nodiscard]] std::span<const double> node(std::size_t n) const {
    return {node_coords.data() + n * dim, static_cast<std::size_t>(dim)};
  }
  [[nodiscard]] std::span<const int> element(std::size_t e) const {
    return {elements.data() + e * npe(), static_cast<std::size_t>(npe())};
  }

  /// True when every element is a translate of the first one, so a single
  /// element matrix serves the whole mesh.
  [[nodiscard]] bool congruent_elements() const {
    return element_type != ElementType::tri3;
  }

  /// Axis-aligned bounding box as [min0, max0, min1, max1(, min2, max2)].
  [[nodiscard]] std::vector<double> bounding_box() const {
    std::vector<double> box(2 * dim);
    for (int a = 0; a < dim; ++a) {
      box[2 * a] = INFINITY;
      box[2 * a + 1] = -INFINITY;
    }
    for (std::size_t n = 0; n < n_nodes(); ++n) {
      for (int a = 0; a < dim; ++a) {
        double x = node_coords[n * dim + a];
        box[2 * a] = std::min(box[2 * a], x);
        box[2 * a + 1] = std::max(box[2 * a + 1], x);
      }
    }
    return box;
  }
};

/// Quad4 (dim=2) or hex8 (dim=3) grid. Element nodes are ordered
/// counter-clockwise in 2D; in 3D the bottom face (z low) comes first,
/// counter-clockwise seen from +z, then the top face.
inline Mesh build_uniform_grid(int dim, std::span<const int> cells_per_axis,
                               std::span<const double> spacing,
                               std::span<const double> origin) {
  if (dim != 2 && dim != 3) throw InvalidArgument("grid dimension must be 2 or 3");
  if (cells_per_axis.size() != static_cast<std::size_t>(dim) ||
      spacing.size() != static_cast<std::size_t>(dim) ||
      origin.size() != static_cast<std::size_t>(dim)) {
    throw InvalidArgument("cells/spacing/origin must each have dim entries");
  }
  for (int a = 0; a < dim; ++a) {
    if (cells_per_axis[a] <= 0) throw InvalidArgument("cell count must be positive");
    if (!(spacing[a] > 0.0)) throw InvalidArgument("spacing must be positive");
  }

  Mesh m;
  m.dim = dim;
  m.element_type = dim == 2 ? ElementType::quad4 : ElementType::hex8;
  for (int a = 0; a < dim; ++a) {
    m.cells[a] = cells_per_axis[a];
    m.spacing[a] = spacing[a];
    m.origin[a] = origin[a];
  }
  const int nx = m.cells[0], ny = m.cells[1], nz = dim == 3 ? m.cells[2] : 0;
  const int px = nx + 1, py = ny + 1, pz = nz + 1;

  m.node_coords.reserve(static_cast<std::size_t>(px) * py * pz * dim);
  for (int k = 0; k < pz; ++k)
    for (int j = 0; j < py; ++j)
      for (int i = 0; i < px; ++i) {
        m.node_coords.push_back(origin[0] + i * spacing[0]);
        m.node_coords.push_back(origin[1] + j * spacing[1]);
        if (dim == 3) m.node_coords.push_back(origin[2] + k * spacing[2]);
      }

  auto id = [&](int i, int j, int k) { return i + px * (j + py * k); };
  if (dim == 2) {
    m.elements.reserve(static_cast<std::size_t>(nx) * ny * 4);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        for (int n : {id(i, j, 0), id(i + 1, j, 0), id(i + 1, j + 1, 0), id(i, j + 1, 0)})
          m.elements.push_back(n);
  } else {
    m.elements.reserve(static_cast<std::size_t>(nx) * ny * nz * 8);
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
          for (int n : {id(i, j, k), id(i + 1, j, k), id(i + 1, j + 1, k), id(i, j + 1, k),
                        id(i, j, k + 1), id(i + 1, j, k + 1), id(i + 1, j + 1, k + 1),
                        id(i, j + 1, k + 1)})
            m.elements.push_back(n);
  }
  return m;
}

/// Triangulated rectangle box = [xmin, xmax, ymin, ymax]. Each grid cell is
/// split along its (low-x, low-y) -> (high-x, high-y) diagonal into two
/// counter-clockwise triangles.
inline Mesh triangulate_box(int cells_x, int cells_y, std::span<const double> box) {
  if (cells_x < 1 || cells_y < 1) throw InvalidArgument("cell counts must be >= 1");
  if (box.size() != 4) throw InvalidArgument("box must have 4 entries");
  const double w = box[1] - box[0], h = box[3] - box[2];
  if (!(w > 0.0) || !(h > 0.0)) throw InvalidArgument("degenerate box");

  Mesh m;
  m.dim = 2;
  m.element_type = ElementType::tri3;
  m.cells = {cells_x, cells_y, 0};
  m.spacing = {w / cells_x, h / cells_y, 0.0};
  m.origin = {box[0], box[2], 0.0};
  const int px = cells_x + 1, py = cells_y + 1;
  m.node_coords.reserve(static_cast<std::size_t>(px) * py * 2);
  for (int j = 0; j < py; ++j)
    for (int i = 0; i < px; ++i) {
      // Pin the far edges to the box exactly so boundary masks match.
      m.node_coords.push_back(i == cells_x ? box[1] : box[0] + i * m.spacing[0]);
      m.node_coords.push_back(j == cells_y ? box[3] : box[2] + j * m.spacing[1]);
    }
  auto id = [&](int i, int j) { return i + px * j; };
  m.elements.reserve(static_cast<std::size_t>(cells_x) * cells_y * 6);
  for (int j = 0; j < cells_y; ++j)
    for (int i = 0; i < cells_x; ++i) {
      int n00 = id(i, j), n10 = id(i + 1, j), n11 = id(i + 1, j + 1), n01 = id(i, j + 1);
      for (int n : {n00, n10, n11}) m.elements.push_back(n);
      for (int n : {n00, n11, n01}) m.elements.push_back(n);
    }
  return m;
}

struct ElementGeometry {
  std::vector<double> centroids;  // n_elements * dim
  std::vector<double> volumes;

  [[nodiscard]] std::span<const double> centroid(std::size_t e, int dim) const {
    return {centroids.data() + e * dim, static_cast<std::size_t>(dim)};
  }
};

namespace detail {

// Exact volume of a trilinear hexahedron: det J is at most quadratic per
// reference axis, so 2-point Gauss per axis integrates it exactly.
inline double hex8_volume(const Mesh& m, std::span<const int> nodes) {
  static constexpr int sx[8] = {-1, 1, 1, -1, -1, 1, 1, -1};
  static constexpr int sy[8] = {-1, -1, 1, 1, -1, -1, 1, 1};
  static constexpr int sz[8] = {-1, -1, -1, -1, 1, 1, 1, 1};
  const double g = 1.0 / std::sqrt(3.0);
  double vol = 0.0;
  for (int gp = 0; gp < 8; ++gp) {
    double xi = (gp & 1 ? g : -g), et = (gp & 2 ? g : -g), ze = (gp & 4 ? g : -g);
    double J[3][3] = {};
    for (int a = 0; a < 8; ++a) {
      double dN[3] = {0.125 * sx[a] * (1 + sy[a] * et) * (1 + sz[a] * ze),
                      0.125 * sy[a] * (1 + sx[a] * xi) * (1 + sz[a] * ze),
                      0.125 * sz[a] * (1 + sx[a] * xi) * (1 + sy[a] * et)};
      auto x = m.node(nodes[a]);
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) J[r][c] += dN[r] * x[c];
    }
    vol += J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
           J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
           J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
  }
  return vol;
}

}  // namespace detail

inline ElementGeometry element_geometry(const Mesh& m) {
  const std::size_t ne = m.n_elements();
  const int npe = m.npe();
  ElementGeometry g;
  g.centroids.assign(ne * m.dim, 0.0);
  g.volumes.resize(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    auto nodes = m.element(e);
    for (int n : nodes) {
      auto x = m.node(n);
      for (int a = 0; a < m.dim; ++a) g.centroids[e * m.dim + a] += x[a];
    }
    for (int a = 0; a < m.dim; ++a) g.centroids[e * m.dim + a] /= npe;

    double v = 0.0;
    if (m.dim == 2) {
      // shoelace
      for (int a = 0; a < npe; ++a) {
        auto p = m.node(nodes[a]);
        auto q = m.node(nodes[(a + 1) % npe]);
        v += p[0] * q[1] - q[0] * p[1];
      }
      v *= 0.5;
    } else {
      v = detail::hex8_volume(m, nodes);
    }
    if (!(v > 0.0)) throw InvalidArgument("element " + std::to_string(e) + " has non-positive volume");
    g.volumes[e] = v;
  }
  return g;
}

/// Node-major interleaved displacement numbering: dof(n, a) = n*dim + a.
struct DofMap {
  int dofs_per_node = 2;
  int dofs_per_element = 8;
  std::size_t n_dofs = 0;
  std::vector<int> cell_to_dof;  // n_elements * dofs_per_element

  [[nodiscard]] std::span<const int> element_dofs(std::size_t e) const {
    return {cell_to_dof.data() + e * dofs_per_element, static_cast<std::size_t>(dofs_per_element)};
  }
  [[nodiscard]] static int dof(int node, int axis, int dim) { return node * dim + axis; }
};

inline DofMap build_dof_map(const Mesh& m) {
  DofMap d;
  d.dofs_per_node = m.dim;
  d.dofs_per_element = m.npe() * m.dim;
  d.n_dofs = m.n_nodes() * m.dim;
  d.cell_to_dof.reserve(m.n_elements() * d.dofs_per_element);
  for (std::size_t e = 0; e < m.n_elements(); ++e)
    for (int n : m.element(e))
      for (int a = 0; a < m.dim; ++a) d.cell_to_dof.push_back(DofMap::dof(n, a, m.dim));
  return d;
}

}  // namespace topopt
