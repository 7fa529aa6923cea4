#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "topopt/error.hpp"
#include "topopt/material.hpp"
#include "topopt/mesh.hpp"

namespace topopt {

/// Dense element matrix, dofs ordered node-major with axes innermost
/// (matching DofMap::cell_to_dof).
using ElementMatrix = Eigen::MatrixXd;

enum class IntegrationRule {
  quadrature,   ///< Gauss rule on the isoparametric map
  closed_form,  ///< exact integrals precomputed analytically
};

namespace detail {

// Local node -> reference-corner bit per axis (quad4/hex8 ordering of
// build_uniform_grid).
inline constexpr std::array<std::array<int, 3>, 8> kCornerBits{{
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}};

// Strain-displacement rows for one node: column `a` of the Voigt block gets
// derivative along axis voigt_axis(r, a), or -1 when the entry is zero.
inline int voigt_axis(int dim, int r, int a) {
  if (dim == 2) {
    static constexpr int t[3][2] = {{0, -1}, {-1, 1}, {1, 0}};
    return t[r][a];
  }
  static constexpr int t[6][3] = {{0, -1, -1}, {-1, 1, -1}, {-1, -1, 2},
                                  {1, 0, -1},  {-1, 2, 1},  {2, -1, 0}};
  return t[r][a];
}

inline int voigt_size(int dim) { return dim == 2 ? 3 : 6; }

inline Eigen::MatrixXd strain_matrix(int dim, const Eigen::MatrixXd& dNdx) {
  const int npe = static_cast<int>(dNdx.cols());
  const int nv = voigt_size(dim);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(nv, npe * dim);
  for (int i = 0; i < npe; ++i)
    for (int r = 0; r < nv; ++r)
      for (int a = 0; a < dim; ++a) {
        int k = voigt_axis(dim, r, a);
        if (k >= 0) B(r, i * dim + a) = dNdx(k, i);
      }
  return B;
}

// Reference shape-function gradients (rows: reference axis, cols: node).
inline Eigen::MatrixXd reference_gradients(ElementType t, std::span<const double> xi) {
  if (t == ElementType::tri3) {
    Eigen::MatrixXd g(2, 3);
    g << -1, 1, 0, -1, 0, 1;
    return g;
  }
  const int dim = element_dim(t);
  const int npe = nodes_per_element(t);
  Eigen::MatrixXd g(dim, npe);
  for (int i = 0; i < npe; ++i) {
    for (int k = 0; k < dim; ++k) {
      double v = 1.0;
      for (int q = 0; q < dim; ++q) {
        double s = kCornerBits[i][q] ? 1.0 : -1.0;
        v *= q == k ? 0.5 * s : 0.5 * (1.0 + s * xi[q]);
      }
      g(k, i) = v;
    }
  }
  return g;
}

inline void check_coords(ElementType t, std::span<const double> coords) {
  if (coords.size() != static_cast<std::size_t>(nodes_per_element(t) * element_dim(t)))
    throw InvalidArgument("element coordinate array has wrong length");
}

}  // namespace detail

/// K_e = \int B^T D B dV by Gauss quadrature: 2 points per axis for
/// quad4/hex8, 1 point for tri3. `coords` holds npe*dim node coordinates.
inline ElementMatrix element_stiffness_quadrature(ElementType t, std::span<const double> coords,
                                                  const Eigen::MatrixXd& D) {
  detail::check_coords(t, coords);
  const int dim = element_dim(t);
  const int npe = nodes_per_element(t);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(
      coords.data(), npe, dim);

  std::vector<std::pair<std::array<double, 3>, double>> points;
  if (t == ElementType::tri3) {
    points.push_back({{1.0 / 3.0, 1.0 / 3.0, 0.0}, 0.5});
  } else {
    const double g = 1.0 / std::sqrt(3.0);
    const int np = 1 << dim;
    for (int p = 0; p < np; ++p)
      points.push_back({{p & 1 ? g : -g, p & 2 ? g : -g, p & 4 ? g : -g}, 1.0});
  }

  ElementMatrix K = ElementMatrix::Zero(npe * dim, npe * dim);
  for (const auto& [xi, w] : points) {
    Eigen::MatrixXd dNref = detail::reference_gradients(t, xi);
    Eigen::MatrixXd J = dNref * X;  // J(k, c) = d x_c / d xi_k
    const double detJ = J.determinant();
    if (!(detJ > 0.0)) throw InvalidArgument("element Jacobian is not positive");
    Eigen::MatrixXd dNdx = J.inverse() * dNref;
    Eigen::MatrixXd B = detail::strain_matrix(dim, dNdx);
    K.noalias() += (w * detJ) * (B.transpose() * D * B);
  }
  return K;
}

namespace detail {

// Exact \int (d^p phi_a)(d^q phi_b) over [0, h] for the two linear 1D hat
// functions phi_0 = 1 - x/h, phi_1 = x/h, with p, q in {0, 1}.
inline double hat_integral(int a, int p, int b, int q, double h) {
  const double sa = a ? 1.0 : -1.0, sb = b ? 1.0 : -1.0;
  if (p == 0 && q == 0) return a == b ? h / 3.0 : h / 6.0;
  if (p == 1 && q == 1) return sa * sb / h;
  if (p == 1) return 0.5 * sa;
  return 0.5 * sb;
}

// Axis-aligned box element: every entry factorizes into a product of 1D
// hat-function integrals, so no quadrature is needed.
inline ElementMatrix box_closed_form(ElementType t, std::span<const double> h,
                                     const Eigen::MatrixXd& D) {
  const int dim = element_dim(t);
  const int npe = nodes_per_element(t);
  const int nv = voigt_size(dim);
  // I[i][k][j][l] = \int dN_i/dx_k dN_j/dx_l dV
  std::vector<double> I(static_cast<std::size_t>(npe * dim * npe * dim));
  auto idx = [&](int i, int k, int j, int l) { return ((i * dim + k) * npe + j) * dim + l; };
  for (int i = 0; i < npe; ++i)
    for (int k = 0; k < dim; ++k)
      for (int j = 0; j < npe; ++j)
        for (int l = 0; l < dim; ++l) {
          double v = 1.0;
          for (int q = 0; q < dim; ++q)
            v *= hat_integral(kCornerBits[i][q], q == k, kCornerBits[j][q], q == l, h[q]);
          I[idx(i, k, j, l)] = v;
        }

  ElementMatrix K = ElementMatrix::Zero(npe * dim, npe * dim);
  for (int i = 0; i < npe; ++i)
    for (int a = 0; a < dim; ++a)
      for (int j = 0; j < npe; ++j)
        for (int b = 0; b < dim; ++b) {
          double s = 0.0;
          for (int r = 0; r < nv; ++r) {
            int k = voigt_axis(dim, r, a);
            if (k < 0) continue;
            for (int c = 0; c < nv; ++c) {
              int l = voigt_axis(dim, c, b);
              if (l < 0 || D(r, c) == 0.0) continue;
              s += D(r, c) * I[idx(i, k, j, l)];
            }
          }
          K(i * dim + a, j * dim + b) = s;
        }
  return K;
}

// Constant-strain triangle, unit thickness.
inline ElementMatrix tri3_closed_form(std::span<const double> x, const Eigen::MatrixXd& D) {
  const double x1 = x[0], y1 = x[1], x2 = x[2], y2 = x[3], x3 = x[4], y3 = x[5];
  const double twoA = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1);
  if (!(twoA > 0.0)) throw InvalidArgument("triangle has non-positive area");
  const double b[3] = {y2 - y3, y3 - y1, y1 - y2};
  const double c[3] = {x3 - x2, x1 - x3, x2 - x1};
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(3, 6);
  for (int i = 0; i < 3; ++i) {
    B(0, 2 * i) = b[i] / twoA;
    B(1, 2 * i + 1) = c[i] / twoA;
    B(2, 2 * i) = c[i] / twoA;
    B(2, 2 * i + 1) = b[i] / twoA;
  }
  return (0.5 * twoA) * (B.transpose() * D * B);
}

}  // namespace detail

/// Closed-form element matrix. quad4/hex8 must be axis-aligned boxes.
inline ElementMatrix element_stiffness_closed_form(ElementType t, std::span<const double> coords,
                                                   const Eigen::MatrixXd& D) {
  detail::check_coords(t, coords);
  if (t == ElementType::tri3) return detail::tri3_closed_form(coords, D);
  const int dim = element_dim(t);
  std::array<double, 3> h{};
  for (int q = 0; q < dim; ++q) {
    // local node 0 sits at the low corner, node 2 (quad) / 6 (hex) at the high one
    const int far = t == ElementType::quad4 ? 2 : 6;
    h[q] = coords[far * dim + q] - coords[q];
    if (!(h[q] > 0.0)) throw InvalidArgument("box element has non-positive extent");
  }
  return detail::box_closed_form(t, std::span<const double>(h.data(), dim), D);
}

/// Element matrix for unit Young's modulus on the reference cell with the
/// given per-axis spacing (tri3: the lower triangle of that cell).
inline ElementMatrix unit_element_stiffness(ElementType t, const SimpMaterial& mat,
                                            std::span<const double> spacing,
                                            IntegrationRule rule) {
  const int dim = element_dim(t);
  if (spacing.size() < static_cast<std::size_t>(dim)) throw InvalidArgument("spacing has too few entries");
  const bool needs_3d = t == ElementType::hex8;
  if (needs_3d != (mat.assumption == PlaneAssumption::solid_3d))
    throw InvalidArgument("material assumption does not match element type " + to_string(t));
  const Eigen::MatrixXd D = elasticity_matrix(mat);

  std::vector<double> coords;
  if (t == ElementType::tri3) {
    coords = {0.0, 0.0, spacing[0], 0.0, spacing[0], spacing[1]};
  } else {
    const int npe = nodes_per_element(t);
    for (int i = 0; i < npe; ++i)
      for (int q = 0; q < dim; ++q) coords.push_back(detail::kCornerBits[i][q] * spacing[q]);
  }
  return rule == IntegrationRule::quadrature ? element_stiffness_quadrature(t, coords, D)
                                             : element_stiffness_closed_form(t, coords, D);
}

/// Node coordinates of element e, flattened (npe*dim).
inline std::vector<double> element_coords(const Mesh& m, std::size_t e) {
  std::vector<double> x;
  x.reserve(m.npe() * m.dim);
  for (int n : m.element(e)) {
    auto p = m.node(n);
    x.insert(x.end(), p.begin(), p.end());
  }
  return x;
}

}  // namespace topopt
