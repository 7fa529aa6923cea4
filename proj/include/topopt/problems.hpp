#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "topopt/error.hpp"

namespace topopt {

using PointPredicate = std::function<bool(std::span<const double>)>;

/// Benchmark boundary-value problem: a box domain, a nodal point load
/// assigned per matching node, and per-axis Dirichlet masks. Body force is
/// zero.
struct ProblemDefinition {
  std::string name;
  int dim = 2;
  std::vector<double> box;  // [min0, max0, min1, max1(, min2, max2)]
  double load = -1.0;       // T, assigned to every node the load mask selects
  int load_axis = 1;
  PointPredicate load_mask;
  std::string load_description;
  std::vector<PointPredicate> dirichlet_masks;  // one per axis; empty function = never fixed
  double eps = 1e-12;

  [[nodiscard]] double lo(int a) const { return box[2 * a]; }
  [[nodiscard]] double hi(int a) const { return box[2 * a + 1]; }
};

namespace detail {

inline void check_box(std::span<const double> box) {
  for (std::size_t a = 0; a + 1 < box.size(); a += 2)
    if (!(box[a] < box[a + 1])) throw InvalidArgument("problem box is not well-ordered");
}

inline void check_load(double T) {
  if (T == 0.0) throw InvalidArgument("load magnitude must be non-zero");
}

}  // namespace detail

/// Left edge clamped in x and y; load at the bottom-right corner.
inline ProblemDefinition cantilever_2d(double xmin, double xmax, double ymin, double ymax,
                                       double T = -1.0) {
  ProblemDefinition p;
  p.name = "cantilever2d";
  p.dim = 2;
  p.box = {xmin, xmax, ymin, ymax};
  detail::check_box(p.box);
  detail::check_load(T);
  p.load = T;
  p.load_axis = 1;
  const double eps = p.eps;
  p.load_mask = [=](std::span<const double> x) {
    return std::abs(x[0] - xmax) < eps && std::abs(x[1] - ymin) < eps;
  };
  p.load_description = "y-load at (x = xmax, y = ymin)";
  auto left = [=](std::span<const double> x) { return std::abs(x[0] - xmin) < eps; };
  p.dirichlet_masks = {left, left};
  return p;
}

/// Half MBB beam: left edge symmetric (x fixed), bottom-right corner
/// supported in y; load at the top-left corner.
inline ProblemDefinition mbb_2d(double xmin, double xmax, double ymin, double ymax,
                                double T = -1.0) {
  ProblemDefinition p;
  p.name = "mbb2d";
  p.dim = 2;
  p.box = {xmin, xmax, ymin, ymax};
  detail::check_box(p.box);
  detail::check_load(T);
  p.load = T;
  p.load_axis = 1;
  const double eps = p.eps;
  p.load_mask = [=](std::span<const double> x) {
    return std::abs(x[0] - xmin) < eps && std::abs(x[1] - ymax) < eps;
  };
  p.load_description = "y-load at (x = xmin, y = ymax)";
  p.dirichlet_masks = {
      [=](std::span<const double> x) { return std::abs(x[0] - xmin) < eps; },
      [=](std::span<const double> x) { return std::abs(x[0] - xmax) < eps && std::abs(x[1] - ymin) < eps; }};
  return p;
}

/// Left face clamped in all axes; load T on every node of the
/// (x = xmax, y = ymin) edge, so the total load is T times the node count
/// along z.
inline ProblemDefinition cantilever_3d(double xmin, double xmax, double ymin, double ymax,
                                       double zmin, double zmax, double T = -1.0) {
  ProblemDefinition p;
  p.name = "cantilever3d";
  p.dim = 3;
  p.box = {xmin, xmax, ymin, ymax, zmin, zmax};
  detail::check_box(p.box);
  detail::check_load(T);
  p.load = T;
  p.load_axis = 1;
  const double eps = p.eps;
  p.load_mask = [=](std::span<const double> x) {
    return std::abs(x[0] - xmax) < eps && std::abs(x[1] - ymin) < eps;
  };
  p.load_description = "y-load on edge (x = xmax, y = ymin)";
  auto left = [=](std::span<const double> x) { return std::abs(x[0] - xmin) < eps; };
  p.dirichlet_masks = {left, left, left};
  return p;
}

inline const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names{"cantilever2d", "mbb2d", "cantilever3d"};
  return names;
}

/// Problem by name on box [0, L0] x [0, L1] (x [0, L2]).
inline ProblemDefinition make_problem(const std::string& name, std::span<const double> extent,
                                      double T = -1.0) {
  auto need = [&](std::size_t d) {
    if (extent.size() != d)
      throw InvalidArgument("problem '" + name + "' needs a " + std::to_string(d) + "-D extent");
  };
  if (name == "cantilever2d") {
    need(2);
    return cantilever_2d(0, extent[0], 0, extent[1], T);
  }
  if (name == "mbb2d") {
    need(2);
    return mbb_2d(0, extent[0], 0, extent[1], T);
  }
  if (name == "cantilever3d") {
    need(3);
    return cantilever_3d(0, extent[0], 0, extent[1], 0, extent[2], T);
  }
  throw InvalidArgument("unknown problem '" + name + "' (expected cantilever2d | mbb2d | cantilever3d)");
}

}  // namespace topopt
