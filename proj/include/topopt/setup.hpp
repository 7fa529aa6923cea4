#pragma once

#include <string>
#include <vector>

#include "topopt/error.hpp"
#include "topopt/mesh.hpp"
#include "topopt/problems.hpp"

namespace topopt {

/// Named benchmark discretized on unit cells with the origin at zero, so
/// the domain box is [0, cells_x] x [0, cells_y] (x [0, cells_z]).
struct Benchmark {
  Mesh mesh;
  ProblemDefinition problem;
};

/// Parses "160x100" or "60x20x4".
inline std::vector<int> parse_cells(const std::string& spec) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    std::size_t next = spec.find('x', pos);
    if (next == std::string::npos) next = spec.size();
    const std::string part = spec.substr(pos, next - pos);
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(part, &used);
    } catch (const std::exception&) {
      throw InvalidArgument("cells '" + spec + "' is not of the form NxM or NxMxK");
    }
    if (used != part.size() || v <= 0) throw InvalidArgument("cells '" + spec + "' must be positive integers");
    out.push_back(v);
    pos = next + 1;
  }
  if (out.size() != 2 && out.size() != 3) throw InvalidArgument("cells '" + spec + "' must have 2 or 3 entries");
  return out;
}

inline std::string format_cells(const std::vector<int>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) s += (i ? "x" : "") + std::to_string(cells[i]);
  return s;
}

/// `triangles` selects tri3 for the 2D problems; ignored in 3D.
inline Benchmark make_benchmark(const std::string& name, const std::vector<int>& cells, bool triangles = false,
                                double load = -1.0) {
  std::vector<double> extent(cells.begin(), cells.end());
  Benchmark b{Mesh{}, make_problem(name, extent, load)};
  if (cells.size() == 2 && triangles) {
    const double box[4] = {0.0, extent[0], 0.0, extent[1]};
    b.mesh = triangulate_box(cells[0], cells[1], box);
  } else {
    const std::vector<double> h(cells.size(), 1.0), o(cells.size(), 0.0);
    b.mesh = build_uniform_grid(static_cast<int>(cells.size()), cells, h, o);
  }
  return b;
}

}  // namespace topopt
