#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "topopt/error.hpp"
#include "topopt/mesh.hpp"
#include "topopt/problems.hpp"
#include "topopt/sparse.hpp"

namespace topopt {

/// K U = F after Dirichlet elimination.
struct SparseSystem {
  CsrMatrix K;
  std::vector<double> F;
  std::vector<int> fixed_dofs;  // sorted, unique
};

namespace detail {
inline void check_problem_matches(const ProblemDefinition& p, const Mesh& m) {
  if (p.dim != m.dim) throw ConfigError("problem '" + p.name + "' is " + std::to_string(p.dim) + "-D, mesh is " + std::to_string(m.dim) + "-D");
  auto box = m.bounding_box();
  for (std::size_t i = 0; i < box.size(); ++i)
    if (std::abs(box[i] - p.box[i]) > 1e-9 * std::max(1.0, std::abs(p.box[i])))
      throw ConfigError("problem '" + p.name + "' domain does not match the mesh bounding box");
}
}  // namespace detail

/// Nodal load vector: value T at the load axis of every node the load mask
/// selects.
inline std::vector<double> assemble_load(const ProblemDefinition& p, const Mesh& m, const DofMap& d) {
  detail::check_problem_matches(p, m);
  std::vector<double> F(d.n_dofs, 0.0);
  std::size_t hits = 0;
  for (std::size_t n = 0; n < m.n_nodes(); ++n) {
    if (p.load_mask(m.node(n))) {
      F[DofMap::dof(static_cast<int>(n), p.load_axis, m.dim)] = p.load;
      ++hits;
    }
  }
  if (hits == 0) throw ConfigError("no mesh node matches the load mask: " + p.load_description);
  return F;
}

/// Fixed dofs from the per-axis Dirichlet masks, sorted.
inline std::vector<int> dirichlet_dofs(const ProblemDefinition& p, const Mesh& m) {
  detail::check_problem_matches(p, m);
  std::vector<int> fixed;
  for (std::size_t n = 0; n < m.n_nodes(); ++n) {
    auto x = m.node(n);
    for (int a = 0; a < m.dim && a < static_cast<int>(p.dirichlet_masks.size()); ++a)
      if (p.dirichlet_masks[a] && p.dirichlet_masks[a](x))
        fixed.push_back(DofMap::dof(static_cast<int>(n), a, m.dim));
  }
  if (fixed.empty()) throw ConfigError("problem '" + p.name + "' fixes no dofs on this mesh");
  return fixed;
}

/// Symmetric elimination in place: fixed rows and columns zeroed, unit
/// diagonal, zero right-hand side. The sparsity pattern is kept.
inline void apply_dirichlet_in_place(CsrMatrix& K, std::span<double> F, std::span<const int> fixed) {
  std::vector<char> is_fixed(K.n, 0);
  for (int i : fixed) {
    if (i < 0 || i >= K.n) throw InvalidArgument("fixed dof " + std::to_string(i) + " out of range");
    is_fixed[i] = 1;
  }
  for (int i = 0; i < K.n; ++i) {
    for (int k = K.row_ptr[i]; k < K.row_ptr[i + 1]; ++k) {
      const int j = K.col[k];
      if (is_fixed[i] || is_fixed[j]) K.val[k] = (i == j) ? 1.0 : 0.0;
    }
  }
  for (int i : fixed) F[i] = 0.0;
}

inline SparseSystem apply_dirichlet(CsrMatrix K, std::vector<double> F, std::vector<int> fixed) {
  std::sort(fixed.begin(), fixed.end());
  fixed.erase(std::unique(fixed.begin(), fixed.end()), fixed.end());
  apply_dirichlet_in_place(K, F, fixed);
  return SparseSystem{std::move(K), std::move(F), std::move(fixed)};
}

}  // namespace topopt
