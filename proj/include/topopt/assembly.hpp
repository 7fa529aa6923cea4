#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "topopt/element.hpp"
#include "topopt/error.hpp"
#include "topopt/material.hpp"
#include "topopt/mesh.hpp"
#include "topopt/parallel.hpp"
#include "topopt/sparse.hpp"

namespace topopt {

/// How the global stiffness K(rho) = sum_e E(rho_e) K_e^0 is built.
enum class AssemblyMethod {
  standard,  ///< re-integrates every element matrix by quadrature on each call
  fast,      ///< integrates K_e^0 once on the first call, then only rescales
  symbolic,  ///< closed-form K_e^0 computed on the first call, then only rescales
};

inline std::string to_string(AssemblyMethod m) {
  switch (m) {
    case AssemblyMethod::standard: return "standard";
    case AssemblyMethod::fast: return "fast";
    case AssemblyMethod::symbolic: return "symbolic";
  }
  return "?";
}

inline AssemblyMethod parse_assembly_method(const std::string& s) {
  if (s == "standard") return AssemblyMethod::standard;
  if (s == "fast") return AssemblyMethod::fast;
  if (s == "symbolic") return AssemblyMethod::symbolic;
  throw InvalidArgument("unknown assembly method '" + s + "'");
}

/// Global stiffness assembler. Holds references to the mesh and dof map,
/// which must outlive it. The sparsity pattern and the element-to-CSR
/// scatter map are built on the first assembly.
class StiffnessAssembler {
 public:
  StiffnessAssembler(const Mesh& mesh, const DofMap& dofs, const SimpMaterial& mat,
                     AssemblyMethod method)
      : mesh_(&mesh), dofs_(&dofs), mat_(mat), method_(method), D_(elasticity_matrix(mat)) {
    mat_.validate();
    if ((mesh.dim == 3) != (mat.assumption == PlaneAssumption::solid_3d))
      throw InvalidArgument("material assumption does not match mesh dimension");
  }

  [[nodiscard]] AssemblyMethod method() const { return method_; }
  [[nodiscard]] const SimpMaterial& material() const { return mat_; }

  /// Number of element matrices integrated by quadrature so far.
  [[nodiscard]] std::size_t quadrature_evaluations() const { return quadrature_evals_; }

  /// K(rho) with SIMP moduli.
  [[nodiscard]] CsrMatrix assemble(std::span<const double> rho) {
    CsrMatrix K;
    assemble(rho, K);
    return K;
  }

  void assemble(std::span<const double> rho, CsrMatrix& K) {
    check_length(rho.size());
    assemble_moduli(interpolate_modulus(mat_, rho), K);
  }

  /// K = sum_e moduli[e] * K_e^0. Reuses K's storage when it already
  /// carries this assembler's pattern.
  void assemble_moduli(std::span<const double> moduli, CsrMatrix& K) {
    check_length(moduli.size());
    ensure_pattern();
    if (K.n != pattern_.n || K.col.size() != pattern_.col.size()) K = pattern_;
    std::fill(K.val.begin(), K.val.end(), 0.0);

    const std::size_t ne = mesh_->n_elements();
    const int nd = dofs_->dofs_per_element;
    const std::size_t block = static_cast<std::size_t>(nd) * nd;

    if (method_ == AssemblyMethod::standard) {
      // Integrate in chunks (parallel), scatter sequentially in element order.
      constexpr std::size_t chunk = 512;
      std::vector<ElementMatrix> buf(chunk);
      for (std::size_t e0 = 0; e0 < ne; e0 += chunk) {
        const std::size_t n = std::min(chunk, ne - e0);
        parallel_for(n, [&](std::size_t i) {
          buf[i] = element_stiffness_quadrature(mesh_->element_type, element_coords(*mesh_, e0 + i), D_);
        });
        quadrature_evals_ += n;
        for (std::size_t i = 0; i < n; ++i) scatter(e0 + i, moduli[e0 + i], buf[i], K, block, nd);
      }
      return;
    }

    ensure_cache();
    for (std::size_t e = 0; e < ne; ++e)
      scatter(e, moduli[e], cache_[cache_index(e)], K, block, nd);
  }

  /// K_e^0 of element e, for sensitivity evaluation. Grids share a single
  /// matrix. For `standard` this cache is read only by callers; assembly
  /// itself keeps re-integrating.
  const ElementMatrix& unit_stiffness(std::size_t e) {
    ensure_cache();
    return cache_[cache_index(e)];
  }

  /// Sparsity pattern of K with zero values.
  const CsrMatrix& pattern() {
    ensure_pattern();
    return pattern_;
  }

 private:
  void check_length(std::size_t n) const {
    if (n != mesh_->n_elements())
      throw InvalidArgument("per-element array has " + std::to_string(n) + " entries, mesh has " +
                            std::to_string(mesh_->n_elements()));
  }

  [[nodiscard]] std::size_t cache_index(std::size_t e) const {
    return mesh_->congruent_elements() ? 0 : e;
  }

  void ensure_cache() {
    if (!cache_.empty()) return;
    const std::size_t count = mesh_->congruent_elements() ? 1 : mesh_->n_elements();
    cache_.resize(count);
    const bool closed = method_ == AssemblyMethod::symbolic;
    parallel_for(count, [&](std::size_t e) {
      auto x = element_coords(*mesh_, e);
      cache_[e] = closed ? element_stiffness_closed_form(mesh_->element_type, x, D_)
                         : element_stiffness_quadrature(mesh_->element_type, x, D_);
    });
    if (!closed) quadrature_evals_ += count;
  }

  void scatter(std::size_t e, double scale, const ElementMatrix& k, CsrMatrix& K, std::size_t block,
               int nd) const {
    const int* map = scatter_.data() + e * block;
    for (int b = 0; b < nd; ++b)
      for (int a = 0; a < nd; ++a) K.val[map[b * nd + a]] += scale * k(a, b);
  }

  void ensure_pattern() {
    if (pattern_.n > 0) return;
    const int n = static_cast<int>(dofs_->n_dofs);
    const std::size_t ne = mesh_->n_elements();
    const int nd = dofs_->dofs_per_element;

    std::vector<std::vector<int>> rows(n);
    for (std::size_t e = 0; e < ne; ++e) {
      auto d = dofs_->element_dofs(e);
      for (int a : d) rows[a].insert(rows[a].end(), d.begin(), d.end());
    }
    pattern_.n = n;
    pattern_.row_ptr.assign(n + 1, 0);
    for (int i = 0; i < n; ++i) {
      auto& r = rows[i];
      std::sort(r.begin(), r.end());
      r.erase(std::unique(r.begin(), r.end()), r.end());
      pattern_.row_ptr[i + 1] = pattern_.row_ptr[i] + static_cast<int>(r.size());
    }
    pattern_.col.reserve(pattern_.row_ptr[n]);
    for (auto& r : rows) pattern_.col.insert(pattern_.col.end(), r.begin(), r.end());
    pattern_.val.assign(pattern_.col.size(), 0.0);

    // scatter_[e][b*nd + a] = CSR slot of (dof_a, dof_b)
    scatter_.resize(ne * nd * nd);
    for (std::size_t e = 0; e < ne; ++e) {
      auto d = dofs_->element_dofs(e);
      for (int b = 0; b < nd; ++b)
        for (int a = 0; a < nd; ++a) scatter_[e * nd * nd + b * nd + a] = pattern_.find(d[a], d[b]);
    }
  }

  const Mesh* mesh_;
  const DofMap* dofs_;
  SimpMaterial mat_;
  AssemblyMethod method_;
  Eigen::MatrixXd D_;
  CsrMatrix pattern_{0, {0}, {}, {}};
  std::vector<int> scatter_;
  std::vector<ElementMatrix> cache_;
  std::size_t quadrature_evals_ = 0;
};

}  // namespace topopt
