#pragma once

#include <numeric>
#include <span>
#include <vector>

#include "topopt/assembly.hpp"
#include "topopt/material.hpp"
#include "topopt/mesh.hpp"
#include "topopt/parallel.hpp"
#include "topopt/problems.hpp"
#include "topopt/solver.hpp"
#include "topopt/system.hpp"

namespace topopt {

/// Finite-element state for c(rho) = F^T U(rho). Owns the mesh, dof map,
/// assembler and solver; the displacement of the most recent evaluation is
/// cached for the sensitivity.
class ComplianceProblem {
 public:
  ComplianceProblem(Mesh mesh, ProblemDefinition problem, SimpMaterial material,
                    AssemblyMethod assembly = AssemblyMethod::fast, SolverKind solver = SolverKind::direct)
      : mesh_(std::move(mesh)),
        dofs_(build_dof_map(mesh_)),
        geometry_(element_geometry(mesh_)),
        problem_(std::move(problem)),
        assembler_(mesh_, dofs_, material, assembly),
        solver_(solver),
        F_(assemble_load(problem_, mesh_, dofs_)),
        fixed_(dirichlet_dofs(problem_, mesh_)),
        U_(dofs_.n_dofs, 0.0) {
    rhs_ = F_;
    for (int i : fixed_) rhs_[i] = 0.0;
  }

  // assembler_ points into mesh_/dofs_
  ComplianceProblem(const ComplianceProblem&) = delete;
  ComplianceProblem& operator=(const ComplianceProblem&) = delete;

  [[nodiscard]] const Mesh& mesh() const { return mesh_; }
  [[nodiscard]] const DofMap& dofs() const { return dofs_; }
  [[nodiscard]] const ElementGeometry& geometry() const { return geometry_; }
  [[nodiscard]] const ProblemDefinition& problem() const { return problem_; }
  [[nodiscard]] const SimpMaterial& material() const { return assembler_.material(); }
  [[nodiscard]] std::span<const double> load() const { return F_; }
  [[nodiscard]] std::span<const int> fixed_dofs() const { return fixed_; }
  [[nodiscard]] std::span<const double> displacement() const { return U_; }
  [[nodiscard]] const SolveReport& last_solve() const { return last_solve_; }
  [[nodiscard]] StiffnessAssembler& assembler() { return assembler_; }
  [[nodiscard]] std::size_t n_elements() const { return mesh_.n_elements(); }

  /// Assembles K(rho), solves, returns F^T U.
  double compliance(std::span<const double> rho_physical) {
    assembler_.assemble(rho_physical, K_);
    apply_dirichlet_in_place(K_, rhs_, fixed_);
    last_solve_ = solver_.solve(K_, rhs_, U_);
    return dot(F_, U_);
  }

  /// dc_e = -E'(rho_e) u_e^T K_e^0 u_e for the displacement of the last
  /// compliance() call.
  [[nodiscard]] std::vector<double> compliance_sensitivity(std::span<const double> rho_physical) {
    const std::size_t ne = mesh_.n_elements();
    if (rho_physical.size() != ne) throw InvalidArgument("density array length does not match mesh");
    std::vector<double> dc(ne);
    // fill the K_e^0 cache before going parallel
    (void)assembler_.unit_stiffness(0);
    const int nd = dofs_.dofs_per_element;
    parallel_for(ne, [&](std::size_t e) {
      const ElementMatrix& k = assembler_.unit_stiffness(e);
      auto d = dofs_.element_dofs(e);
      Eigen::VectorXd ue(nd);
      for (int a = 0; a < nd; ++a) ue[a] = U_[d[a]];
      dc[e] = -modulus_derivative(material(), rho_physical[e]) * ue.dot(k * ue);
    });
    return dc;
  }

  /// Per-element strain energy factor u_e^T K_e^0 u_e.
  [[nodiscard]] std::vector<double> element_energies() {
    const std::size_t ne = mesh_.n_elements();
    std::vector<double> out(ne);
    const int nd = dofs_.dofs_per_element;
    for (std::size_t e = 0; e < ne; ++e) {
      const ElementMatrix& k = assembler_.unit_stiffness(e);
      auto d = dofs_.element_dofs(e);
      Eigen::VectorXd ue(nd);
      for (int a = 0; a < nd; ++a) ue[a] = U_[d[a]];
      out[e] = ue.dot(k * ue);
    }
    return out;
  }

  [[nodiscard]] double volume_fraction(std::span<const double> rho) const {
    return weighted_fraction(geometry_.volumes, rho);
  }

  [[nodiscard]] std::vector<double> volume_sensitivity() const {
    return volume_fraction_gradient(geometry_.volumes);
  }

  [[nodiscard]] static double weighted_fraction(std::span<const double> volumes, std::span<const double> rho) {
    double num = 0.0, den = 0.0;
    for (std::size_t e = 0; e < volumes.size(); ++e) {
      num += volumes[e] * rho[e];
      den += volumes[e];
    }
    return num / den;
  }

  [[nodiscard]] static std::vector<double> volume_fraction_gradient(std::span<const double> volumes) {
    const double total = std::accumulate(volumes.begin(), volumes.end(), 0.0);
    std::vector<double> g(volumes.size());
    for (std::size_t e = 0; e < g.size(); ++e) g[e] = volumes[e] / total;
    return g;
  }

 private:
  Mesh mesh_;
  DofMap dofs_;
  ElementGeometry geometry_;
  ProblemDefinition problem_;
  StiffnessAssembler assembler_;
  LinearSolver solver_;
  std::vector<double> F_;
  std::vector<double> rhs_;
  std::vector<int> fixed_;
  CsrMatrix K_;
  std::vector<double> U_;
  SolveReport last_solve_;
};

}  // namespace topopt
