#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "topopt/error.hpp"

namespace topopt {

enum class PlaneAssumption { plane_stress, solid_3d };

/// Modified SIMP: E(rho) = Emin + rho^p (E0 - Emin).
struct SimpMaterial {
  double E0 = 1.0;
  double Emin = 1e-9;
  double penal = 3.0;
  double nu = 0.3;
  PlaneAssumption assumption = PlaneAssumption::plane_stress;

  void validate() const {
    if (!(Emin > 0.0 && Emin < E0)) throw InvalidArgument("SIMP requires 0 < Emin < E0");
    if (!(penal >= 1.0)) throw InvalidArgument("SIMP penalization must be >= 1");
    if (!(nu >= 0.0 && nu < 0.5)) throw InvalidArgument("Poisson ratio must lie in [0, 0.5)");
  }

  [[nodiscard]] static SimpMaterial for_dim(int dim) {
    SimpMaterial m;
    m.assumption = dim == 3 ? PlaneAssumption::solid_3d : PlaneAssumption::plane_stress;
    return m;
  }
};

namespace detail {
inline void check_density(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0))
    throw DomainError("density " + std::to_string(rho) + " outside [0, 1]");
}
}  // namespace detail

inline double interpolate_modulus(const SimpMaterial& m, double rho) {
  detail::check_density(rho);
  return m.Emin + std::pow(rho, m.penal) * (m.E0 - m.Emin);
}

inline double modulus_derivative(const SimpMaterial& m, double rho) {
  detail::check_density(rho);
  return m.penal * std::pow(rho, m.penal - 1.0) * (m.E0 - m.Emin);
}

inline std::vector<double> interpolate_modulus(const SimpMaterial& m, std::span<const double> rho) {
  std::vector<double> out(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) out[i] = interpolate_modulus(m, rho[i]);
  return out;
}

inline std::vector<double> modulus_derivative(const SimpMaterial& m, std::span<const double> rho) {
  std::vector<double> out(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) out[i] = modulus_derivative(m, rho[i]);
  return out;
}

/// Constitutive matrix in Voigt notation for unit Young's modulus.
/// Plane stress: 3x3 with shear row (1-nu)/2. Solid: 6x6 with engineering
/// shear strains ordered xy, yz, zx.
inline Eigen::MatrixXd elasticity_matrix(const SimpMaterial& m) {
  const double nu = m.nu;
  if (!(nu >= 0.0 && nu < 0.5)) throw InvalidArgument("Poisson ratio must lie in [0, 0.5)");
  if (m.assumption == PlaneAssumption::plane_stress) {
    Eigen::MatrixXd D(3, 3);
    const double s = 1.0 / (1.0 - nu * nu);
    D << s, s * nu, 0.0,
         s * nu, s, 0.0,
         0.0, 0.0, s * (1.0 - nu) / 2.0;
    return D;
  }
  const double lambda = nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  const double mu = 1.0 / (2.0 * (1.0 + nu));
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(6, 6);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) D(i, j) = lambda;
    D(i, i) = lambda + 2.0 * mu;
    D(i + 3, i + 3) = mu;
  }
  return D;
}

}  // namespace topopt
