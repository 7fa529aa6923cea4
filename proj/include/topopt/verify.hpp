#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "topopt/compliance.hpp"
#include "topopt/error.hpp"
#include "topopt/filters.hpp"
#include "topopt/oc.hpp"
#include "topopt/optimizer.hpp"
#include "topopt/setup.hpp"

namespace topopt {

using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences with step h; one-sided where rho +- h would leave
/// [0, 1].
inline std::vector<double> fd_gradient(const ScalarFunction& f, std::span<const double> rho, double h = 1e-6) {
  if (!(h > 0.0)) throw InvalidArgument("FD step must be positive");
  std::vector<double> x(rho.begin(), rho.end());
  std::vector<double> g(x.size());
  double f0 = 0.0;
  bool have_f0 = false;
  auto base = [&] {
    if (!have_f0) {
      f0 = f(rho);
      have_f0 = true;
    }
    return f0;
  };
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const bool up = xi + h <= 1.0, down = xi - h >= 0.0;
    if (up && down) {
      x[i] = xi + h;
      const double fp = f(x);
      x[i] = xi - h;
      const double fm = f(x);
      g[i] = (fp - fm) / (2.0 * h);
    } else if (up) {
      x[i] = xi + h;
      g[i] = (f(x) - base()) / h;
    } else {
      x[i] = xi - h;
      g[i] = (base() - f(x)) / h;
    }
    x[i] = xi;
  }
  return g;
}

/// O(N^2) construction of the filter weights, rows sorted by column.
inline CsrMatrix brute_force_weights(std::span<const double> centroids, int dim, double r_min) {
  const std::size_t n = centroids.size() / dim;
  CsrMatrix H;
  H.n = static_cast<int>(n);
  H.row_ptr.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double d2 = 0.0;
      for (int a = 0; a < dim; ++a) {
        const double t = centroids[i * dim + a] - centroids[j * dim + a];
        d2 += t * t;
      }
      const double d = std::sqrt(d2);
      if (d < r_min) {
        H.col.push_back(static_cast<int>(j));
        H.val.push_back(r_min - d);
      }
    }
    H.row_ptr[i + 1] = static_cast<int>(H.col.size());
  }
  return H;
}

struct LambdaSweepResult {
  double lambda = 0.0;
  std::vector<double> rho;
};

/// Reference for the OC multiplier: scans a log-spaced grid on
/// [lambda_min, lambda_max] for the first lambda whose candidate meets the
/// volume target, then refines linearly inside that grid cell.
inline LambdaSweepResult oc_lambda_sweep(std::span<const double> rho, std::span<const double> dc,
                                         std::span<const double> dg, double target_vf, const OcOptions& opts,
                                         const VolumeMeasure& volume, double lambda_min = 1e-9,
                                         double lambda_max = 1e9, int coarse = 2000, int fine = 2000) {
  const double r = std::log(lambda_max / lambda_min);
  double prev = lambda_min, hit = lambda_max;
  for (int k = 0; k <= coarse; ++k) {
    const double lam = lambda_min * std::exp(r * k / coarse);
    if (volume(oc_candidate(rho, dc, dg, lam, opts)) <= target_vf) {
      hit = lam;
      break;
    }
    prev = lam;
  }
  LambdaSweepResult out{hit, {}};
  for (int k = 0; k <= fine; ++k) {
    const double lam = prev + (hit - prev) * k / fine;
    if (volume(oc_candidate(rho, dc, dg, lam, opts)) <= target_vf) {
      out.lambda = lam;
      break;
    }
  }
  out.rho = oc_candidate(rho, dc, dg, out.lambda, opts);
  return out;
}

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t worst_element = 0;
  double h = 1e-6;
  std::size_t n_checked = 0;
};

/// Relative error per entry, normalised by max(|fd_i|, 1e-8 * max|fd|) so
/// that entries with vanishing gradient do not blow up the ratio.
inline GradCheckReport compare_gradients(std::span<const double> analytic, std::span<const double> fd, double h) {
  if (analytic.size() != fd.size()) throw InvalidArgument("gradient lengths differ");
  double scale = 0.0;
  for (double v : fd) scale = std::max(scale, std::abs(v));
  GradCheckReport rep;
  rep.h = h;
  rep.n_checked = fd.size();
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double den = std::max({std::abs(fd[i]), 1e-8 * scale, 1e-300});
    const double err = std::abs(analytic[i] - fd[i]) / den;
    if (err > rep.max_rel_err) {
      rep.max_rel_err = err;
      rep.worst_element = i;
    }
  }
  return rep;
}

struct GradCheckConfig {
  std::string problem = "cantilever2d";
  std::vector<int> cells{8, 5};
  bool triangles = false;
  FilterKind filter = FilterKind::none;
  double rmin = 2.0;
  double beta = 8.0;
  double h = 1e-6;
  unsigned seed = 7;
  bool uniform = false;          ///< evaluate at rho = density instead of a random field
  double density = 0.5;
  double corrupt_scale = 1.0;    ///< test hook applied to the analytic gradient
  SimpMaterial material{};
};

/// Threshold a gradcheck is judged against.
inline double gradcheck_threshold(FilterKind k) { return k == FilterKind::heaviside ? 1e-4 : 1e-5; }

/// Analytic gradient of rho -> compliance(physical(rho)) against
/// fd_gradient of the same composed objective.
inline GradCheckReport check_sensitivity_chain(const GradCheckConfig& cfg) {
  if (cfg.filter == FilterKind::sensitivity)
    throw InvalidArgument("the sensitivity filter is heuristic and has no exact gradient to check");
  Benchmark b = make_benchmark(cfg.problem, cfg.cells, cfg.triangles);
  SimpMaterial mat = cfg.material;
  mat.assumption = b.mesh.dim == 3 ? PlaneAssumption::solid_3d : PlaneAssumption::plane_stress;
  const Mesh mesh_copy = b.mesh;
  ComplianceProblem fe(std::move(b.mesh), std::move(b.problem), mat, AssemblyMethod::fast, SolverKind::direct);

  FilterOperator filter;
  if (cfg.filter == FilterKind::none) {
    filter = FilterOperator(FilterKind::none, CsrMatrix::identity(static_cast<int>(fe.n_elements())),
                            fe.geometry().volumes, 1.0);
  } else {
    HeavisideParams hp;
    hp.beta0 = cfg.beta;
    hp.beta_max = std::max(cfg.beta, hp.beta_max);
    filter = build_filter(mesh_copy, cfg.rmin, cfg.filter, hp);
  }

  const std::size_t ne = fe.n_elements();
  std::vector<double> x(ne, cfg.density);
  if (!cfg.uniform) {
    std::mt19937 gen(cfg.seed);
    std::uniform_real_distribution<double> u(0.2, 0.8);
    for (double& v : x) v = u(gen);
  }

  ObjectiveEvaluation ev = evaluate_objective(fe, filter, x);
  for (double& v : ev.dc) v *= cfg.corrupt_scale;
  auto objective = [&](std::span<const double> y) { return fe.compliance(filter.physical(y)); };
  const std::vector<double> fd = fd_gradient(objective, x, cfg.h);
  return compare_gradients(ev.dc, fd, cfg.h);
}

}  // namespace topopt
