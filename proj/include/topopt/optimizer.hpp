#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "topopt/compliance.hpp"
#include "topopt/error.hpp"
#include "topopt/filters.hpp"
#include "topopt/mma.hpp"
#include "topopt/oc.hpp"

namespace topopt {

enum class OptimizerKind { oc, mma };

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::oc ? "oc" : "mma"; }

inline OptimizerKind parse_optimizer_kind(const std::string& s) {
  if (s == "oc") return OptimizerKind::oc;
  if (s == "mma") return OptimizerKind::mma;
  throw InvalidArgument("unknown optimizer '" + s + "'");
}

/// Design variables and the physical densities derived from them.
struct DensityField {
  std::vector<double> values;
  std::vector<double> physical;
};

struct HistoryRecord {
  int iter = 0;
  double compliance = 0.0;
  double volume_fraction = 0.0;
  double max_change = 0.0;
  double seconds = 0.0;
};

/// One row per iteration; compliance and volume fraction are those of the
/// design evaluated at the start of the iteration, max_change is the update
/// taken from it.
struct OptimizationHistory {
  std::vector<HistoryRecord> records;

  [[nodiscard]] std::size_t size() const { return records.size(); }
  [[nodiscard]] const HistoryRecord& back() const { return records.back(); }
};

struct OptimizationOptions {
  OptimizerKind optimizer = OptimizerKind::oc;
  double volfrac = 0.5;
  int max_iterations = 200;
  double tolerance = 0.01;
  OcOptions oc;
  MmaOptions mma;  // n, bounds and constants are filled in when left empty
};

struct OptimizationResult {
  DensityField density;
  OptimizationHistory history;
  bool converged = false;
  int iterations = 0;
  int oc_bracket_failures = 0;
  double max_mma_kkt_residual = 0.0;
};

/// Called after every iteration with the 1-based iteration count and the
/// physical densities that were evaluated in it.
using IterationObserver = std::function<void(int, std::span<const double>)>;

/// Evaluates the filtered compliance objective and its gradient with respect
/// to the design variables (chain rule through density/Heaviside filters,
/// heuristic smoothing for the sensitivity filter).
struct ObjectiveEvaluation {
  std::vector<double> physical;
  double compliance = 0.0;
  double volume_fraction = 0.0;
  std::vector<double> dc;  // w.r.t. design variables
  std::vector<double> dv;  // volume fraction gradient w.r.t. design variables
};

inline ObjectiveEvaluation evaluate_objective(ComplianceProblem& fe, const FilterOperator& filter,
                                              std::span<const double> x) {
  ObjectiveEvaluation ev;
  ev.physical = filter.physical(x);
  ev.compliance = fe.compliance(ev.physical);
  ev.volume_fraction = fe.volume_fraction(ev.physical);
  ev.dc = fe.compliance_sensitivity(ev.physical);
  ev.dv = fe.volume_sensitivity();
  if (filter.kind() == FilterKind::sensitivity) {
    ev.dc = filter.filter_sensitivities(x, ev.dc);
  } else if (filter.transforms_density()) {
    ev.dc = filter.physical_backward(x, ev.dc);
    ev.dv = filter.physical_backward(x, ev.dv);
  }
  return ev;
}

/// Outer loop: evaluate, filter, update until the inf-norm design change
/// drops to `tolerance` or `max_iterations` is reached. A Heaviside beta
/// increase restarts the convergence test.
inline OptimizationResult run_optimization(ComplianceProblem& fe, FilterOperator& filter,
                                           std::vector<double> x0, const OptimizationOptions& opts,
                                           const IterationObserver& observer = {}) {
  const std::size_t ne = fe.n_elements();
  if (x0.size() != ne) throw InvalidArgument("initial density has wrong length");
  if (!(opts.volfrac > 0.0 && opts.volfrac < 1.0)) throw InvalidArgument("volume fraction must lie in (0, 1)");
  for (double v : x0)
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("initial density outside [0, 1]");

  MmaOptions mo = opts.mma;
  if (mo.n == 0) {
    MmaOptions def = MmaOptions::box(static_cast<int>(ne));
    def.asyinit = mo.asyinit;
    def.asyincr = mo.asyincr;
    def.asydecr = mo.asydecr;
    def.albefa = mo.albefa;
    def.move = mo.move;
    def.a0 = mo.a0;
    mo = def;
  }
  std::unique_ptr<MmaOptimizer> mma;
  if (opts.optimizer == OptimizerKind::mma) mma = std::make_unique<MmaOptimizer>(mo);

  OptimizationResult r;
  std::vector<double> x = std::move(x0);
  const auto t0 = std::chrono::steady_clock::now();

  for (int k = 1; k <= opts.max_iterations; ++k) {
    try {
      ObjectiveEvaluation ev = evaluate_objective(fe, filter, x);

      std::vector<double> xnew;
      if (opts.optimizer == OptimizerKind::oc) {
        VolumeMeasure vol;
        if (filter.transforms_density()) {
          vol = [&](std::span<const double> cand) { return fe.volume_fraction(filter.physical(cand)); };
        } else {
          vol = [&](std::span<const double> cand) { return fe.volume_fraction(cand); };
        }
        OcResult oc = oc_update(x, ev.dc, ev.dv, opts.volfrac, opts.oc, vol);
        if (oc.bracket_failed) ++r.oc_bracket_failures;
        xnew = std::move(oc.rho);
      } else {
        const double g = ev.volume_fraction - opts.volfrac;
        Eigen::MatrixXd dg(1, static_cast<Eigen::Index>(ne));
        for (std::size_t e = 0; e < ne; ++e) dg(0, static_cast<Eigen::Index>(e)) = ev.dv[e];
        MmaStep step = mma->update(x, ev.dc, std::span<const double>(&g, 1), dg);
        r.max_mma_kkt_residual = std::max(r.max_mma_kkt_residual, step.kkt_residual);
        xnew = std::move(step.x);
      }

      double change = 0.0;
      for (std::size_t e = 0; e < ne; ++e) change = std::max(change, std::abs(xnew[e] - x[e]));
      x = std::move(xnew);

      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      r.history.records.push_back({k, ev.compliance, ev.volume_fraction, change, secs});
      r.iterations = k;
      if (observer) observer(k, ev.physical);

      bool restarted = false;
      if (filter.kind() == FilterKind::heaviside)
        restarted = filter.continuation_step(k, change, opts.tolerance).changed;
      if (!restarted && change <= opts.tolerance) {
        r.converged = true;
        break;
      }
    } catch (Error& e) {
      e.set_iteration(k);
      throw;
    }
  }

  r.density.physical = filter.physical(x);
  r.density.values = std::move(x);
  return r;
}

}  // namespace topopt
