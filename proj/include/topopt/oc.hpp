#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "topopt/error.hpp"

namespace topopt {

struct OcOptions {
  double move = 0.2;
  double eta = 0.5;
  double lambda_lo = 0.0;
  double lambda_hi = 1e9;
  double bisection_rtol = 1e-3;
  int max_bisections = 200;

  void validate() const {
    if (!(move > 0.0 && move <= 1.0)) throw InvalidArgument("OC move limit must lie in (0, 1]");
    if (!(eta > 0.0 && eta <= 1.0)) throw InvalidArgument("OC damping exponent must lie in (0, 1]");
    if (!(lambda_lo >= 0.0 && lambda_hi > lambda_lo)) throw InvalidArgument("OC lambda bracket is invalid");
  }
};

struct OcResult {
  std::vector<double> rho;
  double lambda = 0.0;
  int bisections = 0;
  bool bracket_failed = false;  ///< target volume unreachable inside the move limits
};

/// Volume fraction of a candidate design (after any density filtering).
using VolumeMeasure = std::function<double(std::span<const double>)>;

/// rho_e B_e^eta with B_e = -dc_e / (lambda dg_e), clipped to the move
/// limits and then to [0, 1].
inline std::vector<double> oc_candidate(std::span<const double> rho, std::span<const double> dc,
                                        std::span<const double> dg, double lambda, const OcOptions& opts) {
  std::vector<double> out(rho.size());
  for (std::size_t e = 0; e < rho.size(); ++e) {
    const double B = std::max(0.0, -dc[e] / (lambda * dg[e]));
    double x = rho[e] * std::pow(B, opts.eta);
    x = std::clamp(x, rho[e] - opts.move, rho[e] + opts.move);
    out[e] = std::clamp(x, 0.0, 1.0);
  }
  return out;
}

/// Optimality-criteria update; the Lagrange multiplier is found by
/// bisection until (hi - lo) / (hi + lo) <= rtol, raising lambda while the
/// candidate's volume exceeds the target.
inline OcResult oc_update(std::span<const double> rho, std::span<const double> dc, std::span<const double> dg,
                          double target_vf, const OcOptions& opts, const VolumeMeasure& volume) {
  opts.validate();
  if (dc.size() != rho.size() || dg.size() != rho.size()) throw InvalidArgument("OC inputs differ in length");
  for (double g : dg)
    if (!(g > 0.0)) throw InvalidArgument("OC requires positive volume sensitivities");

  double l1 = opts.lambda_lo, l2 = opts.lambda_hi;
  OcResult r;
  while ((l2 - l1) / (l1 + l2) > opts.bisection_rtol && r.bisections < opts.max_bisections) {
    const double lmid = 0.5 * (l1 + l2);
    r.rho = oc_candidate(rho, dc, dg, lmid, opts);
    if (volume(r.rho) > target_vf)
      l1 = lmid;
    else
      l2 = lmid;
    r.lambda = lmid;
    ++r.bisections;
  }
  if (r.rho.empty()) {
    r.lambda = 0.5 * (l1 + l2);
    r.rho = oc_candidate(rho, dc, dg, r.lambda, opts);
  }
  const double hi_gap = (opts.lambda_hi - l2) / opts.lambda_hi;
  r.bracket_failed = r.bisections >= opts.max_bisections || hi_gap <= opts.bisection_rtol;
  return r;
}

}  // namespace topopt
