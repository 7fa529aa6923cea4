#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "topopt/error.hpp"

namespace topopt {

/// Method of moving asymptotes (Svanberg's 2007 mmasub/subsolv scheme) for
///   min f0(x) + a0 z + sum_i (c_i y_i + d_i y_i^2 / 2)
///   s.t. f_i(x) - a_i z - y_i <= 0,  xmin <= x <= xmax,  y >= 0, z >= 0.
struct MmaOptions {
  int m = 1;
  int n = 0;
  std::vector<double> xmin;
  std::vector<double> xmax;
  double a0 = 1.0;
  std::vector<double> a;  // default zeros(m)
  std::vector<double> c;  // default 1e4 * ones(m)
  std::vector<double> d;  // default zeros(m)
  double asyinit = 0.5;
  double asyincr = 1.2;
  double asydecr = 0.7;
  double albefa = 0.1;
  double move = 0.5;
  double raa0 = 1e-5;
  double epsimin = 1e-7;
  int max_newton = 200;

  /// Box [lo, hi] for all n variables, m constraints, defaults elsewhere.
  static MmaOptions box(int n, int m = 1, double lo = 0.0, double hi = 1.0) {
    MmaOptions o;
    o.n = n;
    o.m = m;
    o.xmin.assign(n, lo);
    o.xmax.assign(n, hi);
    o.a.assign(m, 0.0);
    o.c.assign(m, 1e4);
    o.d.assign(m, 0.0);
    return o;
  }

  void validate() const {
    if (n <= 0 || m <= 0) throw InvalidArgument("MMA needs n > 0 variables and m > 0 constraints");
    if (xmin.size() != static_cast<std::size_t>(n) || xmax.size() != static_cast<std::size_t>(n))
      throw InvalidArgument("MMA bounds must have n entries");
    for (int j = 0; j < n; ++j)
      if (!(xmin[j] < xmax[j])) throw InvalidArgument("MMA requires xmin < xmax");
    if (a.size() != static_cast<std::size_t>(m) || c.size() != static_cast<std::size_t>(m) ||
        d.size() != static_cast<std::size_t>(m))
      throw InvalidArgument("MMA constants a, c, d must have m entries");
    for (double ci : c)
      if (!(ci > 0.0)) throw InvalidArgument("MMA constants c must be positive");
    if (!(move > 0.0 && move <= 1.0)) throw InvalidArgument("MMA move must lie in (0, 1]");
  }
};

struct MmaStep {
  std::vector<double> x;
  std::vector<double> low, upp;      // asymptotes
  std::vector<double> alpha, beta;   // subproblem bounds
  double kkt_residual = 0.0;         // inf-norm of the relaxed KKT residual at the final epsilon
  int newton_iterations = 0;
};

namespace detail {

struct MmaSubproblem {
  int m, n;
  Eigen::ArrayXd low, upp, alpha, beta, p0, q0;
  Eigen::MatrixXd P, Q;  // m x n
  double a0;
  Eigen::ArrayXd a, b, c, d;
};

struct PrimalDual {
  Eigen::ArrayXd x, y, lam, xsi, eta, mu, s;
  double z, zet;
};

inline Eigen::ArrayXd mma_residual(const MmaSubproblem& sp, const PrimalDual& v, double epsi) {
  const int m = sp.m, n = sp.n;
  Eigen::ArrayXd ux1 = sp.upp - v.x, xl1 = v.x - sp.low;
  Eigen::ArrayXd ux2 = ux1 * ux1, xl2 = xl1 * xl1;
  Eigen::ArrayXd plam = sp.p0 + (sp.P.transpose() * v.lam.matrix()).array();
  Eigen::ArrayXd qlam = sp.q0 + (sp.Q.transpose() * v.lam.matrix()).array();
  Eigen::ArrayXd gvec = (sp.P * ux1.inverse().matrix() + sp.Q * xl1.inverse().matrix()).array();
  Eigen::ArrayXd res(3 * n + 4 * m + 2);
  int o = 0;
  res.segment(o, n) = plam / ux2 - qlam / xl2 - v.xsi + v.eta; o += n;
  res.segment(o, m) = sp.c + sp.d * v.y - v.mu - v.lam; o += m;
  res(o++) = sp.a0 - v.zet - (sp.a * v.lam).sum();
  res.segment(o, m) = gvec - sp.a * v.z - v.y + v.s - sp.b; o += m;
  res.segment(o, n) = v.xsi * (v.x - sp.alpha) - epsi; o += n;
  res.segment(o, n) = v.eta * (sp.beta - v.x) - epsi; o += n;
  res.segment(o, m) = v.mu * v.y - epsi; o += m;
  res(o++) = v.zet * v.z - epsi;
  res.segment(o, m) = v.lam * v.s - epsi;
  return res;
}

// Primal-dual Newton method on the relaxed KKT system, epsi driven from 1
// down to epsimin by factors of 10.
inline PrimalDual mma_subsolve(const MmaSubproblem& sp, double epsimin, int max_newton, double& kkt_out,
                               int& newton_total) {
  const int m = sp.m, n = sp.n;
  PrimalDual v;
  v.x = 0.5 * (sp.alpha + sp.beta);
  v.y = Eigen::ArrayXd::Ones(m);
  v.z = 1.0;
  v.lam = Eigen::ArrayXd::Ones(m);
  v.xsi = (v.x - sp.alpha).inverse().max(1.0);
  v.eta = (sp.beta - v.x).inverse().max(1.0);
  v.mu = (0.5 * sp.c).max(1.0);
  v.zet = 1.0;
  v.s = Eigen::ArrayXd::Ones(m);

  double epsi = 1.0;
  Eigen::ArrayXd res;
  while (epsi > epsimin) {
    res = mma_residual(sp, v, epsi);
    double resnorm = std::sqrt(res.square().sum());
    double resmax = res.abs().maxCoeff();
    int ittt = 0;
    while (resmax > 0.9 * epsi) {
      if (ittt >= max_newton)
        throw SolverError("MMA subproblem did not converge in " + std::to_string(max_newton) +
                              " Newton steps (KKT residual " + std::to_string(resmax) + ")",
                          resmax);
      ++ittt;
      ++newton_total;
      Eigen::ArrayXd ux1 = sp.upp - v.x, xl1 = v.x - sp.low;
      Eigen::ArrayXd ux2 = ux1 * ux1, xl2 = xl1 * xl1;
      Eigen::ArrayXd ux3 = ux1 * ux2, xl3 = xl1 * xl2;
      Eigen::ArrayXd uxinv1 = ux1.inverse(), xlinv1 = xl1.inverse();
      Eigen::ArrayXd uxinv2 = ux2.inverse(), xlinv2 = xl2.inverse();
      Eigen::ArrayXd plam = sp.p0 + (sp.P.transpose() * v.lam.matrix()).array();
      Eigen::ArrayXd qlam = sp.q0 + (sp.Q.transpose() * v.lam.matrix()).array();
      Eigen::ArrayXd gvec = (sp.P * uxinv1.matrix() + sp.Q * xlinv1.matrix()).array();
      Eigen::MatrixXd GG = sp.P * uxinv2.matrix().asDiagonal();
      GG -= sp.Q * xlinv2.matrix().asDiagonal();
      Eigen::ArrayXd dpsidx = plam / ux2 - qlam / xl2;
      Eigen::ArrayXd delx = dpsidx - epsi / (v.x - sp.alpha) + epsi / (sp.beta - v.x);
      Eigen::ArrayXd dely = sp.c + sp.d * v.y - v.lam - epsi / v.y;
      double delz = sp.a0 - (sp.a * v.lam).sum() - epsi / v.z;
      Eigen::ArrayXd dellam = gvec - sp.a * v.z - v.y - sp.b + epsi / v.lam;
      Eigen::ArrayXd diagx = 2.0 * (plam / ux3 + qlam / xl3) + v.xsi / (v.x - sp.alpha) + v.eta / (sp.beta - v.x);
      Eigen::ArrayXd diagxinv = diagx.inverse();
      Eigen::ArrayXd diagy = sp.d + v.mu / v.y;
      Eigen::ArrayXd diagyinv = diagy.inverse();
      Eigen::ArrayXd diaglam = v.s / v.lam;
      Eigen::ArrayXd diaglamyi = diaglam + diagyinv;

      Eigen::ArrayXd dx(n), dlam(m);
      double dz;
      if (m < n) {
        Eigen::VectorXd blam = (dellam + dely / diagy).matrix() - GG * (delx / diagx).matrix();
        Eigen::MatrixXd AA(m + 1, m + 1);
        AA.topLeftCorner(m, m) = GG * diagxinv.matrix().asDiagonal() * GG.transpose();
        AA.topLeftCorner(m, m).diagonal() += diaglamyi.matrix();
        AA.topRightCorner(m, 1) = sp.a.matrix();
        AA.bottomLeftCorner(1, m) = sp.a.matrix().transpose();
        AA(m, m) = -v.zet / v.z;
        Eigen::VectorXd bb(m + 1);
        bb << blam, delz;
        Eigen::VectorXd sol = AA.partialPivLu().solve(bb);
        dlam = sol.head(m).array();
        dz = sol(m);
        dx = -delx / diagx - (GG.transpose() * dlam.matrix()).array() / diagx;
      } else {
        Eigen::ArrayXd diaglamyiinv = diaglamyi.inverse();
        Eigen::ArrayXd dellamyi = dellam + dely / diagy;
        Eigen::MatrixXd Axx = GG.transpose() * diaglamyiinv.matrix().asDiagonal() * GG;
        Axx.diagonal() += diagx.matrix();
        double azz = v.zet / v.z + (sp.a * (sp.a / diaglamyi)).sum();
        Eigen::VectorXd axz = -(GG.transpose() * (sp.a / diaglamyi).matrix());
        Eigen::VectorXd bx = delx.matrix() + GG.transpose() * (dellamyi / diaglamyi).matrix();
        double bz = delz - (sp.a * (dellamyi / diaglamyi)).sum();
        Eigen::MatrixXd AA(n + 1, n + 1);
        AA.topLeftCorner(n, n) = Axx;
        AA.topRightCorner(n, 1) = axz;
        AA.bottomLeftCorner(1, n) = axz.transpose();
        AA(n, n) = azz;
        Eigen::VectorXd bb(n + 1);
        bb << -bx, -bz;
        Eigen::VectorXd sol = AA.partialPivLu().solve(bb);
        dx = sol.head(n).array();
        dz = sol(n);
        dlam = (GG * dx.matrix()).array() / diaglamyi - dz * (sp.a / diaglamyi) + dellamyi / diaglamyi;
      }
      Eigen::ArrayXd dy = -dely / diagy + dlam / diagy;
      Eigen::ArrayXd dxsi = -v.xsi + epsi / (v.x - sp.alpha) - (v.xsi * dx) / (v.x - sp.alpha);
      Eigen::ArrayXd deta = -v.eta + epsi / (sp.beta - v.x) + (v.eta * dx) / (sp.beta - v.x);
      Eigen::ArrayXd dmu = -v.mu + epsi / v.y - (v.mu * dy) / v.y;
      double dzet = -v.zet + epsi / v.z - v.zet * dz / v.z;
      Eigen::ArrayXd ds = -v.s + epsi / v.lam - (v.s * dlam) / v.lam;

      // largest step keeping every positive variable strictly positive
      double stm = 1.0;
      auto bound = [&stm](const Eigen::ArrayXd& dv, const Eigen::ArrayXd& val) {
        stm = std::max(stm, (-1.01 * dv / val).maxCoeff());
      };
      bound(dy, v.y);
      bound(dlam, v.lam);
      bound(dxsi, v.xsi);
      bound(deta, v.eta);
      bound(dmu, v.mu);
      bound(ds, v.s);
      stm = std::max({stm, -1.01 * dz / v.z, -1.01 * dzet / v.zet});
      stm = std::max(stm, (-1.01 * dx / (v.x - sp.alpha)).maxCoeff());
      stm = std::max(stm, (1.01 * dx / (sp.beta - v.x)).maxCoeff());
      double steg = 1.0 / stm;

      const PrimalDual old = v;
      int itto = 0;
      double resinew = 2.0 * resnorm;
      while (resinew > resnorm && itto < 50) {
        ++itto;
        v.x = old.x + steg * dx;
        v.y = old.y + steg * dy;
        v.z = old.z + steg * dz;
        v.lam = old.lam + steg * dlam;
        v.xsi = old.xsi + steg * dxsi;
        v.eta = old.eta + steg * deta;
        v.mu = old.mu + steg * dmu;
        v.zet = old.zet + steg * dzet;
        v.s = old.s + steg * ds;
        res = mma_residual(sp, v, epsi);
        resinew = std::sqrt(res.square().sum());
        steg *= 0.5;
      }
      resnorm = resinew;
      resmax = res.abs().maxCoeff();
    }
    kkt_out = resmax;
    epsi *= 0.1;
  }
  return v;
}

}  // namespace detail

/// Stateful MMA driver: keeps the two previous iterates and the asymptotes.
class MmaOptimizer {
 public:
  explicit MmaOptimizer(MmaOptions opts) : o_(std::move(opts)) { o_.validate(); }

  [[nodiscard]] const MmaOptions& options() const { return o_; }
  [[nodiscard]] int iteration() const { return iter_; }

  /// One outer iteration. dfdx is m x n (row i = gradient of f_i).
  MmaStep update(std::span<const double> xval, std::span<const double> df0dx, std::span<const double> fval,
                 const Eigen::MatrixXd& dfdx) {
    const int n = o_.n, m = o_.m;
    if (xval.size() != static_cast<std::size_t>(n) || df0dx.size() != static_cast<std::size_t>(n) ||
        fval.size() != static_cast<std::size_t>(m) || dfdx.rows() != m || dfdx.cols() != n)
      throw InvalidArgument("MMA update inputs have inconsistent sizes");

    ++iter_;
    Eigen::Map<const Eigen::ArrayXd> x(xval.data(), n);
    Eigen::Map<const Eigen::ArrayXd> xmin(o_.xmin.data(), n), xmax(o_.xmax.data(), n);
    const Eigen::ArrayXd range = xmax - xmin;

    if (iter_ <= 2) {
      low_ = x - o_.asyinit * range;
      upp_ = x + o_.asyinit * range;
    } else {
      Eigen::ArrayXd zzz = (x - xold1_) * (xold1_ - xold2_);
      Eigen::ArrayXd factor = Eigen::ArrayXd::Ones(n);
      for (int j = 0; j < n; ++j) {
        if (zzz(j) > 0) factor(j) = o_.asyincr;
        else if (zzz(j) < 0) factor(j) = o_.asydecr;
      }
      low_ = x - factor * (xold1_ - low_);
      upp_ = x + factor * (upp_ - xold1_);
      low_ = low_.max(x - 10.0 * range).min(x - 0.01 * range);
      upp_ = upp_.min(x + 10.0 * range).max(x + 0.01 * range);
    }

    detail::MmaSubproblem sp;
    sp.m = m;
    sp.n = n;
    sp.low = low_;
    sp.upp = upp_;
    sp.alpha = (low_ + o_.albefa * (x - low_)).max(x - o_.move * range).max(xmin);
    sp.beta = (upp_ - o_.albefa * (upp_ - x)).min(x + o_.move * range).min(xmax);

    const Eigen::ArrayXd xmamiinv = range.max(1e-5).inverse();
    const Eigen::ArrayXd ux1 = upp_ - x, xl1 = x - low_;
    const Eigen::ArrayXd ux2 = ux1 * ux1, xl2 = xl1 * xl1;
    Eigen::Map<const Eigen::ArrayXd> df0(df0dx.data(), n);
    Eigen::ArrayXd p0 = df0.max(0.0), q0 = (-df0).max(0.0);
    Eigen::ArrayXd pq0 = 0.001 * (p0 + q0) + o_.raa0 * xmamiinv;
    sp.p0 = (p0 + pq0) * ux2;
    sp.q0 = (q0 + pq0) * xl2;
    sp.P = dfdx.cwiseMax(0.0);
    sp.Q = (-dfdx).cwiseMax(0.0);
    Eigen::MatrixXd PQ = 0.001 * (sp.P + sp.Q);
    PQ.rowwise() += (o_.raa0 * xmamiinv).matrix().transpose();
    sp.P = (sp.P + PQ) * ux2.matrix().asDiagonal();
    sp.Q = (sp.Q + PQ) * xl2.matrix().asDiagonal();
    Eigen::Map<const Eigen::ArrayXd> f(fval.data(), m);
    sp.b = (sp.P * ux1.inverse().matrix() + sp.Q * xl1.inverse().matrix()).array() - f;
    sp.a0 = o_.a0;
    sp.a = Eigen::Map<const Eigen::ArrayXd>(o_.a.data(), m);
    sp.c = Eigen::Map<const Eigen::ArrayXd>(o_.c.data(), m);
    sp.d = Eigen::Map<const Eigen::ArrayXd>(o_.d.data(), m);

    MmaStep step;
    detail::PrimalDual sol = detail::mma_subsolve(sp, o_.epsimin, o_.max_newton, step.kkt_residual,
                                                  step.newton_iterations);

    xold2_ = iter_ >= 2 ? xold1_ : x;
    xold1_ = x;
    step.x.assign(sol.x.data(), sol.x.data() + n);
    // guard against round-off beyond the box
    for (int j = 0; j < n; ++j) step.x[j] = std::clamp(step.x[j], sp.alpha(j), sp.beta(j));
    step.low.assign(low_.data(), low_.data() + n);
    step.upp.assign(upp_.data(), upp_.data() + n);
    step.alpha.assign(sp.alpha.data(), sp.alpha.data() + n);
    step.beta.assign(sp.beta.data(), sp.beta.data() + n);
    return step;
  }

 private:
  MmaOptions o_;
  int iter_ = 0;
  Eigen::ArrayXd xold1_, xold2_, low_, upp_;
};

}  // namespace topopt
