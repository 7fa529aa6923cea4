#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "topopt/error.hpp"
#include "topopt/sparse.hpp"
#include "topopt/system.hpp"

namespace topopt {

enum class SolverKind { cg, direct };

inline std::string to_string(SolverKind k) { return k == SolverKind::cg ? "cg" : "direct"; }

inline SolverKind parse_solver_kind(const std::string& s) {
  if (s == "cg") return SolverKind::cg;
  if (s == "direct") return SolverKind::direct;
  throw InvalidArgument("unknown solver '" + s + "'");
}

struct SolveReport {
  int iterations = 0;
  double relative_residual = 0.0;
};

inline double relative_residual(const CsrMatrix& K, std::span<const double> F, std::span<const double> U) {
  std::vector<double> r = K.multiply(U);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = F[i] - r[i];
  const double nf = norm2(F);
  return nf > 0.0 ? norm2(r) / nf : norm2(r);
}

struct CgOptions {
  double rtol = 1e-8;
  int max_iterations = 0;  // 0: 10 * n
};

/// Jacobi-preconditioned conjugate gradient. U holds the initial guess on
/// entry and the solution on exit.
inline SolveReport conjugate_gradient(const CsrMatrix& K, std::span<const double> F, std::span<double> U,
                                      const CgOptions& opts = {}) {
  const int n = K.n;
  const int cap = opts.max_iterations > 0 ? opts.max_iterations : 10 * n;
  std::vector<double> inv_diag = K.diagonal();
  for (int i = 0; i < n; ++i) {
    if (!(inv_diag[i] > 0.0)) throw MatrixError("non-positive diagonal entry at row " + std::to_string(i));
    inv_diag[i] = 1.0 / inv_diag[i];
  }
  const double nf = norm2(F);
  if (nf == 0.0) {
    std::fill(U.begin(), U.end(), 0.0);
    return {0, 0.0};
  }

  std::vector<double> r(n), z(n), p(n), q(n);
  int it = 0;
  double res = 0.0;
  // The recurrence residual drifts from the true one, so CG restarts from
  // the current iterate until the true residual meets rtol.
  for (;;) {
    K.multiply(U, r);
    for (int i = 0; i < n; ++i) r[i] = F[i] - r[i];
    res = norm2(r) / nf;
    if (res <= opts.rtol || it >= cap) break;
    for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = dot(r, z);
    while (res > opts.rtol && it < cap) {
      K.multiply(p, q);
      const double pq = dot(p, q);
      if (!(pq > 0.0)) throw MatrixError("negative curvature in CG: matrix is not SPD");
      const double alpha = rz / pq;
      for (int i = 0; i < n; ++i) {
        U[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
      for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
      ++it;
      res = norm2(r) / nf;
    }
  }
  if (res > opts.rtol)
    throw SolverError("CG did not converge in " + std::to_string(cap) + " iterations (relative residual " +
                          std::to_string(res) + ")",
                      res);
  return {it, res};
}

/// Sparse Cholesky (simplicial LL^T, AMD ordering). The symbolic analysis
/// is reused while the sparsity pattern stays the same.
class DirectSolver {
 public:
  static constexpr double kResidualTolerance = 1e-10;

  SolveReport solve(const CsrMatrix& K, std::span<const double> F, std::span<double> U) {
    using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
    // K is symmetric, so its CSR arrays read as CSC describe the same matrix.
    Eigen::Map<const SpMat> A(K.n, K.n, static_cast<Eigen::Index>(K.nnz()), K.row_ptr.data(), K.col.data(),
                              K.val.data());
    if (!llt_ || pattern_nnz_ != K.nnz() || pattern_n_ != K.n) {
      llt_ = std::make_unique<Eigen::SimplicialLLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>>>();
      llt_->analyzePattern(A);
      pattern_nnz_ = K.nnz();
      pattern_n_ = K.n;
    }
    llt_->factorize(A);
    if (llt_->info() != Eigen::Success) throw MatrixError("Cholesky factorization failed: matrix is not SPD");

    Eigen::Map<const Eigen::VectorXd> b(F.data(), K.n);
    Eigen::Map<Eigen::VectorXd> x(U.data(), K.n);
    x = llt_->solve(b);
    double res = relative_residual(K, F, U);
    int refinements = 0;
    while (res > kResidualTolerance && refinements < 3) {
      std::vector<double> r = K.multiply(U);
      for (int i = 0; i < K.n; ++i) r[i] = F[i] - r[i];
      Eigen::Map<const Eigen::VectorXd> rv(r.data(), K.n);
      x += llt_->solve(rv);
      res = relative_residual(K, F, U);
      ++refinements;
    }
    if (res > kResidualTolerance)
      throw SolverError("direct solve residual " + std::to_string(res) + " above tolerance", res);
    return {1 + refinements, res};
  }

 private:
  std::unique_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double, Eigen::ColMajor, int>, Eigen::Lower,
                                       Eigen::AMDOrdering<int>>>
      llt_;
  std::size_t pattern_nnz_ = 0;
  int pattern_n_ = 0;
};

/// Solver front end. CG warm-starts from the vector passed in.
class LinearSolver {
 public:
  explicit LinearSolver(SolverKind kind, CgOptions cg = {}) : kind_(kind), cg_(cg) {}

  [[nodiscard]] SolverKind kind() const { return kind_; }

  SolveReport solve(const CsrMatrix& K, std::span<const double> F, std::span<double> U) {
    if (kind_ == SolverKind::cg) return conjugate_gradient(K, F, U, cg_);
    return direct_.solve(K, F, U);
  }

  SolveReport solve(const SparseSystem& s, std::span<double> U) { return solve(s.K, s.F, U); }

 private:
  SolverKind kind_;
  CgOptions cg_;
  DirectSolver direct_;
};

inline std::vector<double> solve(const SparseSystem& s, SolverKind kind) {
  std::vector<double> U(s.F.size(), 0.0);
  LinearSolver(kind).solve(s, U);
  return U;
}

}  // namespace topopt
