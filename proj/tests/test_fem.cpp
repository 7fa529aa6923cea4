#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "topopt/assembly.hpp"
#include "topopt/element.hpp"
#include "topopt/setup.hpp"
#include "topopt/solver.hpp"
#include "topopt/system.hpp"

using namespace topopt;

namespace {

Eigen::MatrixXd classic_quad_ke(double nu) {
  Eigen::Matrix4d A11, A12, B11, B12;
  A11 << 12, 3, -6, -3, 3, 12, 3, 0, -6, 3, 12, -3, -3, 0, -3, 12;
  A12 << -6, -3, 0, 3, -3, -6, -3, -6, 0, -3, -6, 3, 3, -6, 3, -6;
  B11 << -4, 3, -2, 9, 3, -4, -9, 4, -2, -9, -4, -3, 9, 4, -3, -4;
  B12 << 2, -3, 4, -9, -3, 2, 9, -2, 4, 9, 2, 3, -9, -2, 3, 2;
  Eigen::MatrixXd A(8, 8), B(8, 8);
  A << A11, A12, A12.transpose(), A11;
  B << B11, B12, B12.transpose(), B11;
  return (A + nu * B) / (24.0 * (1.0 - nu * nu));
}

std::vector<double> random_density(std::size_t n, unsigned seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> r(n);
  for (double& v : r) v = u(gen);
  return r;
}

int zero_modes(const Eigen::MatrixXd& K) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
  const double tol = 1e-10 * es.eigenvalues().cwiseAbs().maxCoeff();
  int z = 0;
  for (double l : es.eigenvalues()) z += std::abs(l) < tol;
  return z;
}

std::vector<double> coords_of(const Mesh& m) { return element_coords(m, 0); }

Mesh one_cell(ElementType t, std::array<double, 3> h = {1.0, 1.0, 1.0}) {
  if (t == ElementType::tri3) {
    const double box[4] = {0, h[0], 0, h[1]};
    return triangulate_box(1, 1, box);
  }
  const int dim = element_dim(t);
  const std::vector<int> c(dim, 1);
  const std::vector<double> o(dim, 0.0);
  return build_uniform_grid(dim, c, std::span<const double>(h.data(), dim), o);
}

struct Grid {
  Mesh mesh;
  DofMap dofs;
  SimpMaterial mat;
};

Grid grid(const std::string& kind) {
  Grid g;
  if (kind == "quad") g.mesh = make_benchmark("cantilever2d", {7, 4}).mesh;
  if (kind == "tri") g.mesh = make_benchmark("cantilever2d", {6, 5}, true).mesh;
  if (kind == "hex") g.mesh = make_benchmark("cantilever3d", {4, 3, 2}).mesh;
  g.dofs = build_dof_map(g.mesh);
  g.mat = SimpMaterial::for_dim(g.mesh.dim);
  return g;
}

}  // namespace

TEST(ElementStiffness, QuadMatchesClassicClosedForm) {
  SimpMaterial m;
  const double h[2] = {1.0, 1.0};
  for (auto rule : {IntegrationRule::quadrature, IntegrationRule::closed_form}) {
    ElementMatrix K = unit_element_stiffness(ElementType::quad4, m, h, rule);
    EXPECT_LT((K - classic_quad_ke(0.3)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_NEAR(K(0, 0), (0.5 - 0.3 / 6.0) / (1.0 - 0.09), 1e-15);
    EXPECT_NEAR(K(0, 0), 0.494505, 1e-6);
  }
}

TEST(ElementStiffness, ClosedFormEqualsQuadratureOnStretchedElements) {
  for (auto t : {ElementType::quad4, ElementType::tri3, ElementType::hex8}) {
    SimpMaterial m = SimpMaterial::for_dim(element_dim(t));
    m.nu = 0.27;
    const Mesh cell = one_cell(t, {0.7, 1.9, 0.4});
    const Eigen::MatrixXd D = elasticity_matrix(m);
    for (std::size_t e = 0; e < cell.n_elements(); ++e) {
      auto x = element_coords(cell, e);
      ElementMatrix q = element_stiffness_quadrature(t, x, D);
      ElementMatrix c = element_stiffness_closed_form(t, x, D);
      EXPECT_LT((q - c).cwiseAbs().maxCoeff(), 1e-14 * q.cwiseAbs().maxCoeff()) << to_string(t);
    }
  }
}

TEST(ElementStiffness, SymmetricWithRigidBodyNullspace) {
  for (auto t : {ElementType::quad4, ElementType::tri3, ElementType::hex8}) {
    SimpMaterial m = SimpMaterial::for_dim(element_dim(t));
    const Mesh cell = one_cell(t, {1.3, 0.8, 2.1});
    ElementMatrix K = element_stiffness_quadrature(t, coords_of(cell), elasticity_matrix(m));
    EXPECT_LT((K - K.transpose()).cwiseAbs().maxCoeff(), 1e-14) << to_string(t);
    const int dim = element_dim(t), npe = nodes_per_element(t);
    for (int a = 0; a < dim; ++a) {
      Eigen::VectorXd shift = Eigen::VectorXd::Zero(npe * dim);
      for (int n = 0; n < npe; ++n) shift[n * dim + a] = 1.0;
      EXPECT_LT((K * shift).cwiseAbs().maxCoeff(), 1e-12) << to_string(t) << " axis " << a;
    }
    EXPECT_EQ(zero_modes(K), dim == 2 ? 3 : 6) << to_string(t);
  }
}

TEST(ElementStiffness, HexRotationIsZeroEnergy) {
  SimpMaterial m = SimpMaterial::for_dim(3);
  const Mesh cell = one_cell(ElementType::hex8);
  auto x = coords_of(cell);
  ElementMatrix K = element_stiffness_quadrature(ElementType::hex8, x, elasticity_matrix(m));
  // infinitesimal rotation about z: u = (-y, x, 0)
  Eigen::VectorXd r = Eigen::VectorXd::Zero(24);
  for (int n = 0; n < 8; ++n) {
    r[3 * n] = -x[3 * n + 1];
    r[3 * n + 1] = x[3 * n];
  }
  EXPECT_LT((K * r).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ElementStiffness, RejectsMismatchedMaterial) {
  SimpMaterial m;  // plane stress
  const double h[3] = {1, 1, 1};
  EXPECT_THROW(unit_element_stiffness(ElementType::hex8, m, h, IntegrationRule::quadrature), InvalidArgument);
}

TEST(Assembly, SingleElementEqualsElementMatrix) {
  for (auto t : {ElementType::quad4, ElementType::hex8}) {
    Mesh cell = one_cell(t);
    DofMap d = build_dof_map(cell);
    SimpMaterial m = SimpMaterial::for_dim(cell.dim);
    ElementMatrix Ke = element_stiffness_quadrature(t, coords_of(cell), elasticity_matrix(m));
    for (auto method : {AssemblyMethod::standard, AssemblyMethod::fast, AssemblyMethod::symbolic}) {
      StiffnessAssembler a(cell, d, m, method);
      const double rho[1] = {1.0};
      CsrMatrix K = a.assemble(rho);
      auto dofs = d.element_dofs(0);
      double err = 0.0;
      for (int i = 0; i < d.dofs_per_element; ++i)
        for (int j = 0; j < d.dofs_per_element; ++j) err = std::max(err, std::abs(K.at(dofs[i], dofs[j]) - Ke(i, j)));
      EXPECT_LE(err, 1e-15 * Ke.cwiseAbs().maxCoeff()) << to_string(method);
    }
  }
}

TEST(Assembly, MethodsAgreeOnRandomDensities) {
  for (const std::string kind : {"quad", "tri", "hex"}) {
    Grid g = grid(kind);
    auto rho = random_density(g.mesh.n_elements(), 3);
    StiffnessAssembler s(g.mesh, g.dofs, g.mat, AssemblyMethod::standard);
    CsrMatrix Ks = s.assemble(rho);
    for (auto method : {AssemblyMethod::fast, AssemblyMethod::symbolic}) {
      StiffnessAssembler a(g.mesh, g.dofs, g.mat, method);
      CsrMatrix K = a.assemble(rho);
      ASSERT_EQ(K.col, Ks.col);
      double diff = 0.0;
      for (std::size_t k = 0; k < K.nnz(); ++k) diff = std::max(diff, std::abs(K.val[k] - Ks.val[k]));
      EXPECT_LT(diff / Ks.max_abs(), 1e-12) << kind << " " << to_string(method);
    }
  }
}

TEST(Assembly, BenchmarkMeshMethodsAgree) {
  Benchmark b = make_benchmark("cantilever3d", {60, 20, 4});
  DofMap d = build_dof_map(b.mesh);
  SimpMaterial m = SimpMaterial::for_dim(3);
  auto rho = random_density(b.mesh.n_elements(), 11);
  CsrMatrix Ks = StiffnessAssembler(b.mesh, d, m, AssemblyMethod::standard).assemble(rho);
  CsrMatrix Kf = StiffnessAssembler(b.mesh, d, m, AssemblyMethod::fast).assemble(rho);
  double diff = 0.0;
  for (std::size_t k = 0; k < Kf.nnz(); ++k) diff = std::max(diff, std::abs(Kf.val[k] - Ks.val[k]));
  EXPECT_LT(diff / Ks.max_abs(), 1e-12);
}

TEST(Assembly, FastPathSkipsQuadratureAfterFirstCall) {
  Grid g = grid("hex");
  auto rho = random_density(g.mesh.n_elements(), 5);
  StiffnessAssembler fast(g.mesh, g.dofs, g.mat, AssemblyMethod::fast);
  CsrMatrix K;
  fast.assemble(rho, K);
  const std::size_t after_first = fast.quadrature_evaluations();
  EXPECT_EQ(after_first, 1u);  // congruent grid: a single K_e^0
  fast.assemble(rho, K);
  fast.assemble(rho, K);
  EXPECT_EQ(fast.quadrature_evaluations(), after_first);

  StiffnessAssembler std_a(g.mesh, g.dofs, g.mat, AssemblyMethod::standard);
  std_a.assemble(rho, K);
  std_a.assemble(rho, K);
  EXPECT_EQ(std_a.quadrature_evaluations(), 2 * g.mesh.n_elements());

  StiffnessAssembler sym(g.mesh, g.dofs, g.mat, AssemblyMethod::symbolic);
  sym.assemble(rho, K);
  EXPECT_EQ(sym.quadrature_evaluations(), 0u);
}

TEST(Assembly, TriangleFastPathCachesPerElement) {
  Grid g = grid("tri");
  auto rho = random_density(g.mesh.n_elements(), 9);
  StiffnessAssembler fast(g.mesh, g.dofs, g.mat, AssemblyMethod::fast);
  CsrMatrix K;
  fast.assemble(rho, K);
  EXPECT_EQ(fast.quadrature_evaluations(), g.mesh.n_elements());
  fast.assemble(rho, K);
  EXPECT_EQ(fast.quadrature_evaluations(), g.mesh.n_elements());
}

TEST(Assembly, LinearInModuli) {
  Grid g = grid("quad");
  StiffnessAssembler a(g.mesh, g.dofs, g.mat, AssemblyMethod::fast);
  auto E = interpolate_modulus(g.mat, std::span<const double>(random_density(g.mesh.n_elements(), 2)));
  CsrMatrix K1, K2;
  a.assemble_moduli(E, K1);
  for (double& v : E) v *= 3.5;
  a.assemble_moduli(E, K2);
  for (std::size_t k = 0; k < K1.nnz(); ++k) EXPECT_NEAR(K2.val[k], 3.5 * K1.val[k], 1e-14 * K1.max_abs());
}

TEST(Assembly, SymmetricWithTranslationNullspace) {
  for (const std::string kind : {"quad", "tri", "hex"}) {
    Grid g = grid(kind);
    StiffnessAssembler a(g.mesh, g.dofs, g.mat, AssemblyMethod::fast);
    CsrMatrix K = a.assemble(std::vector<double>(g.mesh.n_elements(), 0.6));
    EXPECT_LT(K.asymmetry(), 1e-14 * K.max_abs()) << kind;
    for (int axis = 0; axis < g.mesh.dim; ++axis) {
      std::vector<double> v(g.dofs.n_dofs, 0.0);
      for (std::size_t n = 0; n < g.mesh.n_nodes(); ++n) v[n * g.mesh.dim + axis] = 1.0;
      EXPECT_LT(norm_inf(K.multiply(v)), 1e-10 * K.max_abs()) << kind << " axis " << axis;
    }
  }
}

TEST(Assembly, RejectsWrongDensityLength) {
  Grid g = grid("quad");
  StiffnessAssembler a(g.mesh, g.dofs, g.mat, AssemblyMethod::fast);
  EXPECT_THROW(a.assemble(std::vector<double>(3, 0.5)), InvalidArgument);
}

TEST(Dirichlet, EliminationContract) {
  Grid g = grid("quad");
  StiffnessAssembler a(g.mesh, g.dofs, g.mat, AssemblyMethod::fast);
  CsrMatrix K = a.assemble(std::vector<double>(g.mesh.n_elements(), 1.0));
  std::vector<double> F(g.dofs.n_dofs, 0.0);
  F[5] = 1.0;
  F[g.dofs.n_dofs - 1] = -2.0;
  std::vector<int> fixed{4, 0, 1, 2, 3, 1, 5};
  SparseSystem s = apply_dirichlet(K, F, fixed);
  EXPECT_EQ(s.fixed_dofs, (std::vector<int>{0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(s.K.col, K.col);  // pattern kept
  EXPECT_LE(s.K.asymmetry(), K.asymmetry());  // elimination adds no asymmetry
  for (int i : s.fixed_dofs) {
    EXPECT_EQ(s.F[i], 0.0);
    EXPECT_EQ(s.K.at(i, i), 1.0);
    for (int k = s.K.row_ptr[i]; k < s.K.row_ptr[i + 1]; ++k) {
      if (s.K.col[k] != i) {
        EXPECT_EQ(s.K.val[k], 0.0);
      }
    }
  }
  for (auto kind : {SolverKind::direct, SolverKind::cg}) {
    auto U = solve(s, kind);
    for (int i : s.fixed_dofs) EXPECT_EQ(U[i], 0.0) << to_string(kind);
  }
}

TEST(Solver, IdentitySystem) {
  SparseSystem s{CsrMatrix::identity(6), {1, -2, 3, 0.5, 0, 7}, {}};
  for (auto kind : {SolverKind::direct, SolverKind::cg}) {
    auto U = solve(s, kind);
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(U[i], s.F[i], 1e-14);
  }
}

TEST(Solver, RandomSpdCgMatchesDirect) {
  std::mt19937 gen(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int n = 50;
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = u(gen);
  Eigen::MatrixXd M = A * A.transpose() + n * Eigen::MatrixXd::Identity(n, n);
  std::vector<std::pair<std::pair<int, int>, double>> t;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) t.push_back({{i, j}, M(i, j)});
  SparseSystem s{CsrMatrix::from_triplets(n, t), std::vector<double>(n), {}};
  for (double& v : s.F) v = u(gen);
  auto Ud = solve(s, SolverKind::direct);
  auto Uc = solve(s, SolverKind::cg);
  std::vector<double> diff(n);
  for (int i = 0; i < n; ++i) diff[i] = Ud[i] - Uc[i];
  EXPECT_LT(norm2(diff) / norm2(Ud), 1e-7);
  Eigen::Map<const Eigen::VectorXd> ud(Ud.data(), n), f(s.F.data(), n);
  EXPECT_LT((M * ud - f).norm() / f.norm(), 1e-10);
}

TEST(Solver, CgReportsNegativeCurvature) {
  std::vector<std::pair<std::pair<int, int>, double>> t{{{0, 0}, 1.0}, {{0, 1}, 3.0}, {{1, 0}, 3.0}, {{1, 1}, 1.0}};
  CsrMatrix K = CsrMatrix::from_triplets(2, t);
  std::vector<double> F{1.0, -1.0}, U(2, 0.0);
  EXPECT_THROW(conjugate_gradient(K, F, U), MatrixError);
  EXPECT_THROW(DirectSolver().solve(K, F, U), MatrixError);
}

TEST(Solver, CgIterationCapRaisesWithResidual) {
  Grid g = grid("quad");
  Benchmark b = make_benchmark("cantilever2d", {7, 4});
  StiffnessAssembler a(g.mesh, g.dofs, g.mat, AssemblyMethod::fast);
  CsrMatrix K = a.assemble(std::vector<double>(g.mesh.n_elements(), 0.5));
  auto F = assemble_load(b.problem, g.mesh, g.dofs);
  apply_dirichlet_in_place(K, F, dirichlet_dofs(b.problem, g.mesh));
  std::vector<double> U(F.size(), 0.0);
  CgOptions o;
  o.max_iterations = 2;
  try {
    conjugate_gradient(K, F, U, o);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_GT(e.residual(), 1e-8);
  }
}

TEST(Solver, CgResidualContractOnBenchmarks) {
  struct Case {
    std::string name;
    std::vector<int> cells;
    bool tri;
  };
  for (const Case& c : {Case{"cantilever2d", {40, 25}, false}, Case{"mbb2d", {30, 10}, true},
                        Case{"cantilever3d", {12, 4, 2}, false}}) {
    Benchmark b = make_benchmark(c.name, c.cells, c.tri);
    DofMap d = build_dof_map(b.mesh);
    StiffnessAssembler a(b.mesh, d, SimpMaterial::for_dim(b.mesh.dim), AssemblyMethod::fast);
    CsrMatrix K = a.assemble(random_density(b.mesh.n_elements(), 17, 0.05, 1.0));
    auto F = assemble_load(b.problem, b.mesh, d);
    apply_dirichlet_in_place(K, F, dirichlet_dofs(b.problem, b.mesh));
    std::vector<double> U(F.size(), 0.0), Ud(F.size(), 0.0);
    SolveReport rep = conjugate_gradient(K, F, U);
    EXPECT_LE(rep.relative_residual, 1e-8) << c.name;
    EXPECT_LE(relative_residual(K, F, U), 1e-8) << c.name;
    DirectSolver().solve(K, F, Ud);
    EXPECT_NEAR(dot(F, U), dot(F, Ud), 1e-6 * dot(F, Ud)) << c.name;
  }
}

TEST(Solver, UniformCantileverComplianceBaseline) {
  // Regression value computed once with the direct solver.
  const double baseline = 483.866905701069;
  for (auto kind : {SolverKind::direct, SolverKind::cg}) {
    Benchmark b = make_benchmark("cantilever2d", {160, 100});
    DofMap d = build_dof_map(b.mesh);
    StiffnessAssembler a(b.mesh, d, SimpMaterial::for_dim(2), AssemblyMethod::fast);
    CsrMatrix K = a.assemble(std::vector<double>(b.mesh.n_elements(), 0.4));
    auto F = assemble_load(b.problem, b.mesh, d);
    auto F0 = F;
    apply_dirichlet_in_place(K, F, dirichlet_dofs(b.problem, b.mesh));
    std::vector<double> U(F.size(), 0.0);
    LinearSolver(kind).solve(K, F, U);
    EXPECT_NEAR(dot(F0, U), baseline, 1e-6 * baseline) << to_string(kind);
  }
}
