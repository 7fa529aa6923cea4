#include <gtest/gtest.h>

#include <random>

#include "topopt/filters.hpp"
#include "topopt/setup.hpp"
#include "topopt/verify.hpp"

using namespace topopt;

namespace {

Mesh grid2(int nx, int ny, double hx = 1.0, double hy = 1.0) {
  const int c[2] = {nx, ny};
  const double h[2] = {hx, hy}, o[2] = {0.0, 0.0};
  return build_uniform_grid(2, c, h, o);
}

std::vector<double> random_vector(std::size_t n, unsigned seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(gen);
  return v;
}

/// Two elements of unit volume coupled with equal weights.
FilterOperator equal_pair(FilterKind kind, double w = 0.8) {
  std::vector<std::pair<std::pair<int, int>, double>> t{{{0, 0}, w}, {{0, 1}, w}, {{1, 0}, w}, {{1, 1}, w}};
  return FilterOperator(kind, CsrMatrix::from_triplets(2, t), {1.0, 1.0}, 1.0);
}

}  // namespace

TEST(NeighborWeights, CenterOfThreeByThree) {
  Mesh m = grid2(3, 3);
  FilterOperator f = build_filter(m, 1.5, FilterKind::density);
  const CsrMatrix& H = f.weights();
  EXPECT_EQ(H.row_ptr[5] - H.row_ptr[4], 9);
  EXPECT_DOUBLE_EQ(H.at(4, 4), 1.5);
  EXPECT_DOUBLE_EQ(H.at(4, 5), 0.5);
  EXPECT_NEAR(H.at(4, 0), 1.5 - std::sqrt(2.0), 1e-15);
  EXPECT_EQ(H.row_ptr[1] - H.row_ptr[0], 4);  // corner
}

TEST(NeighborWeights, SmallRadiusIsDiagonal) {
  Mesh m = grid2(5, 4);
  const FilterOperator f = build_filter(m, 1.0, FilterKind::density);
  const CsrMatrix& H = f.weights();
  ASSERT_EQ(H.nnz(), m.n_elements());
  for (int i = 0; i < H.n; ++i) EXPECT_DOUBLE_EQ(H.at(i, i), 1.0);
}

TEST(NeighborWeights, SingleElement) {
  Mesh m = grid2(1, 1);
  const FilterOperator f = build_filter(m, 2.5, FilterKind::sensitivity);
  const CsrMatrix& H = f.weights();
  ASSERT_EQ(H.nnz(), 1u);
  EXPECT_DOUBLE_EQ(H.val[0], 2.5);
}

TEST(NeighborWeights, IndexedEqualsBruteForce) {
  std::vector<Mesh> meshes{grid2(20, 20), grid2(17, 9, 0.6, 1.3), make_benchmark("mbb2d", {12, 7}, true).mesh,
                           make_benchmark("cantilever3d", {7, 5, 4}).mesh};
  for (const Mesh& m : meshes) {
    auto g = element_geometry(m);
    for (double r : {0.9, 1.5, 2.0, 3.3, 6.0}) {
      CsrMatrix a = neighbor_weights(g.centroids, m.dim, r);
      CsrMatrix b = brute_force_weights(g.centroids, m.dim, r);
      EXPECT_EQ(a.row_ptr, b.row_ptr) << "r=" << r;
      EXPECT_EQ(a.col, b.col) << "r=" << r;
      EXPECT_EQ(a.val, b.val) << "r=" << r;
    }
  }
}

TEST(NeighborWeights, SymmetricWithSelfWeight) {
  Mesh m = grid2(11, 6);
  const FilterOperator f = build_filter(m, 2.4, FilterKind::density);
  const CsrMatrix& H = f.weights();
  EXPECT_EQ(H.asymmetry(), 0.0);
  for (int i = 0; i < H.n; ++i) {
    EXPECT_DOUBLE_EQ(H.at(i, i), 2.4);
    EXPECT_GE(H.row_ptr[i + 1] - H.row_ptr[i], 1);
  }
}

TEST(NeighborWeights, RejectsNonPositiveRadius) {
  EXPECT_THROW(build_filter(grid2(2, 2), 0.0, FilterKind::density), InvalidArgument);
}

TEST(SensitivityFilter, ConstantFieldIsFixedPoint) {
  Mesh m = grid2(8, 5);
  FilterOperator f = build_filter(m, 2.0, FilterKind::sensitivity);
  std::vector<double> rho(m.n_elements(), 0.4), dc(m.n_elements(), -3.0);
  for (double v : f.filter_sensitivities(rho, dc)) EXPECT_NEAR(v, -3.0, 1e-14);
}

TEST(SensitivityFilter, ZeroDensityStaysFinite) {
  Mesh m = grid2(4, 4);
  FilterOperator f = build_filter(m, 1.5, FilterKind::sensitivity);
  std::vector<double> rho(m.n_elements(), 0.0), dc(m.n_elements(), -1.0);
  for (double v : f.filter_sensitivities(rho, dc)) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_EQ(v, 0.0);
  }
}

TEST(SensitivityFilter, TwoElementHandValues) {
  FilterOperator f = equal_pair(FilterKind::sensitivity);
  std::vector<double> rho{1.0, 1.0}, dc{-2.0, 0.0};
  auto out = f.filter_sensitivities(rho, dc);
  EXPECT_DOUBLE_EQ(out[0], -1.0);
  EXPECT_DOUBLE_EQ(out[1], -1.0);
}

TEST(SensitivityFilter, InvariantUnderWeightScaling) {
  Mesh m = grid2(9, 4);
  auto g = element_geometry(m);
  CsrMatrix H = neighbor_weights(g.centroids, 2, 2.2);
  CsrMatrix H2 = H;
  for (double& v : H2.val) v *= 7.0;
  FilterOperator a(FilterKind::sensitivity, H, g.volumes, 2.2), b(FilterKind::sensitivity, H2, g.volumes, 2.2);
  auto rho = random_vector(m.n_elements(), 1, 0.0, 1.0);
  auto dc = random_vector(m.n_elements(), 2, -5.0, 0.0);
  auto x = a.filter_sensitivities(rho, dc), y = b.filter_sensitivities(rho, dc);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x[i], y[i], 1e-14 * std::abs(x[i]));
}

TEST(DensityFilter, PreservesConstants) {
  Mesh m = grid2(10, 6);
  FilterOperator f = build_filter(m, 3.0, FilterKind::density);
  for (double v : f.density_forward(std::vector<double>(m.n_elements(), 0.37))) EXPECT_NEAR(v, 0.37, 1e-15);
}

TEST(DensityFilter, SpreadsAPeak) {
  Mesh m = grid2(7, 7);
  FilterOperator f = build_filter(m, 2.0, FilterKind::density);
  std::vector<double> rho(m.n_elements(), 0.0);
  rho[24] = 1.0;
  auto out = f.density_forward(rho);
  EXPECT_LT(*std::max_element(out.begin(), out.end()), 1.0);
  EXPECT_GT(out[25], 0.0);
  EXPECT_GT(out[17], 0.0);
}

TEST(DensityFilter, TwoElementHandValues) {
  FilterOperator f = equal_pair(FilterKind::density);
  auto out = f.density_forward(std::vector<double>{0.0, 1.0});
  EXPECT_DOUBLE_EQ(out[0], 0.5);
  EXPECT_DOUBLE_EQ(out[1], 0.5);
}

TEST(DensityFilter, NeverExtrapolates) {
  Mesh m = grid2(12, 8);
  FilterOperator f = build_filter(m, 2.5, FilterKind::density);
  auto rho = random_vector(m.n_elements(), 4, 0.2, 0.7);
  auto out = f.density_forward(rho);
  const auto [lo, hi] = std::minmax_element(rho.begin(), rho.end());
  for (double v : out) {
    EXPECT_GE(v, *lo);
    EXPECT_LE(v, *hi);
  }
}

TEST(DensityFilter, AdjointIdentity) {
  std::vector<FilterOperator> ops;
  ops.push_back(build_filter(grid2(13, 9), 2.7, FilterKind::density));
  ops.push_back(build_filter(make_benchmark("cantilever3d", {6, 4, 3}).mesh, 1.8, FilterKind::density));
  {
    // non-uniform volumes
    Mesh m = grid2(6, 5);
    auto g = element_geometry(m);
    auto vol = random_vector(m.n_elements(), 8, 0.5, 2.0);
    ops.emplace_back(FilterKind::density, neighbor_weights(g.centroids, 2, 2.1), vol, 2.1);
  }
  for (const FilterOperator& f : ops) {
    const std::size_t n = f.volumes().size();
    auto a = random_vector(n, 5), b = random_vector(n, 6);
    const double lhs = dot(f.density_forward(a), b), rhs = dot(a, f.density_backward(b));
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::abs(lhs));
  }
}

TEST(DensityFilter, BackwardMatchesFiniteDifferences) {
  Mesh m = grid2(4, 2);
  FilterOperator f = build_filter(m, 1.6, FilterKind::density);
  auto w = random_vector(m.n_elements(), 3);
  auto psi = [&](std::span<const double> rho) {
    auto t = f.density_forward(rho);
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += w[i] * t[i] * t[i] + std::sin(3.0 * t[i]);
    return s;
  };
  auto rho = random_vector(m.n_elements(), 9, 0.1, 0.9);
  auto t = f.density_forward(rho);
  std::vector<double> g(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) g[i] = 2.0 * w[i] * t[i] + 3.0 * std::cos(3.0 * t[i]);
  auto an = f.density_backward(g);
  auto fd = fd_gradient(psi, rho);
  EXPECT_LT(compare_gradients(an, fd, 1e-6).max_rel_err, 1e-5);
}

TEST(DensityFilter, BackwardIsIdentityForDiagonalWeights) {
  Mesh m = grid2(5, 3);
  FilterOperator f = build_filter(m, 0.5, FilterKind::density);
  auto g = random_vector(m.n_elements(), 12);
  auto out = f.density_backward(g);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(out[i], g[i], 1e-15);
}

TEST(DensityFilter, BackwardPreservesConstantsAwayFromBoundary) {
  Mesh m = grid2(12, 12);
  FilterOperator f = build_filter(m, 2.0, FilterKind::density);
  auto out = f.density_backward(std::vector<double>(m.n_elements(), 2.0));
  // elements whose 2*r_min neighborhood stays inside the grid
  for (int j = 4; j < 8; ++j)
    for (int i = 4; i < 8; ++i) EXPECT_NEAR(out[i + 12 * j], 2.0, 1e-14);
}

TEST(Heaviside, EndpointsForAnyBeta) {
  for (double beta : {1.0, 2.0, 8.0, 64.0, 512.0}) {
    EXPECT_DOUBLE_EQ(FilterOperator::project(0.0, beta), 0.0);
    EXPECT_NEAR(FilterOperator::project(1.0, beta), 1.0, 1e-15);
  }
}

TEST(Heaviside, ReferenceValues) {
  EXPECT_NEAR(FilterOperator::project(0.5, 1.0), 1.0 - std::exp(-0.5) + 0.5 * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(FilterOperator::project(0.5, 1.0), 0.577409, 1e-6);
  EXPECT_NEAR(FilterOperator::project(0.1, 512.0), 1.0, 1e-10);
  EXPECT_NEAR(FilterOperator::project_derivative(0.0, 1.0), 1.367879, 1e-6);
}

TEST(Heaviside, DerivativeMatchesFiniteDifferences) {
  const double h = 1e-6;
  for (double beta : {1.0, 4.0, 8.0, 32.0}) {
    for (int i = 1; i < 50; ++i) {
      const double t = i / 50.0;
      const double fd = (FilterOperator::project(t + h, beta) - FilterOperator::project(t - h, beta)) / (2 * h);
      const double an = FilterOperator::project_derivative(t, beta);
      // FD round-off is about eps / h in absolute terms
      EXPECT_LT(std::abs(fd - an), 1e-6 * an + 1e-9) << "beta=" << beta << " t=" << t;
    }
  }
}

TEST(Heaviside, ZeroGradientMapsToZero) {
  Mesh m = grid2(3, 3);
  HeavisideParams hp;
  hp.beta0 = 16;
  FilterOperator f = build_filter(m, 1.5, FilterKind::heaviside, hp);
  auto x = random_vector(9, 2, 0.0, 1.0);
  for (double v : f.physical_backward(x, std::vector<double>(9, 0.0))) EXPECT_EQ(v, 0.0);
}

TEST(Heaviside, MonotoneForBetaAtLeastOne) {
  for (double beta : {1.0, 3.0, 100.0, 512.0}) {
    double prev = FilterOperator::project(0.0, beta);
    for (int i = 1; i <= 200; ++i) {
      const double v = FilterOperator::project(i / 200.0, beta);
      EXPECT_GE(v, prev);
      prev = v;
    }
  }
}

TEST(Heaviside, ChainMatchesFiniteDifferences) {
  Mesh m = grid2(4, 3);
  HeavisideParams hp;
  hp.beta0 = 8;
  FilterOperator f = build_filter(m, 1.7, FilterKind::heaviside, hp);
  auto w = random_vector(m.n_elements(), 21);
  auto psi = [&](std::span<const double> x) { return dot(w, f.physical(x)); };
  auto x = random_vector(m.n_elements(), 22, 0.2, 0.8);
  EXPECT_LT(compare_gradients(f.physical_backward(x, w), fd_gradient(psi, x), 1e-6).max_rel_err, 1e-5);
}

TEST(Continuation, DoublesAfterWindow) {
  FilterOperator f = build_filter(grid2(2, 2), 1.5, FilterKind::heaviside);
  for (int k = 1; k < 50; ++k) EXPECT_FALSE(f.continuation_step(k, 0.5).changed);
  auto s = f.continuation_step(50, 0.5);
  EXPECT_TRUE(s.changed);
  EXPECT_EQ(s.beta, 2.0);
  EXPECT_FALSE(f.continuation_step(51, 0.5).changed);
  EXPECT_TRUE(f.continuation_step(100, 0.5).changed);
  EXPECT_EQ(f.beta(), 4.0);
}

TEST(Continuation, DoublesEarlyOnConvergence) {
  FilterOperator f = build_filter(grid2(2, 2), 1.5, FilterKind::heaviside);
  auto s = f.continuation_step(7, 0.004);
  EXPECT_TRUE(s.changed);
  EXPECT_EQ(f.beta(), 2.0);
}

TEST(Continuation, CappedAtBetaMax) {
  HeavisideParams hp;
  hp.beta0 = 256;
  FilterOperator f = build_filter(grid2(2, 2), 1.5, FilterKind::heaviside, hp);
  auto s = f.continuation_step(50, 0.5);
  EXPECT_TRUE(s.changed);
  EXPECT_EQ(s.beta, 512.0);
  s = f.continuation_step(100, 0.0);
  EXPECT_FALSE(s.changed);
  EXPECT_EQ(s.beta, 512.0);
}

TEST(Continuation, OtherFiltersNeverChange) {
  FilterOperator f = build_filter(grid2(2, 2), 1.5, FilterKind::density);
  EXPECT_FALSE(f.continuation_step(50, 0.0).changed);
}

TEST(Heaviside, RejectsBadParameters) {
  HeavisideParams hp;
  hp.beta0 = 0.5;
  EXPECT_THROW(build_filter(grid2(2, 2), 1.5, FilterKind::heaviside, hp), InvalidArgument);
  hp = {};
  hp.beta_max = 0.9;
  EXPECT_THROW(build_filter(grid2(2, 2), 1.5, FilterKind::heaviside, hp), InvalidArgument);
}

TEST(FilterKind, Parse) {
  EXPECT_EQ(parse_filter_kind("heaviside"), FilterKind::heaviside);
  EXPECT_EQ(to_string(FilterKind::density), "density");
  EXPECT_THROW(parse_filter_kind("gauss"), InvalidArgument);
}
