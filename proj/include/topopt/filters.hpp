#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "topopt/error.hpp"
#include "topopt/mesh.hpp"
#include "topopt/sparse.hpp"

namespace topopt {

enum class FilterKind { none, sensitivity, density, heaviside };

inline std::string to_string(FilterKind k) {
  switch (k) {
    case FilterKind::none: return "none";
    case FilterKind::sensitivity: return "sensitivity";
    case FilterKind::density: return "density";
    case FilterKind::heaviside: return "heaviside";
  }
  return "?";
}

inline FilterKind parse_filter_kind(const std::string& s) {
  if (s == "none") return FilterKind::none;
  if (s == "sensitivity") return FilterKind::sensitivity;
  if (s == "density") return FilterKind::density;
  if (s == "heaviside") return FilterKind::heaviside;
  throw InvalidArgument("unknown filter '" + s + "'");
}

struct HeavisideParams {
  double beta0 = 1.0;
  double beta_max = 512.0;
  int continuation_iter = 50;
};

/// Weight matrix H_ij = max(0, r_min - |c_i - c_j|) over element centroids,
/// restricted to pairs with |c_i - c_j| < r_min. Neighbors are found with
/// uniform buckets of side r_min, so only the 3^dim surrounding buckets are
/// scanned per element.
inline CsrMatrix neighbor_weights(std::span<const double> centroids, int dim, double r_min) {
  if (!(r_min > 0.0)) throw InvalidArgument("filter radius must be positive");
  const std::size_t n = centroids.size() / dim;
  std::array<double, 3> lo{INFINITY, INFINITY, INFINITY};
  for (std::size_t i = 0; i < n; ++i)
    for (int a = 0; a < dim; ++a) lo[a] = std::min(lo[a], centroids[i * dim + a]);

  auto bucket_of = [&](std::size_t i) {
    std::array<std::int64_t, 3> b{0, 0, 0};
    for (int a = 0; a < dim; ++a) b[a] = static_cast<std::int64_t>(std::floor((centroids[i * dim + a] - lo[a]) / r_min));
    return b;
  };
  auto key = [](const std::array<std::int64_t, 3>& b) {
    return (b[0] * 73856093) ^ (b[1] * 19349663) ^ (b[2] * 83492791);
  };
  std::unordered_map<std::int64_t, std::vector<int>> buckets;
  std::vector<std::array<std::int64_t, 3>> where(n);
  for (std::size_t i = 0; i < n; ++i) {
    where[i] = bucket_of(i);
    buckets[key(where[i])].push_back(static_cast<int>(i));
  }

  CsrMatrix H;
  H.n = static_cast<int>(n);
  H.row_ptr.assign(n + 1, 0);
  std::vector<std::pair<int, double>> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    const auto b = where[i];
    const int span_z = dim == 3 ? 1 : 0;
    for (int dz = -span_z; dz <= span_z; ++dz)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          std::array<std::int64_t, 3> nb{b[0] + dx, b[1] + dy, b[2] + dz};
          auto it = buckets.find(key(nb));
          if (it == buckets.end()) continue;
          for (int j : it->second) {
            if (where[j] != nb) continue;  // hash collision
            double d2 = 0.0;
            for (int a = 0; a < dim; ++a) {
              double t = centroids[i * dim + a] - centroids[j * dim + a];
              d2 += t * t;
            }
            const double d = std::sqrt(d2);
            if (d < r_min) row.emplace_back(j, r_min - d);
          }
        }
    std::sort(row.begin(), row.end());
    for (auto [j, w] : row) {
      H.col.push_back(j);
      H.val.push_back(w);
    }
    H.row_ptr[i + 1] = static_cast<int>(H.col.size());
  }
  return H;
}

/// Result of a continuation check.
struct ContinuationStep {
  double beta = 1.0;
  bool changed = false;  ///< when true the outer convergence test restarts
};

/// Filtering stage between design variables and physical densities.
///
/// sensitivity: dc~_i = sum_j H_ij rho_j dc_j / (max(gamma, rho_i) sum_j H_ij)
/// density:     rho~_i = sum_j H_ij v_j rho_j / sum_j H_ij v_j
/// heaviside:   density filter, then rho_bar = 1 - exp(-beta rho~) + rho~ exp(-beta)
class FilterOperator {
 public:
  static constexpr double kGamma = 1e-3;

  FilterOperator() = default;

  FilterOperator(FilterKind kind, CsrMatrix H, std::vector<double> volumes, double r_min,
                 HeavisideParams hp = {})
      : kind_(kind), H_(std::move(H)), volumes_(std::move(volumes)), r_min_(r_min), params_(hp) {
    if (static_cast<std::size_t>(H_.n) != volumes_.size()) throw InvalidArgument("weights and volumes disagree in size");
    row_sum_.assign(H_.n, 0.0);
    vol_sum_.assign(H_.n, 0.0);
    for (int i = 0; i < H_.n; ++i)
      for (int k = H_.row_ptr[i]; k < H_.row_ptr[i + 1]; ++k) {
        row_sum_[i] += H_.val[k];
        vol_sum_[i] += H_.val[k] * volumes_[H_.col[k]];
      }
    if (kind_ == FilterKind::heaviside) {
      if (!(hp.beta0 >= 1.0)) throw InvalidArgument("heaviside beta must be >= 1");
      if (!(hp.beta_max >= hp.beta0)) throw InvalidArgument("heaviside beta_max must be >= beta0");
      if (hp.continuation_iter < 1) throw InvalidArgument("continuation_iter must be >= 1");
    }
    beta_ = hp.beta0;
  }

  [[nodiscard]] FilterKind kind() const { return kind_; }
  [[nodiscard]] const CsrMatrix& weights() const { return H_; }
  [[nodiscard]] std::span<const double> volumes() const { return volumes_; }
  [[nodiscard]] double r_min() const { return r_min_; }
  [[nodiscard]] double beta() const { return beta_; }
  [[nodiscard]] const HeavisideParams& heaviside_params() const { return params_; }
  void set_beta(double b) { beta_ = b; }

  [[nodiscard]] bool transforms_density() const {
    return kind_ == FilterKind::density || kind_ == FilterKind::heaviside;
  }

  [[nodiscard]] std::vector<double> filter_sensitivities(std::span<const double> rho,
                                                         std::span<const double> dc) const {
    const int n = H_.n;
    check(rho.size());
    check(dc.size());
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int k = H_.row_ptr[i]; k < H_.row_ptr[i + 1]; ++k) s += H_.val[k] * rho[H_.col[k]] * dc[H_.col[k]];
      out[i] = s / (std::max(kGamma, rho[i]) * row_sum_[i]);
    }
    return out;
  }

  [[nodiscard]] std::vector<double> density_forward(std::span<const double> rho) const {
    check(rho.size());
    std::vector<double> out(H_.n);
    for (int i = 0; i < H_.n; ++i) {
      double s = 0.0;
      for (int k = H_.row_ptr[i]; k < H_.row_ptr[i + 1]; ++k) s += H_.val[k] * volumes_[H_.col[k]] * rho[H_.col[k]];
      out[i] = s / vol_sum_[i];
    }
    return out;
  }

  /// Transpose of density_forward: g_j = sum_i H_ij v_j / (sum_k H_ik v_k) g~_i.
  [[nodiscard]] std::vector<double> density_backward(std::span<const double> g) const {
    check(g.size());
    std::vector<double> scaled(H_.n);
    for (int i = 0; i < H_.n; ++i) scaled[i] = g[i] / vol_sum_[i];
    std::vector<double> out(H_.n);
    // H is symmetric: column j of H equals row j.
    for (int j = 0; j < H_.n; ++j) {
      double s = 0.0;
      for (int k = H_.row_ptr[j]; k < H_.row_ptr[j + 1]; ++k) s += H_.val[k] * scaled[H_.col[k]];
      out[j] = s * volumes_[j];
    }
    return out;
  }

  [[nodiscard]] static double project(double rho_tilde, double beta) {
    return 1.0 - std::exp(-beta * rho_tilde) + rho_tilde * std::exp(-beta);
  }
  [[nodiscard]] static double project_derivative(double rho_tilde, double beta) {
    return beta * std::exp(-beta * rho_tilde) + std::exp(-beta);
  }

  [[nodiscard]] std::vector<double> heaviside_forward(std::span<const double> rho_tilde) const {
    std::vector<double> out(rho_tilde.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = project(rho_tilde[i], beta_);
    return out;
  }

  [[nodiscard]] std::vector<double> heaviside_backward(std::span<const double> g,
                                                       std::span<const double> rho_tilde) const {
    std::vector<double> out(g.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = g[i] * project_derivative(rho_tilde[i], beta_);
    return out;
  }

  /// Design variables -> physical densities. Identity for none/sensitivity.
  [[nodiscard]] std::vector<double> physical(std::span<const double> x) const {
    if (kind_ == FilterKind::density) return density_forward(x);
    if (kind_ == FilterKind::heaviside) return heaviside_forward(density_forward(x));
    return {x.begin(), x.end()};
  }

  /// d psi / d x from d psi / d physical, evaluated at design x.
  [[nodiscard]] std::vector<double> physical_backward(std::span<const double> x,
                                                      std::span<const double> g) const {
    if (kind_ == FilterKind::density) return density_backward(g);
    if (kind_ == FilterKind::heaviside) return density_backward(heaviside_backward(g, density_forward(x)));
    return {g.begin(), g.end()};
  }

  /// Doubles beta (capped at beta_max) once continuation_iter iterations
  /// have passed since the last increase, or earlier when the design has
  /// converged at the current beta (max_change <= tol).
  ContinuationStep continuation_step(int iteration, double max_change, double tol = 0.01) {
    if (kind_ != FilterKind::heaviside) return {beta_, false};
    const int elapsed = iteration - last_increase_;
    if (beta_ < params_.beta_max && (elapsed >= params_.continuation_iter || max_change <= tol)) {
      beta_ = std::min(2.0 * beta_, params_.beta_max);
      last_increase_ = iteration;
      return {beta_, true};
    }
    return {beta_, false};
  }

 private:
  void check(std::size_t n) const {
    if (n != static_cast<std::size_t>(H_.n))
      throw InvalidArgument("filter input has " + std::to_string(n) + " entries, expected " + std::to_string(H_.n));
  }

  FilterKind kind_ = FilterKind::none;
  CsrMatrix H_;
  std::vector<double> volumes_;
  std::vector<double> row_sum_;
  std::vector<double> vol_sum_;
  double r_min_ = 0.0;
  HeavisideParams params_;
  double beta_ = 1.0;
  int last_increase_ = 0;
};

inline FilterOperator build_filter(const Mesh& mesh, double r_min, FilterKind kind, HeavisideParams hp = {}) {
  if (!(r_min > 0.0)) throw InvalidArgument("filter radius must be positive");
  auto geo = element_geometry(mesh);
  CsrMatrix H = neighbor_weights(geo.centroids, mesh.dim, r_min);
  return FilterOperator(kind, std::move(H), std::move(geo.volumes), r_min, hp);
}

}  // namespace topopt
