#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

namespace topopt {

/// Square sparse matrix in compressed row layout. Column indices are sorted
/// within each row.
struct CsrMatrix {
  int n = 0;
  std::vector<int> row_ptr{0};
  std::vector<int> col;
  std::vector<double> val;

  [[nodiscard]] std::size_t nnz() const { return col.size(); }

  /// Index into `val` of entry (i, j), or -1 when outside the pattern.
  [[nodiscard]] int find(int i, int j) const {
    auto first = col.begin() + row_ptr[i];
    auto last = col.begin() + row_ptr[i + 1];
    auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return -1;
    return static_cast<int>(it - col.begin());
  }

  [[nodiscard]] double at(int i, int j) const {
    int k = find(i, j);
    return k < 0 ? 0.0 : val[k];
  }

  void multiply(std::span<const double> x, std::span<double> y) const {
    assert(x.size() == static_cast<std::size_t>(n) && y.size() == static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[col[k]];
      y[i] = s;
    }
  }

  [[nodiscard]] std::vector<double> multiply(std::span<const double> x) const {
    std::vector<double> y(n);
    multiply(x, y);
    return y;
  }

  [[nodiscard]] std::vector<double> diagonal() const {
    std::vector<double> d(n, 0.0);
    for (int i = 0; i < n; ++i) d[i] = at(i, i);
    return d;
  }

  [[nodiscard]] double max_abs() const {
    double m = 0.0;
    for (double v : val) m = std::max(m, std::abs(v));
    return m;
  }

  /// Largest |A_ij - A_ji| over the pattern.
  [[nodiscard]] double asymmetry() const {
    double m = 0.0;
    for (int i = 0; i < n; ++i)
      for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k) m = std::max(m, std::abs(val[k] - at(col[k], i)));
    return m;
  }

  /// Builds from (row, col, value) triplets; duplicates are summed in the
  /// order given.
  static CsrMatrix from_triplets(int n, std::vector<std::pair<std::pair<int, int>, double>> t) {
    std::stable_sort(t.begin(), t.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    CsrMatrix m;
    m.n = n;
    m.row_ptr.assign(n + 1, 0);
    for (std::size_t k = 0; k < t.size(); ++k) {
      auto [i, j] = t[k].first;
      if (!m.col.empty() && k > 0 && t[k - 1].first == t[k].first) {
        m.val.back() += t[k].second;
        continue;
      }
      m.col.push_back(j);
      m.val.push_back(t[k].second);
      m.row_ptr[i + 1]++;
    }
    for (int i = 0; i < n; ++i) m.row_ptr[i + 1] += m.row_ptr[i];
    return m;
  }

  static CsrMatrix identity(int n) {
    CsrMatrix m;
    m.n = n;
    m.row_ptr.resize(n + 1);
    for (int i = 0; i <= n; ++i) m.row_ptr[i] = i;
    m.col.resize(n);
    for (int i = 0; i < n; ++i) m.col[i] = i;
    m.val.assign(n, 1.0);
    return m;
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace topopt
