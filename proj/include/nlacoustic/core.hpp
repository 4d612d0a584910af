#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "nlacoustic/error.hpp"

namespace nlacoustic {

inline constexpr double kPi = std::numbers::pi;

/// Anything that maps a real argument to a real value (nonlinearities, profiles).
template <class F>
concept ScalarMap = requires(const F& f, double u) {
  { f(u) } -> std::convertible_to<double>;
};

/// Uniform space-time grid on [x_lo, x_hi] x [0, T].
struct Grid {
  int nx = 0;
  int nt = 0;
  double x_lo = 0.0;
  double x_hi = 1.0;
  double T = 1.0;
  double dx = 0.0;
  double dt = 0.0;
  std::vector<double> x_nodes;
  std::vector<double> t_nodes;

  std::size_t n_space() const { return static_cast<std::size_t>(nx) + 1; }
  std::size_t n_time() const { return static_cast<std::size_t>(nt) + 1; }
};

inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out[i] = lo + step * static_cast<double>(i);
  out.back() = hi;
  return out;
}

inline Grid make_grid(int nx, int nt, double x_lo, double x_hi, double T) {
  require(nx >= 2, ErrorKind::NonPositiveExtent, "nx must be >= 2");
  require(nt >= 1, ErrorKind::NonPositiveExtent, "nt must be >= 1");
  require(T > 0.0, ErrorKind::NonPositiveExtent, "T must be positive");
  require(x_hi > x_lo, ErrorKind::NonPositiveExtent, "spatial domain is degenerate");
  Grid g;
  g.nx = nx;
  g.nt = nt;
  g.x_lo = x_lo;
  g.x_hi = x_hi;
  g.T = T;
  g.dx = (x_hi - x_lo) / nx;
  g.dt = T / nt;
  g.x_nodes = linspace(x_lo, x_hi, g.n_space());
  g.t_nodes = linspace(0.0, T, g.n_time());
  return g;
}

inline Grid make_grid(int nx, int nt, double T = 1.0) { return make_grid(nx, nt, 0.0, 1.0, T); }

/// One end of the interval. Impedance(beta) is the Robin condition
/// d_n v + beta v = 0 folded into the operator; beta = 0 is Neumann0.
struct BoundarySide {
  enum class Kind { Dirichlet0, Neumann0, Impedance };
  Kind kind = Kind::Dirichlet0;
  double beta = 0.0;

  static BoundarySide dirichlet() { return {Kind::Dirichlet0, 0.0}; }
  static BoundarySide neumann() { return {Kind::Neumann0, 0.0}; }
  static BoundarySide impedance(double beta) {
    require(beta >= 0.0, ErrorKind::InvalidConfig, "impedance beta must be >= 0");
    return {Kind::Impedance, beta};
  }
  bool is_dirichlet() const { return kind == Kind::Dirichlet0; }
};

struct BoundaryCondition {
  BoundarySide left = BoundarySide::dirichlet();
  BoundarySide right = BoundarySide::neumann();
};

/// Coefficients (lower, diag, upper) of row i of the discrete negative Laplacian.
struct StencilRow {
  double lower = 0.0;
  double diag = 0.0;
  double upper = 0.0;
};

inline StencilRow neg_laplacian_row(std::size_t i, const Grid& grid, const BoundaryCondition& bc) {
  const double inv = 1.0 / (grid.dx * grid.dx);
  const std::size_t last = static_cast<std::size_t>(grid.nx);
  auto boundary_row = [&](const BoundarySide& side, bool left) {
    StencilRow row;
    if (side.is_dirichlet()) {
      row.diag = 2.0 * inv;
      return row;
    }
    // ghost node: v_ghost = v_inner - 2 dx beta v_boundary
    const double beta = side.kind == BoundarySide::Kind::Impedance ? side.beta : 0.0;
    row.diag = (2.0 + 2.0 * grid.dx * beta) * inv;
    (left ? row.upper : row.lower) = -2.0 * inv;
    return row;
  };
  if (i == 0) return boundary_row(bc.left, true);
  if (i == last) return boundary_row(bc.right, false);
  return {-inv, 2.0 * inv, -inv};
}

inline std::vector<double> apply_neg_laplacian(std::span<const double> v, const Grid& grid,
                                               const BoundaryCondition& bc) {
  require(v.size() == grid.n_space(), ErrorKind::ShapeMismatch,
          "apply_neg_laplacian: expected " + std::to_string(grid.n_space()) + " nodes, got " +
              std::to_string(v.size()));
  const std::size_t n = v.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const StencilRow row = neg_laplacian_row(i, grid, bc);
    double acc = row.diag * v[i];
    if (i > 0) acc += row.lower * v[i - 1];
    if (i + 1 < n) acc += row.upper * v[i + 1];
    out[i] = acc;
  }
  return out;
}

/// Thomas algorithm; no pivoting, the callers only assemble diagonally dominant systems.
inline void solve_tridiagonal(std::span<const double> lower, std::span<const double> diag,
                              std::span<const double> upper, std::span<double> rhs) {
  const std::size_t n = diag.size();
  std::vector<double> c_star(n);
  double denom = diag[0];
  c_star[0] = upper[0] / denom;
  rhs[0] /= denom;
  for (std::size_t i = 1; i < n; ++i) {
    denom = diag[i] - lower[i] * c_star[i - 1];
    c_star[i] = upper[i] / denom;
    rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c_star[i] * rhs[i + 1];
}

struct Norms {
  double l2 = 0.0;
  double linf = 0.0;
};

/// Trapezoidal L2 norm and max-abs norm of samples v at abscissae x.
inline Norms norms(std::span<const double> x, std::span<const double> v) {
  require(!v.empty(), ErrorKind::EmptyInput, "norms: no samples");
  require(x.size() == v.size(), ErrorKind::ShapeMismatch, "norms: abscissae/values length");
  Norms out;
  for (double value : v) out.linf = std::max(out.linf, std::abs(value));
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i)
    acc += 0.5 * (x[i + 1] - x[i]) * (v[i] * v[i] + v[i + 1] * v[i + 1]);
  out.l2 = std::sqrt(acc);
  return out;
}

inline double trapezoid(std::span<const double> x, std::span<const double> v) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) acc += 0.5 * (x[i + 1] - x[i]) * (v[i] + v[i + 1]);
  return acc;
}

/// Linear interpolation on increasing abscissae with constant extrapolation.
inline double interp_clamped(std::span<const double> x, std::span<const double> y, double s) {
  if (s <= x.front()) return y.front();
  if (s >= x.back()) return y.back();
  const auto it = std::upper_bound(x.begin(), x.end(), s);
  const std::size_t hi = static_cast<std::size_t>(it - x.begin());
  const std::size_t lo = hi - 1;
  const double w = (s - x[lo]) / (x[hi] - x[lo]);
  return (1.0 - w) * y[lo] + w * y[hi];
}

/// Row-major (time, space) array.
struct Field2D {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Field2D() = default;
  Field2D(std::size_t r, std::size_t c, double value = 0.0) : rows(r), cols(c), data(r * c, value) {}

  double& operator()(std::size_t n, std::size_t i) { return data[n * cols + i]; }
  double operator()(std::size_t n, std::size_t i) const { return data[n * cols + i]; }
  std::span<double> row(std::size_t n) { return {data.data() + n * cols, cols}; }
  std::span<const double> row(std::size_t n) const { return {data.data() + n * cols, cols}; }
};

}  // namespace nlacoustic
