#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "nlacoustic/core.hpp"
#include "nlacoustic/error.hpp"
#include "nlacoustic/io.hpp"

namespace nlacoustic {

/// Coefficients, initial state and excitation of
///   (1 - f(p)) p_t + A int_0^t k(t - s) p(s) ds = r_tilde,
/// where k = b delta + c^2 (alpha = 1) or b (t-s)^{-alpha} / Gamma(1-alpha) + c^2.
struct PhysicalParams {
  double c = 1.0;
  double b = 0.05;
  double alpha = 1.0;
  std::vector<double> p0;  // empty means zero
  std::vector<double> p1;  // empty means zero
  std::function<double(double, double)> r;  // driving term r(x, t); empty means zero
  Field2D r_table;                          // alternative: r sampled on the grid
  /// Replaces the assembled r_tilde entirely (manufactured solutions).
  std::function<double(double, double)> r_tilde_override;

  void validate(const Grid& grid) const {
    require(c > 0.0, ErrorKind::InvalidConfig, "wave speed c must be > 0");
    require(b > 0.0, ErrorKind::InvalidConfig, "damping b must be > 0");
    if (!(alpha > 0.0 && alpha <= 1.0)) fail(ErrorKind::InvalidAlpha, "alpha must lie in (0, 1]");
    require(p0.empty() || p0.size() == grid.n_space(), ErrorKind::ShapeMismatch, "p0 length");
    require(p1.empty() || p1.size() == grid.n_space(), ErrorKind::ShapeMismatch, "p1 length");
    require(r_table.data.empty() || (r_table.rows == grid.n_time() && r_table.cols == grid.n_space()),
            ErrorKind::ShapeMismatch, "r_table shape");
  }

  double p0_at(std::size_t i) const { return p0.empty() ? 0.0 : p0[i]; }
  double p1_at(std::size_t i) const { return p1.empty() ? 0.0 : p1[i]; }
};

struct PressureField {
  Field2D p;
  Field2D pt;
  double max_abs_p = 0.0;
  double degeneracy_margin = 1.0;  // min over the grid of 1 - f(p)
};

struct SolveReport {
  std::vector<int> inner_iter_counts;
  double residual_norm = 0.0;
  double wallclock = 0.0;
  std::uint64_t history_slices_touched = 0;
  std::string kernel;
};

struct SolverOptions {
  double tol_inner = 1e-10;
  int max_inner = 50;
  double margin_min = 0.05;
  bool strict_range = false;
  double range_limit = std::numeric_limits<double>::infinity();
  /// Test hook: negates the c^2 memory contribution (mutation probe for the verifier).
  bool flip_memory_sign = false;
};

/// Quadrature weights W[n][j] with M^n = sum_j W[n][j] p^j approximating
/// int_0^{t_n} k(t_n - s) p(s) ds for the combined damping + memory kernel.
class MemoryKernel {
 public:
  MemoryKernel(const PhysicalParams& params, double dt, int nt, bool flip_memory_sign = false)
      : alpha_(params.alpha), b_(params.b), c2_(params.c * params.c * (flip_memory_sign ? -1.0 : 1.0)),
        dt_(dt) {
    if (alpha_ < 1.0) {
      // product trapezoid for s^{-alpha}: exact for piecewise-linear p
      const double beta = 1.0 - alpha_;
      const double scale = b_ / std::tgamma(1.0 - alpha_);
      left_.assign(static_cast<std::size_t>(nt) + 2, 0.0);
      right_.assign(static_cast<std::size_t>(nt) + 2, 0.0);
      for (int m = 1; m <= nt + 1; ++m) {
        const double lo = (m - 1) * dt;
        const double hi = m * dt;
        const double i0 = (std::pow(hi, beta) - std::pow(lo, beta)) / beta;
        const double i1 = (std::pow(hi, beta + 1.0) - std::pow(lo, beta + 1.0)) / (beta + 1.0);
        left_[static_cast<std::size_t>(m)] = scale * (i1 - lo * i0) / dt;
        right_[static_cast<std::size_t>(m)] = scale * (hi * i0 - i1) / dt;
      }
    }
  }

  bool fractional() const { return alpha_ < 1.0; }
  std::string label() const {
    return fractional() ? "abel(alpha=" + io::format_double(alpha_) + ")+trapezoid" : "strong+trapezoid";
  }

  double weight(std::size_t n, std::size_t j) const {
    if (n == 0) return fractional() ? 0.0 : b_;
    const double trap = c2_ * dt_ * ((j == 0 || j == n) ? 0.5 : 1.0);
    if (!fractional()) return trap + (j == n ? b_ : 0.0);
    double abel = 0.0;
    if (j < n) abel += left_[n - j];
    if (j > 0) abel += right_[n - j + 1];
    return trap + abel;
  }

 private:
  double alpha_;
  double b_;
  double c2_;
  double dt_;
  std::vector<double> left_;
  std::vector<double> right_;
};

template <ScalarMap F>
Field2D assemble_rtilde(const PhysicalParams& params, const F& f, const Grid& grid,
                        const BoundaryCondition& bc) {
  const std::size_t nts = grid.n_time();
  const std::size_t nxs = grid.n_space();
  Field2D out(nts, nxs);
  if (params.r_tilde_override) {
    for (std::size_t n = 0; n < nts; ++n)
      for (std::size_t i = 0; i < nxs; ++i)
        out(n, i) = params.r_tilde_override(grid.x_nodes[i], grid.t_nodes[n]);
    return out;
  }
  std::vector<double> p0(nxs);
  for (std::size_t i = 0; i < nxs; ++i) p0[i] = params.p0_at(i);
  const auto ap0 = apply_neg_laplacian(p0, grid, bc);

  auto r_at = [&](std::size_t n, std::size_t i) {
    if (!params.r_table.data.empty()) return params.r_table(n, i);
    if (params.r) return params.r(grid.x_nodes[i], grid.t_nodes[n]);
    return 0.0;
  };
  // Caputo damping of a nonzero p0 leaves b A p0 t^{1-alpha} / Gamma(2-alpha); alpha = 1 gives b A p0.
  const double frac_gamma = std::tgamma(2.0 - params.alpha);
  for (std::size_t i = 0; i < nxs; ++i) {
    const double initial = (1.0 - f(p0[i])) * params.p1_at(i);
    double integral = 0.0;
    double prev = r_at(0, i);
    for (std::size_t n = 0; n < nts; ++n) {
      if (n > 0) {
        const double cur = r_at(n, i);
        integral += 0.5 * grid.dt * (prev + cur);
        prev = cur;
      }
      const double damping_factor =
          params.alpha >= 1.0 ? 1.0 : std::pow(grid.t_nodes[n], 1.0 - params.alpha) / frac_gamma;
      out(n, i) = integral + initial + params.b * ap0[i] * damping_factor;
    }
  }
  return out;
}

namespace detail {

inline bool is_dirichlet_node(std::size_t i, const Grid& grid, const BoundaryCondition& bc) {
  return (i == 0 && bc.left.is_dirichlet()) ||
         (i == static_cast<std::size_t>(grid.nx) && bc.right.is_dirichlet());
}

inline double l2_space(std::span<const double> v, const Grid& grid) {
  return norms(grid.x_nodes, v).l2;
}

/// Fill pt from half-step difference quotients: averaged at interior nodes,
/// second-order one-sided at t = T, initial velocity at t = 0.
inline void fill_time_derivative(const Field2D& p, Field2D& pt, const Grid& grid,
                                 std::span<const double> initial_velocity) {
  const std::size_t nts = grid.n_time();
  const std::size_t nxs = grid.n_space();
  const std::size_t nt = nts - 1;
  auto half = [&](std::size_t n, std::size_t i) { return (p(n + 1, i) - p(n, i)) / grid.dt; };
  for (std::size_t i = 0; i < nxs; ++i) {
    pt(0, i) = initial_velocity.empty() ? 0.0 : initial_velocity[i];
    for (std::size_t n = 1; n < nt; ++n) pt(n, i) = 0.5 * (half(n - 1, i) + half(n, i));
    pt(nt, i) = nt >= 2 ? 1.5 * half(nt - 1, i) - 0.5 * half(nt - 2, i) : half(0, i);
  }
}

/// Accumulates H = sum_{j<=n} W[n+1][j] v^j; touches exactly n+1 history slices.
inline void history_sum(const MemoryKernel& kernel, const Field2D& v, std::size_t next,
                        std::vector<double>& out, std::uint64_t& slices) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < next; ++j) {
    const double w = kernel.weight(next, j);
    const auto row = v.row(j);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * row[i];
    ++slices;
  }
}

/// Residual of one time step of the discrete scheme, L2 in space.
template <ScalarMap F>
double step_residual(const Field2D& p, std::size_t n, const F& f, const MemoryKernel& kernel,
                     const Field2D& rtilde, const Grid& grid, const BoundaryCondition& bc) {
  const std::size_t nxs = grid.n_space();
  std::vector<double> mem_new(nxs, 0.0), mem_old(nxs, 0.0);
  for (std::size_t j = 0; j <= n + 1; ++j) {
    const double w = kernel.weight(n + 1, j);
    for (std::size_t i = 0; i < nxs; ++i) mem_new[i] += w * p(j, i);
  }
  for (std::size_t j = 0; j <= n; ++j) {
    const double w = kernel.weight(n, j);
    for (std::size_t i = 0; i < nxs; ++i) mem_old[i] += w * p(j, i);
  }
  std::vector<double> mem(nxs);
  for (std::size_t i = 0; i < nxs; ++i) mem[i] = 0.5 * (mem_new[i] + mem_old[i]);
  const auto amem = apply_neg_laplacian(mem, grid, bc);
  std::vector<double> res(nxs);
  for (std::size_t i = 0; i < nxs; ++i) {
    if (is_dirichlet_node(i, grid, bc)) {
      res[i] = p(n + 1, i);
      continue;
    }
    const double mid = 0.5 * (p(n, i) + p(n + 1, i));
    res[i] = (1.0 - f(mid)) * (p(n + 1, i) - p(n, i)) / grid.dt + amem[i] -
             0.5 * (rtilde(n + 1, i) + rtilde(n, i));
  }
  return l2_space(res, grid);
}

template <ScalarMap F>
std::pair<PressureField, SolveReport> integrate(const PhysicalParams& params, const F& f, const Grid& grid,
                                                const BoundaryCondition& bc, const SolverOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  params.validate(grid);
  const std::size_t nts = grid.n_time();
  const std::size_t nxs = grid.n_space();
  const MemoryKernel kernel(params, grid.dt, grid.nt, opts.flip_memory_sign);
  const Field2D rtilde = assemble_rtilde(params, f, grid, bc);

  PressureField field;
  field.p = Field2D(nts, nxs);
  field.pt = Field2D(nts, nxs);
  SolveReport report;
  report.kernel = kernel.label();
  report.inner_iter_counts.reserve(nts - 1);

  for (std::size_t i = 0; i < nxs; ++i) field.p(0, i) = is_dirichlet_node(i, grid, bc) ? 0.0 : params.p0_at(i);

  std::vector<double> mem_old(nxs), history(nxs), rhs_mem(nxs), coeff(nxs);
  std::vector<double> lower(nxs), diag(nxs), upper(nxs), rhs(nxs), guess(nxs);
  for (std::size_t i = 0; i < nxs; ++i) mem_old[i] = kernel.weight(0, 0) * field.p(0, i);

  auto check_range = [&](std::span<const double> v) {
    if (!opts.strict_range) return;
    for (double x : v)
      if (std::abs(x) > opts.range_limit)
        fail(ErrorKind::RangeExceeded, "|p| = " + io::format_double(std::abs(x)) + " exceeds M = " +
                                           io::format_double(opts.range_limit));
  };
  check_range(field.p.row(0));

  for (std::size_t n = 0; n + 1 < nts; ++n) {
    const auto p_old = field.p.row(n);
    history_sum(kernel, field.p, n + 1, history, report.history_slices_touched);
    const double w_new = kernel.weight(n + 1, n + 1);
    for (std::size_t i = 0; i < nxs; ++i) rhs_mem[i] = 0.5 * (history[i] + mem_old[i]);
    const auto a_rhs_mem = apply_neg_laplacian(rhs_mem, grid, bc);

    for (std::size_t i = 0; i < nxs; ++i) {
      guess[i] = n == 0 ? p_old[i] + grid.dt * params.p1_at(i) : 2.0 * p_old[i] - field.p(n - 1, i);
      if (is_dirichlet_node(i, grid, bc)) guess[i] = 0.0;
    }

    int iters = 0;
    while (true) {
      if (iters >= opts.max_inner)
        fail(ErrorKind::InnerIterationDiverged,
             "no inner convergence within " + std::to_string(opts.max_inner) + " iterations at step " +
                 std::to_string(n + 1));
      ++iters;
      for (std::size_t i = 0; i < nxs; ++i) {
        const double one_minus_f = 1.0 - f(0.5 * (p_old[i] + guess[i]));
        if (!(one_minus_f > opts.margin_min))
          fail(ErrorKind::NonDegeneracyViolated,
               "1 - f(p) = " + io::format_double(one_minus_f) + " at step " + std::to_string(n + 1));
        coeff[i] = one_minus_f / grid.dt;
      }
      for (std::size_t i = 0; i < nxs; ++i) {
        if (is_dirichlet_node(i, grid, bc)) {
          lower[i] = upper[i] = 0.0;
          diag[i] = 1.0;
          rhs[i] = 0.0;
          continue;
        }
        const StencilRow row = neg_laplacian_row(i, grid, bc);
        lower[i] = 0.5 * w_new * row.lower;
        upper[i] = 0.5 * w_new * row.upper;
        diag[i] = coeff[i] + 0.5 * w_new * row.diag;
        rhs[i] = coeff[i] * p_old[i] + 0.5 * (rtilde(n + 1, i) + rtilde(n, i)) - a_rhs_mem[i];
      }
      solve_tridiagonal(lower, diag, upper, rhs);
      double change = 0.0, size = 0.0;
      for (std::size_t i = 0; i < nxs; ++i) {
        change = std::max(change, std::abs(rhs[i] - guess[i]));
        size = std::max(size, std::abs(rhs[i]));
      }
      guess.swap(rhs);
      if (!std::isfinite(size))
        fail(ErrorKind::InnerIterationDiverged, "non-finite iterate at step " + std::to_string(n + 1));
      if (change <= opts.tol_inner * size) break;
    }
    report.inner_iter_counts.push_back(iters);
    std::copy(guess.begin(), guess.end(), field.p.row(n + 1).begin());
    check_range(field.p.row(n + 1));
    for (std::size_t i = 0; i < nxs; ++i) mem_old[i] = history[i] + w_new * guess[i];
  }

  fill_time_derivative(field.p, field.pt, grid, params.p1);
  for (std::size_t i = 0; i < nxs; ++i)
    if (is_dirichlet_node(i, grid, bc)) field.pt(0, i) = 0.0;
  field.max_abs_p = 0.0;
  field.degeneracy_margin = std::numeric_limits<double>::infinity();
  for (double v : field.p.data) {
    field.max_abs_p = std::max(field.max_abs_p, std::abs(v));
    field.degeneracy_margin = std::min(field.degeneracy_margin, 1.0 - f(v));
  }
  if (!(field.degeneracy_margin > 0.0))
    fail(ErrorKind::NonDegeneracyViolated, "1 - f(p) reached " + io::format_double(field.degeneracy_margin));
  for (std::size_t n = 0; n + 1 < nts; ++n)
    report.residual_norm = std::max(report.residual_norm, step_residual(field.p, n, f, kernel, rtilde, grid, bc));
  report.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(field), std::move(report)};
}

}  // namespace detail

/// Integer-order damping (alpha = 1): Crank-Nicolson with trapezoidal memory
/// and a lagged-coefficient inner iteration on 1 - f(p).
template <ScalarMap F>
std::pair<PressureField, SolveReport> solve_forward(const PhysicalParams& params, const F& f, const Grid& grid,
                                                    const BoundaryCondition& bc, const SolverOptions& opts = {}) {
  if (params.alpha != 1.0) fail(ErrorKind::InvalidAlpha, "solve_forward requires alpha = 1");
  return detail::integrate(params, f, grid, bc, opts);
}

/// Fractional damping 0 < alpha < 1: Abel kernel by product-trapezoid weights.
template <ScalarMap F>
std::pair<PressureField, SolveReport> solve_forward_fractional(const PhysicalParams& params, const F& f,
                                                               const Grid& grid, const BoundaryCondition& bc,
                                                               const SolverOptions& opts = {}) {
  if (!(params.alpha > 0.0 && params.alpha < 1.0))
    fail(ErrorKind::InvalidAlpha, "solve_forward_fractional requires 0 < alpha < 1");
  return detail::integrate(params, f, grid, bc, opts);
}

/// Dispatches on params.alpha.
template <ScalarMap F>
std::pair<PressureField, SolveReport> solve(const PhysicalParams& params, const F& f, const Grid& grid,
                                            const BoundaryCondition& bc, const SolverOptions& opts = {}) {
  return params.alpha < 1.0 ? solve_forward_fractional(params, f, grid, bc, opts)
                            : solve_forward(params, f, grid, bc, opts);
}

/// Max over time steps of the L2 norm of the discrete equation residual.
template <ScalarMap F>
double discrete_residual(const PressureField& field, const PhysicalParams& params, const F& f, const Grid& grid,
                         const BoundaryCondition& bc) {
  require(field.p.rows == grid.n_time() && field.p.cols == grid.n_space(), ErrorKind::ShapeMismatch,
          "discrete_residual: field shape does not match grid");
  params.validate(grid);
  const MemoryKernel kernel(params, grid.dt, grid.nt);
  const Field2D rtilde = assemble_rtilde(params, f, grid, bc);
  double worst = 0.0;
  for (std::size_t n = 0; n + 1 < grid.n_time(); ++n)
    worst = std::max(worst, detail::step_residual(field.p, n, f, kernel, rtilde, grid, bc));
  return worst;
}

namespace detail {

template <class T>
void write_le(std::ostream& out, T value) {
  auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
T read_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
  require(static_cast<bool>(in), ErrorKind::Io, "truncated field dump");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

}  // namespace detail

/// Binary dump: int64 nx, int64 nt, f64 T, f64 x_lo, f64 x_hi, then p and pt
/// as row-major (time-major) f64 arrays; everything little-endian.
inline void dump_field(const PressureField& field, const Grid& grid, const std::filesystem::path& path) {
  auto out = io::open_for_write(path);
  detail::write_le<std::int64_t>(out, grid.nx);
  detail::write_le<std::int64_t>(out, grid.nt);
  detail::write_le<double>(out, grid.T);
  detail::write_le<double>(out, grid.x_lo);
  detail::write_le<double>(out, grid.x_hi);
  for (double v : field.p.data) detail::write_le<double>(out, v);
  for (double v : field.pt.data) detail::write_le<double>(out, v);
}

inline std::pair<PressureField, Grid> load_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  const auto nx = detail::read_le<std::int64_t>(in);
  const auto nt = detail::read_le<std::int64_t>(in);
  const double T = detail::read_le<double>(in);
  const double x_lo = detail::read_le<double>(in);
  const double x_hi = detail::read_le<double>(in);
  Grid grid = make_grid(static_cast<int>(nx), static_cast<int>(nt), x_lo, x_hi, T);
  PressureField field;
  field.p = Field2D(grid.n_time(), grid.n_space());
  field.pt = Field2D(grid.n_time(), grid.n_space());
  for (double& v : field.p.data) v = detail::read_le<double>(in);
  for (double& v : field.pt.data) v = detail::read_le<double>(in);
  for (double v : field.p.data) field.max_abs_p = std::max(field.max_abs_p, std::abs(v));
  return {std::move(field), std::move(grid)};
}

}  // namespace nlacoustic
