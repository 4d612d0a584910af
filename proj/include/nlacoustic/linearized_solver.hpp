#pragma once

#include <vector>

#include "nlacoustic/core.hpp"
#include "nlacoustic/error.hpp"
#include "nlacoustic/forward_solver.hpp"
#include "nlacoustic/observation.hpp"

namespace nlacoustic {

struct LinearizedField {
  Field2D z;
  Field2D zt;
};

/// Derivative of the discrete parameter-to-state map in direction df.
///
/// Differentiating one Crank-Nicolson step of the forward scheme gives
///   (1 - f(pm)) (z^{n+1} - z^n)/dt - f'(pm) d zm + A (Mz^{n+1} + Mz^n)/2
///     = df(pm) d - df(p0) p1,
/// with pm, zm the step midpoints and d = (p^{n+1} - p^n)/dt, so z is the exact
/// tangent of the discrete solution and finite differences of solve_forward
/// converge to it at first order in the perturbation size.
template <ScalarMap F, ScalarMap FPrime, ScalarMap DF>
LinearizedField solve_linearized(const PhysicalParams& params, const F& f, const FPrime& fprime,
                                 const PressureField& base, const DF& df, const Grid& grid,
                                 const BoundaryCondition& bc, double margin_min = 0.05) {
  params.validate(grid);
  const std::size_t nts = grid.n_time();
  const std::size_t nxs = grid.n_space();
  require(base.p.rows == nts && base.p.cols == nxs, ErrorKind::ShapeMismatch,
          "solve_linearized: base field shape does not match grid");
  const MemoryKernel kernel(params, grid.dt, grid.nt);

  LinearizedField out{Field2D(nts, nxs), Field2D(nts, nxs)};
  std::vector<double> source0(nxs);
  for (std::size_t i = 0; i < nxs; ++i) source0[i] = df(params.p0_at(i)) * params.p1_at(i);

  std::vector<double> mem_old(nxs, 0.0), history(nxs), rhs_mem(nxs);
  std::vector<double> lower(nxs), diag(nxs), upper(nxs), rhs(nxs);
  std::uint64_t slices = 0;
  for (std::size_t n = 0; n + 1 < nts; ++n) {
    detail::history_sum(kernel, out.z, n + 1, history, slices);
    const double w_new = kernel.weight(n + 1, n + 1);
    for (std::size_t i = 0; i < nxs; ++i) rhs_mem[i] = 0.5 * (history[i] + mem_old[i]);
    const auto a_rhs_mem = apply_neg_laplacian(rhs_mem, grid, bc);
    for (std::size_t i = 0; i < nxs; ++i) {
      if (detail::is_dirichlet_node(i, grid, bc)) {
        lower[i] = upper[i] = 0.0;
        diag[i] = 1.0;
        rhs[i] = 0.0;
        continue;
      }
      const double mid = 0.5 * (base.p(n, i) + base.p(n + 1, i));
      const double d = (base.p(n + 1, i) - base.p(n, i)) / grid.dt;
      const double one_minus_f = 1.0 - f(mid);
      if (!(one_minus_f > margin_min))
        fail(ErrorKind::NonDegeneracyViolated,
             "1 - f(p) = " + io::format_double(one_minus_f) + " along the base state");
      const double lead = one_minus_f / grid.dt;
      const double cross = 0.5 * fprime(mid) * d;
      const StencilRow row = neg_laplacian_row(i, grid, bc);
      lower[i] = 0.5 * w_new * row.lower;
      upper[i] = 0.5 * w_new * row.upper;
      diag[i] = lead - cross + 0.5 * w_new * row.diag;
      rhs[i] = (lead + cross) * out.z(n, i) + df(mid) * d - source0[i] - a_rhs_mem[i];
    }
    solve_tridiagonal(lower, diag, upper, rhs);
    std::copy(rhs.begin(), rhs.end(), out.z.row(n + 1).begin());
    for (std::size_t i = 0; i < nxs; ++i) mem_old[i] = history[i] + w_new * rhs[i];
  }
  detail::fill_time_derivative(out.z, out.zt, grid, {});
  return out;
}

/// One column of the discrete forward-operator derivative: trace of z for df = basis_j.
template <ScalarMap F, ScalarMap FPrime, ScalarMap Basis>
std::vector<double> jacobian_column(const PhysicalParams& params, const F& f_lin, const FPrime& fprime,
                                    const PressureField& base, const Basis& basis_j, const Grid& grid,
                                    const BoundaryCondition& bc, const ObservationKind& sigma) {
  const auto lin = solve_linearized(params, f_lin, fprime, base, basis_j, grid, bc);
  return observe_values(lin.z, sigma, grid);
}

}  // namespace nlacoustic
