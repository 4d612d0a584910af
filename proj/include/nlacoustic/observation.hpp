#pragma once

#include <string>
#include <vector>

#include "nlacoustic/core.hpp"
#include "nlacoustic/error.hpp"

namespace nlacoustic {

/// Where data is taken: the history at one point x0, or the snapshot at t = T on omega.
struct ObservationKind {
  enum class Type { TimeTrace, FinalTime };
  Type type = Type::TimeTrace;
  double x0 = 1.0;
  double omega_lo = 0.0;
  double omega_hi = 1.0;

  static ObservationKind time_trace(double x0) { return {Type::TimeTrace, x0, 0.0, 0.0}; }
  static ObservationKind final_time(double lo, double hi) { return {Type::FinalTime, 0.0, lo, hi}; }
  bool is_time_trace() const { return type == Type::TimeTrace; }

  void check(const Grid& grid) const {
    const double tol = 1e-12 * (grid.x_hi - grid.x_lo);
    if (is_time_trace()) {
      require(x0 >= grid.x_lo - tol && x0 <= grid.x_hi + tol, ErrorKind::OutOfDomain,
              "observation point x0 outside the spatial domain");
    } else {
      require(omega_lo <= omega_hi, ErrorKind::InvalidInterval, "observation window is reversed");
      require(omega_lo >= grid.x_lo - tol && omega_hi <= grid.x_hi + tol, ErrorKind::OutOfDomain,
              "observation window outside the spatial domain");
    }
  }
};

/// Node indices of the final-time window.
inline std::vector<std::size_t> window_nodes(const ObservationKind& kind, const Grid& grid) {
  std::vector<std::size_t> idx;
  const double tol = 1e-12 * (grid.x_hi - grid.x_lo);
  for (std::size_t i = 0; i < grid.n_space(); ++i)
    if (grid.x_nodes[i] >= kind.omega_lo - tol && grid.x_nodes[i] <= kind.omega_hi + tol) idx.push_back(i);
  require(!idx.empty(), ErrorKind::OutOfDomain, "observation window contains no grid nodes");
  return idx;
}

inline std::vector<double> observation_abscissae(const ObservationKind& kind, const Grid& grid) {
  kind.check(grid);
  if (kind.is_time_trace()) return grid.t_nodes;
  std::vector<double> out;
  for (std::size_t i : window_nodes(kind, grid)) out.push_back(grid.x_nodes[i]);
  return out;
}

/// Trace of a space-time array on the observation manifold (linear in x for time traces).
inline std::vector<double> observe_values(const Field2D& v, const ObservationKind& kind, const Grid& grid) {
  kind.check(grid);
  require(v.rows == grid.n_time() && v.cols == grid.n_space(), ErrorKind::ShapeMismatch,
          "observe: field shape does not match grid");
  std::vector<double> out;
  if (kind.is_time_trace()) {
    out.reserve(v.rows);
    for (std::size_t n = 0; n < v.rows; ++n) out.push_back(interp_clamped(grid.x_nodes, v.row(n), kind.x0));
  } else {
    const auto last = v.row(v.rows - 1);
    for (std::size_t i : window_nodes(kind, grid)) out.push_back(last[i]);
  }
  return out;
}

}  // namespace nlacoustic
