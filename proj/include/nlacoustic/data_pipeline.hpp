#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nlacoustic/core.hpp"
#include "nlacoustic/error.hpp"
#include "nlacoustic/forward_solver.hpp"
#include "nlacoustic/io.hpp"
#include "nlacoustic/observation.hpp"
#include "nlacoustic/qp.hpp"

namespace nlacoustic {

struct ObservationTrace {
  ObservationKind kind;
  std::vector<double> abscissae;
  std::vector<double> values;
  std::vector<double> derivative;  // empty until smoothed (or taken from p_t)
  double noise_level = 0.0;
  std::uint64_t seed = 0;

  bool has_derivative() const { return !derivative.empty(); }
  std::size_t size() const { return values.size(); }
};

struct SmootherConfig {
  int n_basis = 8;
  int target_resolution = 400;
  double gamma_lower = 1e-3;
  int derivative_sign = 0;  // +1, -1, or 0 for automatic detection
  int poly_degree = 2;      // Chebyshev T_0..T_d lead the dictionary, d in {1, 2}
  bool quarter_wave = false;  // sin((k - 1/2) pi s) instead of sin(k pi s)

  void validate() const {
    require(poly_degree == 1 || poly_degree == 2, ErrorKind::InvalidConfig, "smoother poly_degree must be 1 or 2");
    require(gamma_lower > 0.0, ErrorKind::InvalidConfig, "smoother gamma_lower must be > 0");
    require(target_resolution >= 2, ErrorKind::InvalidConfig, "smoother target_resolution must be >= 2");
    require(derivative_sign >= -1 && derivative_sign <= 1, ErrorKind::InvalidConfig,
            "derivative_sign must be +1, -1 or auto");
  }
};

/// Samples p on the observation manifold. Time traces also carry p_t(x0, .),
/// the scheme-consistent derivative, which makes them usable as exact data.
inline ObservationTrace observe(const PressureField& field, const ObservationKind& kind, const Grid& grid) {
  ObservationTrace out;
  out.kind = kind;
  out.abscissae = observation_abscissae(kind, grid);
  out.values = observe_values(field.p, kind, grid);
  if (kind.is_time_trace() && !field.pt.data.empty()) out.derivative = observe_values(field.pt, kind, grid);
  return out;
}

/// Uniform draw on [0, 1) from the top 53 bits; independent of the
/// standard library's distribution implementation.
inline double unit_uniform(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

inline ObservationTrace subsample_and_noise(const ObservationTrace& trace, int n_samples, double delta,
                                            std::uint64_t seed) {
  require(n_samples >= 2, ErrorKind::TooFewSamples, "subsample_and_noise: n_samples must be >= 2");
  require(delta >= 0.0, ErrorKind::InvalidConfig, "subsample_and_noise: delta must be >= 0");
  require(trace.size() >= 2, ErrorKind::TooFewSamples, "subsample_and_noise: trace too short");
  ObservationTrace out;
  out.kind = trace.kind;
  out.noise_level = delta;
  out.seed = seed;
  out.abscissae = linspace(trace.abscissae.front(), trace.abscissae.back(), static_cast<std::size_t>(n_samples));
  double amplitude = 0.0;
  for (double v : trace.values) amplitude = std::max(amplitude, std::abs(v));
  std::mt19937_64 gen(seed);
  out.values.reserve(out.abscissae.size());
  for (double s : out.abscissae) {
    const double exact = interp_clamped(trace.abscissae, trace.values, s);
    out.values.push_back(exact + delta * amplitude * (2.0 * unit_uniform(gen) - 1.0));
  }
  return out;
}

namespace detail {

/// Smoother dictionary at xi in [-1, 1]: Chebyshev T_0..T_d followed by
/// sin(w_k (xi + 1) / 2) with w_k = k pi, or (k - 1/2) pi for quarter waves;
/// derivatives are taken in xi.
inline void smoother_basis(double xi, int n, int poly_degree, bool quarter_wave, std::vector<double>& phi,
                           std::vector<double>& dphi) {
  phi.assign(static_cast<std::size_t>(n), 0.0);
  dphi.assign(static_cast<std::size_t>(n), 0.0);
  const double poly[3] = {1.0, xi, 2.0 * xi * xi - 1.0};
  const double dpoly[3] = {0.0, 1.0, 4.0 * xi};
  const int n_poly = std::min(n, poly_degree + 1);
  for (int k = 0; k < n_poly; ++k) {
    phi[static_cast<std::size_t>(k)] = poly[k];
    dphi[static_cast<std::size_t>(k)] = dpoly[k];
  }
  const double s = 0.5 * (xi + 1.0);
  for (int k = 1; k <= n - n_poly; ++k) {
    const double w = (quarter_wave ? k - 0.5 : k) * std::numbers::pi;
    phi[static_cast<std::size_t>(n_poly + k - 1)] = std::sin(w * s);
    dphi[static_cast<std::size_t>(n_poly + k - 1)] = 0.5 * w * std::cos(w * s);
  }
}

inline int majority_slope_sign(const std::vector<double>& v) {
  int up = 0, down = 0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    if (v[i + 1] > v[i]) ++up;
    if (v[i + 1] < v[i]) ++down;
  }
  return up >= down ? 1 : -1;
}

}  // namespace detail

/// Least-squares fit in the polynomial-plus-sine dictionary subject to s b' >= gamma/2 on a
/// constraint grid (4x the sample density plus the output grid), sampled on
/// target_resolution points together with its analytic derivative.
inline ObservationTrace smooth_upsample(const ObservationTrace& noisy, const SmootherConfig& cfg) {
  cfg.validate();
  const int nb = cfg.n_basis;
  if (nb < 2)
    fail(ErrorKind::InfeasibleSlopeConstraint, "smooth_upsample: a constant fit cannot satisfy the slope bound");
  require(noisy.size() >= static_cast<std::size_t>(nb) + 1, ErrorKind::TooFewSamples,
          "smooth_upsample: need at least n_basis + 1 samples");
  require(noisy.abscissae.size() == noisy.values.size(), ErrorKind::ShapeMismatch,
          "smooth_upsample: abscissae/values length");
  const double a = noisy.abscissae.front();
  const double b = noisy.abscissae.back();
  require(b > a, ErrorKind::DegenerateRange, "smooth_upsample: abscissae span nothing");
  const double jac = 2.0 / (b - a);
  auto to_ref = [&](double s) { return std::clamp(jac * (s - a) - 1.0, -1.0, 1.0); };
  const int sign = cfg.derivative_sign != 0 ? cfg.derivative_sign : detail::majority_slope_sign(noisy.values);

  const auto m = static_cast<Eigen::Index>(noisy.size());
  Eigen::MatrixXd B(m, nb);
  Eigen::VectorXd d(m);
  std::vector<double> t, dt;
  for (Eigen::Index i = 0; i < m; ++i) {
    detail::smoother_basis(to_ref(noisy.abscissae[static_cast<std::size_t>(i)]), nb, cfg.poly_degree, cfg.quarter_wave, t, dt);
    for (int k = 0; k < nb; ++k) B(i, k) = t[static_cast<std::size_t>(k)];
    d[i] = noisy.values[static_cast<std::size_t>(i)];
  }

  const auto out_grid = linspace(a, b, static_cast<std::size_t>(cfg.target_resolution));
  std::vector<double> cgrid = linspace(a, b, 4 * noisy.size());
  cgrid.insert(cgrid.end(), out_grid.begin(), out_grid.end());
  std::sort(cgrid.begin(), cgrid.end());
  cgrid.erase(std::unique(cgrid.begin(), cgrid.end()), cgrid.end());
  Eigen::MatrixXd G(static_cast<Eigen::Index>(cgrid.size()), nb);
  for (std::size_t r = 0; r < cgrid.size(); ++r) {
    detail::smoother_basis(to_ref(cgrid[r]), nb, cfg.poly_degree, cfg.quarter_wave, t, dt);
    for (int k = 0; k < nb; ++k) G(static_cast<Eigen::Index>(r), k) = sign * jac * dt[static_cast<std::size_t>(k)];
  }
  const Eigen::VectorXd h = Eigen::VectorXd::Constant(G.rows(), 0.5 * cfg.gamma_lower);

  const Eigen::MatrixXd H = B.transpose() * B;
  const Eigen::VectorXd q = -B.transpose() * d;
  // strictly feasible start: a line of slope s * gamma through the data mean
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(nb);
  x0[0] = d.mean();
  x0[1] = sign * cfg.gamma_lower / jac;
  const QpResult qp = solve_inequality_qp(H, q, G, h, x0);

  ObservationTrace out;
  out.kind = noisy.kind;
  out.noise_level = noisy.noise_level;
  out.seed = noisy.seed;
  out.abscissae = out_grid;
  out.values.resize(out_grid.size());
  out.derivative.resize(out_grid.size());
  for (std::size_t i = 0; i < out_grid.size(); ++i) {
    detail::smoother_basis(to_ref(out_grid[i]), nb, cfg.poly_degree, cfg.quarter_wave, t, dt);
    double v = 0.0, dv = 0.0;
    for (int k = 0; k < nb; ++k) {
      v += qp.x[k] * t[static_cast<std::size_t>(k)];
      dv += qp.x[k] * jac * dt[static_cast<std::size_t>(k)];
    }
    out.values[i] = v;
    out.derivative[i] = dv;
  }
  return out;
}

/// Value and derivative at s, linear between abscissae, clamped outside.
inline std::pair<double, double> evaluate_trace(const ObservationTrace& trace, double s) {
  if (!trace.has_derivative()) fail(ErrorKind::DerivativeUnavailable, "evaluate_trace: trace has no derivative");
  return {interp_clamped(trace.abscissae, trace.values, s), interp_clamped(trace.abscissae, trace.derivative, s)};
}

inline std::string trace_metadata(const ObservationTrace& trace) {
  std::ostringstream os;
  if (trace.kind.is_time_trace())
    os << "kind=time_trace x0=" << io::format_double(trace.kind.x0);
  else
    os << "kind=final_time omega=" << io::format_double(trace.kind.omega_lo) << ':'
       << io::format_double(trace.kind.omega_hi);
  os << " noise_level=" << io::format_double(trace.noise_level) << " noise=uniform_relative_to_max seed="
     << trace.seed;
  return os.str();
}

inline void write_trace_csv(const ObservationTrace& trace, const std::filesystem::path& path) {
  auto out = io::open_for_write(path);
  out << '#' << trace_metadata(trace) << '\n';
  out << (trace.kind.is_time_trace() ? "t" : "x") << ",value" << (trace.has_derivative() ? ",derivative" : "")
      << '\n';
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out << io::format_double(trace.abscissae[i]) << ',' << io::format_double(trace.values[i]);
    if (trace.has_derivative()) out << ',' << io::format_double(trace.derivative[i]);
    out << '\n';
  }
}

inline ObservationTrace read_trace_csv(const std::filesystem::path& path) {
  const auto table = io::read_csv(path);
  require(table.header.size() >= 2, ErrorKind::Io, path.string() + ": expected abscissa,value columns");
  ObservationTrace trace;
  trace.abscissae = table.column(0);
  trace.values = table.column(1);
  if (table.header.size() >= 3) trace.derivative = table.column(2);
  trace.kind = table.header[0] == "x" ? ObservationKind::final_time(0.0, 0.0) : ObservationKind::time_trace(0.0);
  for (const auto& line : table.comments) {
    std::istringstream is(line);
    std::string token;
    while (is >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = token.substr(0, eq);
      const std::string val = token.substr(eq + 1);
      if (key == "x0") trace.kind.x0 = std::strtod(val.c_str(), nullptr);
      if (key == "noise_level") trace.noise_level = std::strtod(val.c_str(), nullptr);
      if (key == "seed") trace.seed = std::strtoull(val.c_str(), nullptr, 10);
      if (key == "omega") {
        const auto colon = val.find(':');
        trace.kind.omega_lo = std::strtod(val.substr(0, colon).c_str(), nullptr);
        trace.kind.omega_hi = std::strtod(val.substr(colon + 1).c_str(), nullptr);
      }
    }
  }
  return trace;
}

}  // namespace nlacoustic
