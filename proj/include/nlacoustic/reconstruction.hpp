#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "nlacoustic/core.hpp"
#include "nlacoustic/data_pipeline.hpp"
#include "nlacoustic/error.hpp"
#include "nlacoustic/forward_solver.hpp"
#include "nlacoustic/io.hpp"
#include "nlacoustic/linearized_solver.hpp"
#include "nlacoustic/nonlinearity.hpp"
#include "nlacoustic/observation.hpp"

namespace nlacoustic {

/// Everything the forward map needs besides f.
struct ForwardSetup {
  PhysicalParams params;
  Grid grid;
  BoundaryCondition bc;
  SolverOptions solver;

  template <ScalarMap F>
  std::pair<PressureField, SolveReport> solve(const F& f) const {
    return nlacoustic::solve(params, f, grid, bc, solver);
  }
};

struct IterationHistory {
  std::vector<Nonlinearity> iterates;
  std::vector<double> F2;
  std::vector<double> Finf;
  std::vector<double> residuals;
  std::string scheme;
  std::vector<std::string> notes;
};

struct PicardBounds {
  double P_lo = -std::numeric_limits<double>::infinity();
  double P_hi = std::numeric_limits<double>::infinity();
  double Q_lo = -std::numeric_limits<double>::infinity();
  double Q_hi = std::numeric_limits<double>::infinity();
  double gamma_lower = 1e-3;

  void validate() const {
    require(P_lo <= P_hi, ErrorKind::InvalidInterval, "PicardBounds: P_lo > P_hi");
    require(Q_lo <= Q_hi, ErrorKind::InvalidInterval, "PicardBounds: Q_lo > Q_hi");
    require(gamma_lower > 0.0, ErrorKind::InvalidConfig, "PicardBounds: gamma_lower must be > 0");
  }
};

/// Sort (u_i, v_i) by u, average values whose arguments agree to 1e-12, project
/// onto the admissible set. With pin_origin the sample (0, 0) joins the data.
inline Nonlinearity compose_update(std::span<const double> args, std::span<const double> vals,
                                   const AdmissibleSetParams& admissible) {
  require(args.size() == vals.size(), ErrorKind::ShapeMismatch, "compose_update: length mismatch");
  require(!args.empty(), ErrorKind::EmptyInput, "compose_update: no samples");
  std::vector<double> a(args.begin(), args.end()), w(vals.begin(), vals.end());
  if (admissible.pin_origin) {
    a.push_back(0.0);
    w.push_back(0.0);
  }
  std::vector<std::size_t> order(a.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x] < a[y]; });
  std::vector<double> u, v;
  std::size_t i = 0;
  while (i < order.size()) {
    const double head = a[order[i]];
    double sum = 0.0;
    std::size_t count = 0;
    std::size_t j = i;
    bool origin = false;
    while (j < order.size() && a[order[j]] - head <= 1e-12) {
      sum += w[order[j]];
      origin = origin || a[order[j]] == 0.0;
      ++count;
      ++j;
    }
    // a cluster containing the pinned sample sits exactly at the origin
    u.push_back(admissible.pin_origin && origin ? 0.0 : head);
    v.push_back(sum / static_cast<double>(count));
    i = j;
  }
  require(u.size() >= 2, ErrorKind::DegenerateRange, "compose_update: all arguments coincide");
  return smooth_project(u, v, admissible);
}

struct PicardStep {
  Nonlinearity next;
  double residual = 0.0;
};

/// Data values of the trace on the solver's observation abscissae.
inline std::vector<double> data_on_grid(const ObservationTrace& data, const Grid& grid) {
  const auto abscissae = observation_abscissae(data.kind, grid);
  std::vector<double> out(abscissae.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = interp_clamped(data.abscissae, data.values, abscissae[i]);
  return out;
}

inline std::vector<double> data_derivative_on_grid(const ObservationTrace& data, const Grid& grid) {
  if (!data.has_derivative()) fail(ErrorKind::DerivativeUnavailable, "time-trace data needs h'");
  std::vector<double> out(grid.n_time());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = evaluate_trace(data, grid.t_nodes[n]).second;
  return out;
}

inline double misfit(std::span<const double> abscissae, std::span<const double> a, std::span<const double> b) {
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  return abscissae.size() >= 2 ? norms(abscissae, diff).l2 : std::abs(diff.front());
}

/// One projected fixed-point step from point data h(t) = p(x0, t):
///   f_{k+1}(h(t_i)) = 1 - (P[p_t(x0, t_i; f_k)] / h'(t_i)) (1 - f_k(p(x0, t_i; f_k))).
inline PicardStep picard_step_time_trace(const Nonlinearity& fk, const ObservationTrace& data, const ForwardSetup& setup,
                                         const PicardBounds& bounds, const AdmissibleSetParams& admissible) {
  bounds.validate();
  require(data.kind.is_time_trace(), ErrorKind::InvalidConfig, "picard_step_time_trace: data is not a time trace");
  const auto h = data_on_grid(data, setup.grid);
  const auto dh = data_derivative_on_grid(data, setup.grid);
  for (std::size_t n = 0; n < dh.size(); ++n)
    if (std::abs(dh[n]) < bounds.gamma_lower)
      fail(ErrorKind::DerivativeTooSmall, "|h'(" + io::format_double(setup.grid.t_nodes[n]) + ")| = " +
                                              io::format_double(std::abs(dh[n])) + " < gamma");
  const auto [field, report] = setup.solve(fk);
  const auto u = observe_values(field.p, data.kind, setup.grid);
  const auto w = observe_values(field.pt, data.kind, setup.grid);
  std::vector<double> v(u.size());
  for (std::size_t n = 0; n < u.size(); ++n)
    v[n] = 1.0 - (clamp(w[n], bounds.P_lo, bounds.P_hi) / dh[n]) * (1.0 - fk(u[n]));
  return {compose_update(h, v, admissible), misfit(setup.grid.t_nodes, u, h)};
}

/// One projected fixed-point step from snapshot data g(x) = p(x, T):
///   f_{k+1}(g(x_i)) = f_k(p(x_i, T; f_k)) + Q[1 / p_t(x_i, T; f_k)] b A(g - p(., T; f_k))(x_i).
/// At Dirichlet nodes p and g vanish and the operator row carries no information, so v = f_k(u) there.
inline PicardStep picard_step_final_time(const Nonlinearity& fk, const ObservationTrace& data, const ForwardSetup& setup,
                                         const PicardBounds& bounds, const AdmissibleSetParams& admissible) {
  bounds.validate();
  require(!data.kind.is_time_trace(), ErrorKind::InvalidConfig, "picard_step_final_time: data is not final-time");
  const Grid& grid = setup.grid;
  const auto [field, report] = setup.solve(fk);
  const auto last = field.p.row(grid.n_time() - 1);
  const auto last_t = field.pt.row(grid.n_time() - 1);
  std::vector<double> diff(grid.n_space());
  // on Dirichlet nodes g is the known boundary value, so a measured value there is pure noise
  for (std::size_t i = 0; i < grid.n_space(); ++i)
    diff[i] = detail::is_dirichlet_node(i, grid, setup.bc)
                  ? 0.0
                  : interp_clamped(data.abscissae, data.values, grid.x_nodes[i]) - last[i];
  const auto adiff = apply_neg_laplacian(diff, grid, setup.bc);

  std::vector<double> args, vals, xs, sim, obs;
  for (std::size_t i : window_nodes(data.kind, grid)) {
    const double g = interp_clamped(data.abscissae, data.values, grid.x_nodes[i]);
    xs.push_back(grid.x_nodes[i]);
    sim.push_back(last[i]);
    obs.push_back(g);
    args.push_back(g);
    if (detail::is_dirichlet_node(i, grid, setup.bc)) {
      vals.push_back(fk(last[i]));
      continue;
    }
    const double inv = last_t[i] != 0.0 ? 1.0 / last_t[i] : std::numeric_limits<double>::infinity();
    const double q = clamp(inv, bounds.Q_lo, bounds.Q_hi);
    vals.push_back(fk(last[i]) + q * setup.params.b * adiff[i]);
  }
  return {compose_update(args, vals, admissible), misfit(xs, sim, obs)};
}

/// Clamp intervals bracketing the f0 solve, widened by half their magnitude on each side.
inline PicardBounds default_picard_bounds(const Nonlinearity& f0, const ObservationKind& kind, const ForwardSetup& setup,
                                          double gamma_lower) {
  const auto [field, report] = setup.solve(f0);
  PicardBounds b;
  b.gamma_lower = gamma_lower;
  auto widen = [](double lo, double hi, double& out_lo, double& out_hi) {
    const double pad = 0.5 * std::max(std::abs(lo), std::abs(hi));
    out_lo = lo - pad;
    out_hi = hi + pad;
  };
  if (kind.is_time_trace()) {
    const auto w = observe_values(field.pt, kind, setup.grid);
    const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
    widen(*lo, *hi, b.P_lo, b.P_hi);
  } else {
    const auto last_t = field.pt.row(setup.grid.n_time() - 1);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i : window_nodes(kind, setup.grid)) {
      if (detail::is_dirichlet_node(i, setup.grid, setup.bc) || last_t[i] == 0.0) continue;
      lo = std::min(lo, 1.0 / last_t[i]);
      hi = std::max(hi, 1.0 / last_t[i]);
    }
    require(lo <= hi, ErrorKind::DegenerateRange, "default_picard_bounds: p_t(., T) vanishes on the window");
    widen(lo, hi, b.Q_lo, b.Q_hi);
  }
  return b;
}

/// Anderson mixing with depth m on flattened iterates.
struct AndersonState {
  int depth = 3;
  std::vector<double> beta{1.0};  // beta_k; the last entry repeats
  bool nonnegative = false;
  std::deque<std::vector<double>> x_history;
  std::deque<std::vector<double>> gx_history;
  std::vector<double> last_weights;
  int steps = 0;
  int fallbacks = 0;

  double beta_at(int k) const {
    if (beta.empty()) return 1.0;
    return beta[static_cast<std::size_t>(std::min<int>(k, static_cast<int>(beta.size()) - 1))];
  }
};

namespace detail {

/// Bordered normal equations [W'W 1; 1' 0][a; mu] = [0; 1]; empty result if singular.
inline std::optional<Eigen::VectorXd> affine_weights(const Eigen::MatrixXd& W) {
  const Eigen::Index k = W.cols();
  Eigen::MatrixXd border = Eigen::MatrixXd::Zero(k + 1, k + 1);
  border.topLeftCorner(k, k) = W.transpose() * W;
  border.block(0, k, k, 1).setOnes();
  border.block(k, 0, 1, k).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
  rhs[k] = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(border);
  lu.setThreshold(1e-14);
  if (!lu.isInvertible()) return std::nullopt;
  Eigen::VectorXd sol = lu.solve(rhs);
  if (!sol.allFinite() || !(border * sol).isApprox(rhs, 1e-8)) return std::nullopt;
  return Eigen::VectorXd(sol.head(k));
}

/// Smallest combination over the simplex by enumerating supports (depth is small).
inline std::optional<Eigen::VectorXd> simplex_weights(const Eigen::MatrixXd& W) {
  const Eigen::Index k = W.cols();
  std::optional<Eigen::VectorXd> best;
  double best_value = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << k); ++mask) {
    std::vector<Eigen::Index> cols;
    for (Eigen::Index j = 0; j < k; ++j)
      if (mask & (1u << j)) cols.push_back(j);
    Eigen::MatrixXd sub(W.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = W.col(cols[c]);
    const auto a = affine_weights(sub);
    if (!a || (a->array() < -1e-14).any()) continue;
    Eigen::VectorXd full = Eigen::VectorXd::Zero(k);
    for (std::size_t c = 0; c < cols.size(); ++c) full[cols[c]] = std::max(0.0, (*a)[static_cast<Eigen::Index>(c)]);
    full /= full.sum();
    const double value = (W * full).squaredNorm();
    if (value < best_value) {
      best_value = value;
      best = full;
    }
  }
  return best;
}

}  // namespace detail

/// x_{k+1} = sum_j a_j ((1 - beta_k) x_j + beta_k g(x_j)), with affine weights a
/// minimising |sum_j a_j (g(x_j) - x_j)| over the last min(k, m) + 1 pairs.
/// A singular weight system falls back to the plain damped step (counted in fallbacks).
inline std::vector<double> anderson_step(AndersonState& state, const std::vector<double>& x_k,
                                         const std::vector<double>& gx_k) {
  require(x_k.size() == gx_k.size(), ErrorKind::ShapeMismatch, "anderson_step: length mismatch");
  require(state.depth >= 0, ErrorKind::InvalidConfig, "anderson_step: depth must be >= 0");
  if (!state.x_history.empty())
    require(state.x_history.front().size() == x_k.size(), ErrorKind::ShapeMismatch,
            "anderson_step: iterate length changed");
  state.x_history.push_back(x_k);
  state.gx_history.push_back(gx_k);
  while (state.x_history.size() > static_cast<std::size_t>(state.depth) + 1) {
    state.x_history.pop_front();
    state.gx_history.pop_front();
  }
  const auto cols = static_cast<Eigen::Index>(state.x_history.size());
  const auto rows = static_cast<Eigen::Index>(x_k.size());
  Eigen::VectorXd a = Eigen::VectorXd::Zero(cols);
  a[cols - 1] = 1.0;
  if (cols > 1) {
    Eigen::MatrixXd W(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i)
        W(i, j) = state.gx_history[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] -
                  state.x_history[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    const auto solved = state.nonnegative ? detail::simplex_weights(W) : detail::affine_weights(W);
    if (solved)
      a = *solved;
    else
      ++state.fallbacks;
  }
  const double beta = state.beta_at(state.steps);
  std::vector<double> next(x_k.size(), 0.0);
  for (Eigen::Index j = 0; j < cols; ++j) {
    const auto& xj = state.x_history[static_cast<std::size_t>(j)];
    const auto& gj = state.gx_history[static_cast<std::size_t>(j)];
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += a[j] * ((1.0 - beta) * xj[i] + beta * gj[i]);
  }
  state.last_weights.assign(a.data(), a.data() + a.size());
  ++state.steps;
  return next;
}

/// log10 relative errors on a uniform sample of the window. A zero difference
/// reports the floor -16; an identically zero iterate reports +inf.
template <ScalarMap F>
std::pair<std::vector<double>, std::vector<double>> error_history(const std::vector<Nonlinearity>& iterates,
                                                                  const F& f_act, double window_lo, double window_hi,
                                                                  std::size_t samples = 2001) {
  if (!(window_hi > window_lo)) fail(ErrorKind::EmptyWindow, "error_history: empty evaluation window");
  const auto s = linspace(window_lo, window_hi, samples);
  std::vector<double> f2, finf;
  for (const auto& fn : iterates) {
    const double slack = 1e-9 * std::max(1.0, window_hi - window_lo);
    require(fn.nodes().front() <= window_lo + slack && fn.nodes().back() >= window_hi - slack, ErrorKind::OutOfDomain,
            "error_history: window exceeds the argument range of an iterate");
    std::vector<double> diff(s.size()), val(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      val[i] = fn(s[i]);
      diff[i] = val[i] - f_act(s[i]);
    }
    const Norms nd = norms(s, diff);
    const Norms nv = norms(s, val);
    auto rel = [](double num, double den) {
      if (den == 0.0) return std::numeric_limits<double>::infinity();
      if (num == 0.0) return -16.0;
      return std::max(-16.0, std::log10(num / den));
    };
    f2.push_back(rel(nd.l2, nv.l2));
    finf.push_back(rel(nd.linf, nv.linf));
  }
  return {std::move(f2), std::move(finf)};
}

/// Uniform grid over the data values, the common argument axis of all iterates.
inline std::vector<double> data_value_grid(const ObservationTrace& data, const Grid& grid, std::size_t count = 0) {
  const auto values = data_on_grid(data, grid);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  require(*hi > *lo, ErrorKind::DegenerateRange, "data values span nothing");
  return linspace(*lo, *hi, count ? count : values.size());
}

struct PicardConfig {
  int n_iters = 4;
  std::optional<AndersonState> anderson;
  std::optional<PicardBounds> bounds;  // default_picard_bounds when empty
  double gamma_lower = 1e-3;
  AdmissibleSetParams admissible;
};

inline double data_residual(const Nonlinearity& f, const ObservationTrace& data, const ForwardSetup& setup) {
  const auto [field, report] = setup.solve(f);
  const auto sim = observe_values(field.p, data.kind, setup.grid);
  return misfit(observation_abscissae(data.kind, setup.grid), sim, data_on_grid(data, setup.grid));
}

/// f_0 = 0 followed by n_iters projected Picard steps, optionally Anderson-mixed
/// on the data-value grid (re-projected after mixing).
inline IterationHistory run_picard(const ObservationTrace& data, const ForwardSetup& setup, PicardConfig cfg) {
  require(cfg.n_iters >= 0, ErrorKind::InvalidConfig, "run_picard: n_iters must be >= 0");
  const bool trace = data.kind.is_time_trace();
  if (!trace && setup.params.alpha < 1.0)
    fail(ErrorKind::InvalidConfig, "final-time Picard is not available for fractional damping");
  IterationHistory hist;
  hist.scheme = std::string(trace ? "picard_time_trace" : "picard_final_time") + (cfg.anderson ? "+anderson" : "");
  auto ugrid = data_value_grid(data, setup.grid);
  if (cfg.admissible.pin_origin) ugrid = with_origin(std::move(ugrid));
  hist.iterates.push_back(Nonlinearity::zero(ugrid));
  const PicardBounds bounds =
      cfg.bounds ? *cfg.bounds : default_picard_bounds(hist.iterates.front(), data.kind, setup, cfg.gamma_lower);

  for (int k = 0; k < cfg.n_iters; ++k) {
    const Nonlinearity& fk = hist.iterates.back();
    PicardStep step = trace ? picard_step_time_trace(fk, data, setup, bounds, cfg.admissible)
                            : picard_step_final_time(fk, data, setup, bounds, cfg.admissible);
    hist.residuals.push_back(step.residual);
    if (!cfg.anderson) {
      hist.iterates.push_back(std::move(step.next));
      continue;
    }
    const auto x = fk.resampled(ugrid);
    const auto gx = step.next.resampled(ugrid);
    const int before = cfg.anderson->fallbacks;
    auto mixed = anderson_step(*cfg.anderson, {x.values().begin(), x.values().end()},
                               {gx.values().begin(), gx.values().end()});
    if (cfg.anderson->fallbacks != before)
      hist.notes.push_back("iteration " + std::to_string(k + 1) + ": singular Anderson system, plain step taken");
    hist.iterates.push_back(smooth_project(ugrid, mixed, cfg.admissible));
  }
  hist.residuals.push_back(data_residual(hist.iterates.back(), data, setup));
  return hist;
}

struct NewtonConfig {
  int n_iters = 4;
  SineBasis basis;             // span_max <= 0 selects the data range extent
  double lambda = -1.0;        // < 0 selects 1e-8 |J|_F^2
  bool relinearize = false;    // plain Newton: Jacobian at every f_k
  int threads = 0;             // 0: NLACOUSTIC_THREADS or hardware concurrency
  AdmissibleSetParams admissible;
};

inline int worker_count(int requested, int jobs) {
  int n = requested;
  if (n <= 0) {
    n = static_cast<int>(std::thread::hardware_concurrency());
    if (const char* env = std::getenv("NLACOUSTIC_THREADS")) {
      const int cap = std::atoi(env);
      if (cap > 0) n = std::min(std::max(n, 1), cap);
    }
  }
  return std::clamp(n, 1, std::max(jobs, 1));
}

/// Columns trace(z_j) for df = phi_j, evaluated concurrently against one base solve.
template <ScalarMap F, ScalarMap FPrime>
Eigen::MatrixXd assemble_jacobian(const ForwardSetup& setup, const F& f_lin, const FPrime& fprime,
                                  const PressureField& base, const SineBasis& basis, const ObservationKind& sigma,
                                  int threads) {
  const auto rows = static_cast<Eigen::Index>(observation_abscissae(sigma, setup.grid).size());
  Eigen::MatrixXd J(rows, basis.n_basis);
  const int workers = worker_count(threads, basis.n_basis);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int j = w; j < basis.n_basis; j += workers) {
          auto phi = [&basis, j](double u) { return basis.phi(j + 1, u); };
          const auto col = jacobian_column(setup.params, f_lin, fprime, base, phi, setup.grid, setup.bc, sigma);
          for (Eigen::Index i = 0; i < rows; ++i) J(i, j) = col[static_cast<std::size_t>(i)];
        }
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return J;
}

/// (J'J + lambda I) dc = J' r; lambda = 0 demands full column rank.
inline Eigen::VectorXd regularized_step(const Eigen::MatrixXd& J, const Eigen::VectorXd& r, double lambda) {
  if (lambda == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(J);
    if (qr.rank() < J.cols())
      fail(ErrorKind::SingularNormalEquations, "Jacobian is rank deficient; use lambda > 0");
  }
  Eigen::MatrixXd normal = J.transpose() * J;
  normal.diagonal().array() += lambda;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all())
    fail(ErrorKind::SingularNormalEquations, "normal equations are singular; use lambda > 0");
  return ldlt.solve(J.transpose() * r);
}

struct NewtonDiagnostics {
  std::vector<Eigen::VectorXd> coefficients;
  std::vector<Eigen::VectorXd> updates;
  double lambda = 0.0;
};

/// Frozen Newton (Jacobian once at f0 = 0) or plain Newton (Jacobian at each f_k)
/// in sine-coefficient space; every iterate is projected onto the admissible set.
inline IterationHistory frozen_newton(const ObservationTrace& data, const ForwardSetup& setup, NewtonConfig cfg,
                                      NewtonDiagnostics* diag = nullptr) {
  require(cfg.n_iters >= 0, ErrorKind::InvalidConfig, "frozen_newton: n_iters must be >= 0");
  require(cfg.basis.n_basis >= 1, ErrorKind::InvalidConfig, "frozen_newton: n_basis must be >= 1");
  IterationHistory hist;
  hist.scheme = cfg.relinearize ? "newton" : "frozen_newton";
  const auto ugrid = data_value_grid(data, setup.grid);
  if (cfg.basis.span_max <= 0.0) cfg.basis.span_max = std::max(std::abs(ugrid.front()), std::abs(ugrid.back()));
  const auto y_data = data_on_grid(data, setup.grid);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(y_data.data(), static_cast<Eigen::Index>(y_data.size()));

  Eigen::VectorXd c = Eigen::VectorXd::Zero(cfg.basis.n_basis);
  const SineExpansion f0{std::vector<double>(c.data(), c.data() + c.size()), cfg.basis};
  hist.iterates.push_back(sine_expand(std::vector<double>(c.data(), c.data() + c.size()), cfg.basis, ugrid));

  auto [base0, report0] = setup.solve(f0);
  Eigen::MatrixXd J = assemble_jacobian(setup, f0, f0.derivative_map(), base0, cfg.basis, data.kind, cfg.threads);
  const double lambda = cfg.lambda >= 0.0 ? cfg.lambda : 1e-8 * J.squaredNorm();
  if (diag) {
    diag->lambda = lambda;
    diag->coefficients.push_back(c);
  }

  PressureField current = std::move(base0);
  for (int k = 0; k < cfg.n_iters; ++k) {
    const auto sim = observe_values(current.p, data.kind, setup.grid);
    const Eigen::VectorXd r =
        y - Eigen::Map<const Eigen::VectorXd>(sim.data(), static_cast<Eigen::Index>(sim.size()));
    hist.residuals.push_back(misfit(observation_abscissae(data.kind, setup.grid), sim, y_data));
    if (cfg.relinearize && k > 0) {
      const Nonlinearity& fk = hist.iterates.back();
      J = assemble_jacobian(setup, fk, fk.derivative_map(), current, cfg.basis, data.kind, cfg.threads);
    }
    const Eigen::VectorXd dc = regularized_step(J, r, lambda);
    c += dc;
    if (diag) {
      diag->updates.push_back(dc);
      diag->coefficients.push_back(c);
    }
    const auto raw = sine_expand(std::vector<double>(c.data(), c.data() + c.size()), cfg.basis, ugrid);
    hist.iterates.push_back(smooth_project(raw, cfg.admissible));
    current = setup.solve(hist.iterates.back()).first;
  }
  const auto sim = observe_values(current.p, data.kind, setup.grid);
  hist.residuals.push_back(misfit(observation_abscissae(data.kind, setup.grid), sim, y_data));
  return hist;
}

struct ExplicitReconstruction {
  Nonlinearity df;
  std::vector<double> excluded_t;  // data times dropped because |eta'| < gamma
};

/// df(eta(t_i)) = h'(t_i) / eta'(t_i) from the trace h of the linearised state
/// around p = eta(t) (spatial profile 1); h' is the backward difference on the data clock.
template <ScalarMap Eta, ScalarMap DEta>
ExplicitReconstruction explicit_linearized_reconstruction(const ObservationTrace& h, const Eta& eta, const DEta& deta,
                                                          double t_lo, double t_hi, double gamma) {
  require(h.size() >= 2 && h.abscissae.size() == h.size(), ErrorKind::TooFewSamples,
          "explicit reconstruction: trace too short");
  require(t_hi > t_lo, ErrorKind::EmptyWindow, "explicit reconstruction: empty window");
  std::vector<std::size_t> idx;
  for (std::size_t i = 1; i < h.size(); ++i)
    if (h.abscissae[i] >= t_lo - 1e-12 && h.abscissae[i] <= t_hi + 1e-12) idx.push_back(i);
  require(idx.size() >= 2, ErrorKind::EmptyWindow, "explicit reconstruction: fewer than two data times in window");
  int direction = 0;
  for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
    const double step = eta(h.abscissae[idx[k + 1]]) - eta(h.abscissae[idx[k]]);
    const int sgn = (step > 0.0) - (step < 0.0);
    if (sgn == 0 || (direction != 0 && sgn != direction))
      fail(ErrorKind::NonMonotoneEta, "eta is not strictly monotone on the window");
    direction = sgn;
  }
  ExplicitReconstruction out;
  std::vector<double> s, v;
  for (std::size_t i : idx) {
    const double t = h.abscissae[i];
    const double slope = deta(t);
    if (std::abs(slope) < gamma) {
      out.excluded_t.push_back(t);
      continue;
    }
    const double dh = (h.values[i] - h.values[i - 1]) / (h.abscissae[i] - h.abscissae[i - 1]);
    s.push_back(eta(t));
    v.push_back(dh / slope);
  }
  require(s.size() >= 2, ErrorKind::DerivativeTooSmall, "explicit reconstruction: eta' below gamma on the window");
  if (direction < 0) {
    std::reverse(s.begin(), s.end());
    std::reverse(v.begin(), v.end());
  }
  out.df = Nonlinearity(std::move(s), std::move(v));
  return out;
}

/// History as CSV text: '#' metadata lines, then k,F2,Finf,residual.
inline std::string history_csv(const IterationHistory& hist) {
  std::ostringstream out;
  out << "# scheme=" << hist.scheme << '\n';
  for (const auto& note : hist.notes) out << "# " << note << '\n';
  out << "k,F2,Finf,residual\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < hist.iterates.size(); ++k) {
    out << k << ',' << io::format_double(k < hist.F2.size() ? hist.F2[k] : nan) << ','
        << io::format_double(k < hist.Finf.size() ? hist.Finf[k] : nan) << ','
        << io::format_double(k < hist.residuals.size() ? hist.residuals[k] : nan) << '\n';
  }
  return out.str();
}

inline void write_history_csv(const IterationHistory& hist, const std::filesystem::path& path) {
  io::open_for_write(path) << history_csv(hist);
}

inline void write_iterates(const IterationHistory& hist, const std::filesystem::path& dir) {
  for (std::size_t k = 0; k < hist.iterates.size(); ++k)
    write_csv(hist.iterates[k], dir / ("iterate_" + std::to_string(k) + ".csv"));
}

}  // namespace nlacoustic
