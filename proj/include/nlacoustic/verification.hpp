#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nlacoustic/experiment.hpp"
#include "nlacoustic/qp.hpp"

namespace nlacoustic::verify {

/// Acceptance thresholds; every check below reads its limits from here.
namespace limits {
inline constexpr double mms_min_order = 1.8;
inline constexpr double mms_seconds = 10.0;
inline constexpr double fd_ratio_target = 10.0;
inline constexpr double fd_ratio_rel_tol = 0.3;
inline constexpr double jacobian_column_rel_err = 1e-3;
inline constexpr double fd_seconds = 30.0;
inline constexpr double consistency_abs = 1e-6;
inline constexpr double consistency_seconds = 10.0;
inline constexpr double recovery_min_drop = 0.5;
inline constexpr double recovery_seconds = 120.0;
inline constexpr double anderson_affine_abs = 1e-10;
inline constexpr double anderson_seconds = 120.0;
inline constexpr double newton_first_step_abs = 1e-6;
inline constexpr double newton_seconds = 300.0;
inline constexpr double explicit_halving_target = 2.0;
inline constexpr double explicit_halving_rel_tol = 0.3;
inline constexpr double explicit_seconds = 10.0;
inline constexpr int projection_trials = 1000;
inline constexpr double projection_membership_tol = 1e-9;
inline constexpr double projection_idempotence_abs = 1e-12;
inline constexpr double projection_oracle_abs = 1e-6;
inline constexpr double projection_seconds = 30.0;
inline constexpr double fractional_min_order = 1.0;
inline constexpr double fractional_near_integer_rel = 5e-2;
inline constexpr double fractional_recovery_gap = 0.3;
inline constexpr double fractional_seconds = 180.0;
}  // namespace limits

struct Options {
  bool flip_memory_sign = false;  // mutation probe: corrupt the forward solver's memory term
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome(const Options&)> run;
};

struct Result {
  int id;
  std::string name;
  bool pass;
  std::string detail;
  double seconds;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

inline bool strictly_decreasing(const std::vector<double>& v, std::size_t first, std::size_t last) {
  for (std::size_t k = first; k < last; ++k)
    if (!(v[k + 1] < v[k])) return false;
  return true;
}

inline std::string f2_list(const std::vector<double>& f2, std::size_t first, std::size_t last) {
  std::string s;
  for (std::size_t k = first; k <= last && k < f2.size(); ++k) s += (s.empty() ? "" : " ") + fmt(f2[k]);
  return s;
}

/// Space-time L2 norm of a - b on the grid.
inline double field_l2(const Field2D& a, const Field2D& b, const Grid& grid) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.data.size(); ++j) acc += (a.data[j] - b.data[j]) * (a.data[j] - b.data[j]);
  return std::sqrt(acc * grid.dx * grid.dt);
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Least-squares slope of log(err) against log(h).
inline double fitted_order(const std::vector<double>& h, const std::vector<double>& err) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    mx += std::log(h[i]);
    my += std::log(err[i]);
  }
  mx /= static_cast<double>(h.size());
  my /= static_cast<double>(h.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    sxy += (std::log(h[i]) - mx) * (std::log(err[i]) - my);
    sxx += (std::log(h[i]) - mx) * (std::log(h[i]) - mx);
  }
  return sxy / sxx;
}

/// Manufactured p* = sin(pi x) t^2 with f = 0, Dirichlet on both ends.
inline double manufactured_error(int nx, int nt, const SolverOptions& opts) {
  const Grid grid = make_grid(nx, nt, 1.0);
  PhysicalParams pp;
  pp.c = 1.0;
  pp.b = 0.05;
  const double pi2 = kPi * kPi;
  pp.r_tilde_override = [b = pp.b, c2 = pp.c * pp.c, pi2](double x, double t) {
    return std::sin(kPi * x) * (2.0 * t + b * pi2 * t * t + c2 * pi2 * t * t * t / 3.0);
  };
  const BoundaryCondition bc{BoundarySide::dirichlet(), BoundarySide::dirichlet()};
  auto zero = [](double) { return 0.0; };
  const auto [field, report] = solve_forward(pp, zero, grid, bc, opts);
  double acc = 0.0;
  for (std::size_t n = 0; n < grid.n_time(); ++n)
    for (std::size_t i = 0; i < grid.n_space(); ++i) {
      const double e = field.p(n, i) - std::sin(kPi * grid.x_nodes[i]) * grid.t_nodes[n] * grid.t_nodes[n];
      acc += e * e;
    }
  return std::sqrt(acc * grid.dx * grid.dt);
}

/// Runs a preset end to end: simulate, smooth, reconstruct.
inline IterationHistory protocol_run(const ExperimentConfig& cfg) {
  const auto sim = simulate(cfg);
  return reconstruct(cfg, sim.smoothed).history;
}

inline Outcome recovery_check(const std::string& label, const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto hist = protocol_run(cfg);
  const double secs = seconds_since(t0);
  const auto& f2 = hist.F2;
  if (f2.size() < 5) return {false, label + ": fewer than 4 iterates"};
  const bool decreasing = strictly_decreasing(f2, 1, 4);
  const bool drop = f2[4] <= f2[1] - limits::recovery_min_drop;
  const bool fast = secs < limits::recovery_seconds;
  return {decreasing && drop && fast, label + " F2(1..4)=[" + f2_list(f2, 1, 4) + "]" +
                                          (decreasing ? "" : " not strictly decreasing") +
                                          (drop ? "" : " drop " + fmt(f2[1] - f2[4]) + " < 0.5") +
                                          (fast ? "" : " too slow") + " (" + fmt(secs) + " s)"};
}

/// Consistency of one projected Picard step at f_k = f_act, with data generated
/// from the same tabulated f_act so that the only difference is the update itself.
inline double consistency_error(const ExperimentConfig& cfg) {
  const ForwardSetup setup = make_setup(cfg);
  const auto f_cont = make_target(cfg);
  const auto probe = setup.solve(f_cont).first;
  const double reach = 1.5 * std::max(probe.max_abs_p, 1e-3);
  const Nonlinearity f_tab = Nonlinearity::sample(f_cont, with_origin(linspace(-reach, reach, 4001)));
  const auto [field, report] = setup.solve(f_tab);
  const ObservationTrace exact = observe(field, cfg.observation(), setup.grid);
  const PicardBounds bounds{};
  const auto step = exact.kind.is_time_trace() ? picard_step_time_trace(f_tab, exact, setup, bounds, cfg.admissible)
                                               : picard_step_final_time(f_tab, exact, setup, bounds, cfg.admissible);
  double worst = 0.0;
  for (double u : data_on_grid(exact, setup.grid)) worst = std::max(worst, std::abs(step.next(u) - f_tab(u)));
  return worst;
}

}  // namespace detail

inline Outcome forward_order(const Options& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  SolverOptions so;
  so.flip_memory_sign = opt.flip_memory_sign;
  std::vector<double> h, err;
  for (int k : {1, 2, 4}) {
    h.push_back(1.0 / (50.0 * k));
    err.push_back(detail::manufactured_error(50 * k, 100 * k, so));
  }
  const double order = detail::fitted_order(h, err);
  const double secs = detail::seconds_since(t0);
  const bool pass = order >= limits::mms_min_order && secs < limits::mms_seconds;
  return {pass, "order " + detail::fmt(order) + " (errors " + detail::fmt(err[0]) + ", " + detail::fmt(err[1]) +
                    ", " + detail::fmt(err[2]) + "; " + detail::fmt(secs) + " s)"};
}

inline Outcome linearization(const Options&) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg;
  cfg.nx = 100;
  cfg.nt = 200;
  const ForwardSetup setup = make_setup(cfg);
  const auto sigma = cfg.observation();
  auto df = [](double u) { return std::sin(kPi * u); };
  bool pass = true;
  std::string detail;
  for (double kappa : {0.0, 0.1}) {
    auto f = [kappa](double u) { return kappa * u; };
    auto fp = [kappa](double) { return kappa; };
    const auto base = setup.solve(f).first;
    const auto lin = solve_linearized(setup.params, f, fp, base, df, setup.grid, setup.bc);
    std::vector<double> q;
    for (double eps : {1e-3, 1e-4}) {
      auto fe = [&](double u) { return f(u) + eps * df(u); };
      const auto pe = setup.solve(fe).first;
      Field2D quotient = pe.p;
      for (std::size_t j = 0; j < quotient.data.size(); ++j)
        quotient.data[j] = (pe.p.data[j] - base.p.data[j]) / eps;
      q.push_back(detail::field_l2(quotient, lin.z, setup.grid));
    }
    const double ratio = q[0] / q[1];
    const bool ratio_ok = std::abs(ratio - limits::fd_ratio_target) <= limits::fd_ratio_rel_tol * limits::fd_ratio_target;

    // Jacobian column for the first sine basis function against a central difference of the trace
    const SineBasis basis{10, 1.0};
    auto phi = [&basis](double u) { return basis.phi(1, u); };
    const auto col = jacobian_column(setup.params, f, fp, base, phi, setup.grid, setup.bc, sigma);
    const double eps = 1e-4;
    auto fplus = [&](double u) { return f(u) + eps * phi(u); };
    auto fminus = [&](double u) { return f(u) - eps * phi(u); };
    const auto tp = observe_values(setup.solve(fplus).first.p, sigma, setup.grid);
    const auto tm = observe_values(setup.solve(fminus).first.p, sigma, setup.grid);
    std::vector<double> fd(col.size()), diff(col.size());
    for (std::size_t i = 0; i < col.size(); ++i) {
      fd[i] = (tp[i] - tm[i]) / (2.0 * eps);
      diff[i] = col[i] - fd[i];
    }
    const double rel = norms(setup.grid.t_nodes, diff).l2 / norms(setup.grid.t_nodes, fd).l2;
    const bool col_ok = rel <= limits::jacobian_column_rel_err;
    pass = pass && ratio_ok && col_ok;
    detail += (detail.empty() ? "" : "; ") + std::string("f=") + detail::fmt(kappa) + "u ratio " +
              detail::fmt(ratio) + " column rel err " + detail::fmt(rel);
  }
  const double secs = detail::seconds_since(t0);
  pass = pass && secs < limits::fd_seconds;
  return {pass, detail + " (" + detail::fmt(secs) + " s)"};
}

inline Outcome fixed_point_consistency(const Options&) {
  const auto t0 = std::chrono::steady_clock::now();
  const double e_trace = detail::consistency_error(preset("titr-paper"));
  const double e_final = detail::consistency_error(preset("fiti-paper"));
  const double secs = detail::seconds_since(t0);
  const bool pass = e_trace <= limits::consistency_abs && e_final <= limits::consistency_abs &&
                    secs < limits::consistency_seconds;
  return {pass, "time trace " + detail::fmt(e_trace) + ", final time " + detail::fmt(e_final) + " (" +
                    detail::fmt(secs) + " s)"};
}

inline Outcome protocol_recovery(const Options&) {
  const auto a = detail::recovery_check("time trace", preset("titr-paper"));
  const auto b = detail::recovery_check("final time", preset("fiti-paper"));
  return {a.pass && b.pass, a.detail + "; " + b.detail};
}

inline Outcome anderson_value(const Options&) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (auto [a, b, x0] : {std::tuple{0.5, 1.0, 0.0}, std::tuple{-0.8, 0.3, 2.0}, std::tuple{1.7, -2.0, 0.5},
                          std::tuple{0.99, 0.01, -1.0}}) {
    AndersonState st;
    st.depth = 1;
    const double x1 = anderson_step(st, {x0}, {a * x0 + b})[0];
    const double x2 = anderson_step(st, {x1}, {a * x1 + b})[0];
    worst = std::max(worst, std::abs(x2 - b / (1.0 - a)));
  }
  const bool exact = worst <= limits::anderson_affine_abs;

  ExperimentConfig plain = preset("titr-paper");
  plain.scheme = "picard";
  const auto accel = detail::protocol_run(preset("titr-paper"));
  const auto base = detail::protocol_run(plain);
  const bool better = accel.F2.at(4) <= base.F2.at(4);
  const double secs = detail::seconds_since(t0);
  return {exact && better && secs < limits::anderson_seconds,
          "affine error " + detail::fmt(worst) + "; F2(4) accelerated " + detail::fmt(accel.F2.at(4)) + " vs plain " +
              detail::fmt(base.F2.at(4)) + " (" + detail::fmt(secs) + " s)"};
}

inline Outcome frozen_newton_check(const Options&) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = preset("titr-paper");
  cfg.scheme = "frozen_newton";
  cfg.n_basis = 10;
  const auto sim = simulate(cfg);
  const auto frozen = reconstruct(cfg, sim.smoothed).history;
  ExperimentConfig plain_cfg = cfg;
  plain_cfg.scheme = "newton";
  plain_cfg.n_iters = 1;
  const auto plain = reconstruct(plain_cfg, sim.smoothed).history;
  double gap = 0.0;
  const auto& a = frozen.iterates.at(1);
  const auto& b = plain.iterates.at(1);
  for (std::size_t i = 0; i < a.size(); ++i) gap = std::max(gap, std::abs(a.values()[i] - b.values()[i]));
  const bool decreasing = detail::strictly_decreasing(frozen.F2, 1, 4);
  const double secs = detail::seconds_since(t0);
  return {decreasing && gap <= limits::newton_first_step_abs && secs < limits::newton_seconds,
          "F2(1..4)=[" + detail::f2_list(frozen.F2, 1, 4) + "]" + (decreasing ? "" : " not decreasing") +
              "; first-step gap to plain Newton " + detail::fmt(gap) + " (" + detail::fmt(secs) + " s)"};
}

inline Outcome explicit_formula(const Options&) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> err;
  for (int nt : {400, 800}) {
    ExperimentConfig cfg = preset("linearized-t2");
    cfg.nt = nt;
    const auto sim = simulate(cfg);
    const auto rec = reconstruct(cfg, sim.smoothed);
    const auto& df = rec.explicit_result->df;
    double worst = 0.0;
    for (std::size_t i = 0; i < df.size(); ++i)
      worst = std::max(worst, std::abs(df.values()[i] - cfg.kappa * df.nodes()[i]));
    err.push_back(worst);
  }
  const double ratio = err[0] / err[1];
  const bool halves =
      std::abs(ratio - limits::explicit_halving_target) <= limits::explicit_halving_rel_tol * limits::explicit_halving_target;

  // from t = 0 the slope eta' = 2t starts below gamma; those times must be dropped and listed
  ExperimentConfig wide = preset("linearized-t2");
  wide.explicit_t_lo = 0.0;
  const auto sim = simulate(wide);
  const auto rec = reconstruct(wide, sim.smoothed);
  const auto& excluded = rec.explicit_result->excluded_t;
  bool excluded_ok = !excluded.empty() && rec.history.notes.size() == excluded.size();
  for (double t : excluded) excluded_ok = excluded_ok && 2.0 * t < wide.explicit_gamma;
  const double secs = detail::seconds_since(t0);
  return {halves && excluded_ok && secs < limits::explicit_seconds,
          "max errors " + detail::fmt(err[0]) + " -> " + detail::fmt(err[1]) + " (ratio " + detail::fmt(ratio) +
              "); " + std::to_string(excluded.size()) + " times excluded near eta'=0 (" + detail::fmt(secs) + " s)"};
}

inline Outcome projection_contract(const Options&) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(20240611);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int violations = 0;
  double idem = 0.0;
  for (int trial = 0; trial < limits::projection_trials; ++trial) {
    const int n = 2 + static_cast<int>(unit(gen) * 80);
    std::vector<double> u(static_cast<std::size_t>(n));
    double acc = -unit(gen);
    for (auto& x : u) x = (acc += 1e-3 + unit(gen) * 0.1);
    std::vector<double> y(u.size());
    for (auto& v : y) v = 2.0 * (unit(gen) - 0.5) * (0.2 + 2.0 * unit(gen));
    AdmissibleSetParams params;
    params.sigma_upper = 0.1 + 0.8 * unit(gen);
    params.sigma_lower = 0.1 + 0.8 * unit(gen);
    params.lip = 0.5 + 20.0 * unit(gen);
    params.pin_origin = trial % 4 == 0;
    if (params.pin_origin) {
      u = with_origin(u);
      y.resize(u.size(), 0.3);
    }
    const auto f = smooth_project(u, y, params);
    if (!params.contains(f, limits::projection_membership_tol)) ++violations;
    const auto again = smooth_project(f, params);
    for (std::size_t i = 0; i < f.size(); ++i) idem = std::max(idem, std::abs(again.values()[i] - f.values()[i]));
  }

  // 12-node instances against the active-set QP on the same constraints
  double oracle = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 12;
    std::vector<double> u(n), y(n);
    double acc = 0.0;
    for (auto& x : u) x = (acc += 0.02 + unit(gen) * 0.1);
    for (auto& v : y) v = 2.0 * (unit(gen) - 0.5);
    AdmissibleSetParams params{0.2 + 0.6 * unit(gen), 0.2 + 0.6 * unit(gen), 0.5 + 5.0 * unit(gen)};
    const auto f = smooth_project(u, y, params);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(2 * n + 2 * (n - 1), n);
    Eigen::VectorXd h(G.rows());
    Eigen::Index r = 0;
    for (int i = 0; i < n; ++i) {
      G(r, i) = -1.0;
      h[r++] = -params.sigma_upper;
      G(r, i) = 1.0;
      h[r++] = -params.sigma_lower;
    }
    for (int i = 0; i + 1 < n; ++i) {
      const double d = params.lip * (u[i + 1] - u[i]);
      G(r, i + 1) = 1.0;
      G(r, i) = -1.0;
      h[r++] = -d;
      G(r, i + 1) = -1.0;
      G(r, i) = 1.0;
      h[r++] = -d;
    }
    const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    const auto qp = solve_inequality_qp(Eigen::MatrixXd::Identity(n, n), -yv, G, h, Eigen::VectorXd::Zero(n));
    for (int i = 0; i < n; ++i) oracle = std::max(oracle, std::abs(qp.x[i] - f.values()[i]));
  }
  const double secs = detail::seconds_since(t0);
  const bool pass = violations == 0 && idem <= limits::projection_idempotence_abs &&
                    oracle <= limits::projection_oracle_abs && secs < limits::projection_seconds;
  return {pass, std::to_string(violations) + " of " + std::to_string(limits::projection_trials) +
                    " outside the set; idempotence gap " + detail::fmt(idem) + "; QP oracle gap " +
                    detail::fmt(oracle) + " (" + detail::fmt(secs) + " s)"};
}

inline Outcome fractional(const Options&) {
  const auto t0 = std::chrono::steady_clock::now();
  auto f = [](double u) { return 0.1 * u; };
  auto field_at = [&](double alpha, int nx, int nt) {
    ExperimentConfig cfg;
    cfg.alpha = alpha;
    cfg.nx = nx;
    cfg.nt = nt;
    const ForwardSetup setup = make_setup(cfg);
    return std::make_pair(setup.solve(f).first, setup.grid);
  };
  // self-convergence on the coarse nodes
  const auto [p1, g1] = field_at(0.5, 50, 100);
  const auto [p2, g2] = field_at(0.5, 100, 200);
  const auto [p3, g3] = field_at(0.5, 200, 400);
  double d12 = 0.0, d23 = 0.0;
  for (std::size_t n = 0; n < g1.n_time(); ++n)
    for (std::size_t i = 0; i < g1.n_space(); ++i) {
      d12 += std::pow(p1.p(n, i) - p2.p(2 * n, 2 * i), 2);
      d23 += std::pow(p2.p(2 * n, 2 * i) - p3.p(4 * n, 4 * i), 2);
    }
  const double order = std::log2(std::sqrt(d12 / d23));

  const auto [q99, gq] = field_at(0.99, 200, 400);
  const auto [q1, gq1] = field_at(1.0, 200, 400);
  Field2D zero = q1.p;
  std::fill(zero.data.begin(), zero.data.end(), 0.0);
  const double rel = detail::field_l2(q99.p, q1.p, gq) / detail::field_l2(q1.p, zero, gq);

  const auto frac = detail::protocol_run(preset("frac-paper"));
  const auto integer = detail::protocol_run(preset("titr-paper"));
  const double gap = std::abs(frac.F2.at(4) - integer.F2.at(4));
  const double secs = detail::seconds_since(t0);
  const bool pass = order >= limits::fractional_min_order && rel <= limits::fractional_near_integer_rel &&
                    gap <= limits::fractional_recovery_gap && secs < limits::fractional_seconds;
  return {pass, "alpha=0.5 self-convergence order " + detail::fmt(order) + "; alpha=0.99 vs 1 rel diff " +
                    detail::fmt(rel) + "; F2(4) alpha=0.75 " + detail::fmt(frac.F2.at(4)) + " vs alpha=1 " +
                    detail::fmt(integer.F2.at(4)) + " (" + detail::fmt(secs) + " s)"};
}

inline Outcome determinism(const Options&) {
  bool same = true;
  for (const char* name : {"titr-paper", "fiti-paper"}) {
    const auto cfg = preset(name);
    same = same && history_csv(detail::protocol_run(cfg)) == history_csv(detail::protocol_run(cfg));
  }
  return {same, same ? "history CSV byte-identical across repeated runs" : "history CSV differs between runs"};
}

inline const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {1, "forward-order", forward_order},
      {2, "linearization", linearization},
      {3, "fixed-point-consistency", fixed_point_consistency},
      {4, "protocol-recovery", protocol_recovery},
      {5, "anderson", anderson_value},
      {6, "frozen-newton", frozen_newton_check},
      {7, "explicit-linearized", explicit_formula},
      {8, "projection", projection_contract},
      {9, "fractional", fractional},
      {10, "determinism", determinism},
  };
  return all;
}

/// Comma-separated ids or name substrings; empty selects everything.
inline bool selected(const Criterion& c, const std::string& filter) {
  if (filter.empty()) return true;
  std::stringstream ss(filter);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    if (token == std::to_string(c.id) || c.name.find(token) != std::string::npos) return true;
  }
  return false;
}

/// Runs the selected criteria; a criterion that throws is reported as failed.
inline std::vector<Result> run(const std::string& filter = {}, const Options& opt = {},
                               const std::function<void(const Result&)>& on_result = {}) {
  std::vector<Result> out;
  for (const auto& c : criteria()) {
    if (!selected(c, filter)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(opt);
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    out.push_back({c.id, c.name, o.pass, o.detail, detail::seconds_since(t0)});
    if (on_result) on_result(out.back());
  }
  return out;
}

inline std::string format_line(const Result& r) {
  return std::string(r.pass ? "PASS" : "FAIL") + " [" + std::to_string(r.id) + "] " + r.name + ": " + r.detail;
}

}  // namespace nlacoustic::verify
