#pragma once

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nlacoustic/core.hpp"
#include "nlacoustic/data_pipeline.hpp"
#include "nlacoustic/error.hpp"
#include "nlacoustic/forward_solver.hpp"
#include "nlacoustic/io.hpp"
#include "nlacoustic/linearized_solver.hpp"
#include "nlacoustic/nonlinearity.hpp"
#include "nlacoustic/reconstruction.hpp"

namespace nlacoustic {

/// Closed-form reference nonlinearities.
inline double target_time_trace(double u) { return 0.2 * std::sin(6.0 * kPi * u) * (1.0 - std::exp(u)); }
inline double target_final_time(double u) { return 0.1 * (1.0 - std::exp(-3.0 * u)) * std::cos(0.7 * u); }

inline const std::vector<std::string>& scheme_names() {
  static const std::vector<std::string> names{"picard", "picard_anderson", "frozen_newton", "newton",
                                              "explicit_linearized"};
  return names;
}

struct ExperimentConfig {
  // physics
  double c = 1.0;
  double b = 0.05;
  double alpha = 1.0;
  // grid
  int nx = 200;
  int nt = 400;
  double T = 1.0;
  BoundaryCondition bc{BoundarySide::dirichlet(), BoundarySide::neumann()};
  // excitation: "separable" p ~ A sin(pi x / 2) t, or "quadratic" p = t^2 with flat profile
  std::string excitation = "separable";
  double amplitude = 1.0;
  // reference nonlinearity: "time_trace", "final_time", "linear", "pwl", "zero"
  std::string target = "time_trace";
  double kappa = 0.2;
  std::vector<double> pwl_nodes{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> pwl_values{0.0, 0.0, 0.15, 0.0, 0.0};
  // data
  std::string data_kind = "time_trace";
  double x0 = 1.0;
  double omega_lo = 0.0;
  double omega_hi = 1.0;
  int n_samples = 50;
  double delta = 0.01;
  std::uint64_t seed = 42;
  SmootherConfig smoother{.n_basis = 10};
  // scheme
  std::string scheme = "picard";
  int n_iters = 4;
  int depth = 3;
  double beta = 1.0;
  bool nonnegative_weights = false;
  int n_basis = 10;
  double span_max = 0.0;
  double lambda = -1.0;
  AdmissibleSetParams admissible{.pin_origin = true};
  std::optional<PicardBounds> bounds;
  double gamma_lower = 1e-3;
  std::optional<std::pair<double, double>> eval_window;
  // explicit linearised reconstruction
  double explicit_t_lo = 0.2;
  double explicit_t_hi = 1.0;
  double explicit_gamma = 0.1;

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) fail(ErrorKind::InvalidConfig, "physics.alpha must lie in (0, 1]");
    require(c > 0.0 && b > 0.0, ErrorKind::InvalidConfig, "physics.c and physics.b must be > 0");
    require(nx >= 2 && nt >= 1 && T > 0.0, ErrorKind::InvalidConfig, "grid needs nx >= 2, nt >= 1, T > 0");
    require(excitation == "separable" || excitation == "release" || excitation == "quadratic",
            ErrorKind::InvalidConfig, "excitation.type must be separable, release or quadratic");
    require(target == "time_trace" || target == "final_time" || target == "linear" || target == "pwl" ||
                target == "zero",
            ErrorKind::InvalidConfig, "target.type must be time_trace, final_time, linear, pwl or zero");
    require(data_kind == "time_trace" || data_kind == "final_time", ErrorKind::InvalidConfig,
            "data.kind must be time_trace or final_time");
    if (std::find(scheme_names().begin(), scheme_names().end(), scheme) == scheme_names().end()) {
      std::string all;
      for (const auto& s : scheme_names()) all += (all.empty() ? "" : ", ") + s;
      fail(ErrorKind::InvalidConfig, "unknown scheme '" + scheme + "'; valid schemes: " + all);
    }
    if (alpha < 1.0 && data_kind == "final_time" && (scheme == "picard" || scheme == "picard_anderson"))
      fail(ErrorKind::InvalidConfig, "final-time Picard is not available for fractional damping");
    require(n_iters >= 0 && depth >= 0 && n_basis >= 1, ErrorKind::InvalidConfig,
            "scheme.n_iters, scheme.m, scheme.n_basis out of range");
    require(n_samples >= 2 && delta >= 0.0, ErrorKind::InvalidConfig, "data.n_samples >= 2 and data.delta >= 0");
    smoother.validate();
    admissible.validate();
    if (target == "pwl")
      require(pwl_nodes.size() == pwl_values.size() && pwl_nodes.size() >= 2, ErrorKind::InvalidConfig,
              "target.nodes and target.values must have equal length >= 2");
  }

  ObservationKind observation() const {
    return data_kind == "time_trace" ? ObservationKind::time_trace(x0) : ObservationKind::final_time(omega_lo, omega_hi);
  }
};

/// Reference nonlinearity as a callable.
inline std::function<double(double)> make_target(const ExperimentConfig& cfg) {
  if (cfg.target == "time_trace") return target_time_trace;
  if (cfg.target == "final_time") return target_final_time;
  if (cfg.target == "linear") return [k = cfg.kappa](double u) { return k * u; };
  if (cfg.target == "pwl") {
    Nonlinearity table(cfg.pwl_nodes, cfg.pwl_values);
    return [table](double u) { return table(u); };
  }
  return [](double) { return 0.0; };
}

/// Physical setup. "separable" drives p = A sin(pi x / 2) t exactly when f = 0
/// (Dirichlet left, Neumann right); "quadratic" gives p = t^2 with a flat profile.
inline ForwardSetup make_setup(const ExperimentConfig& cfg) {
  cfg.validate();
  ForwardSetup s;
  s.grid = make_grid(cfg.nx, cfg.nt, 0.0, 1.0, cfg.T);
  s.bc = cfg.bc;
  s.params.c = cfg.c;
  s.params.b = cfg.b;
  s.params.alpha = cfg.alpha;
  if (cfg.excitation == "quadratic") {
    s.params.r = [](double, double) { return 2.0; };
    return s;
  }
  const double k = 0.5 * kPi;
  const double A = cfg.amplitude;
  s.params.p1.resize(s.grid.n_space());
  for (std::size_t i = 0; i < s.grid.n_space(); ++i) s.params.p1[i] = A * std::sin(k * s.grid.x_nodes[i]);
  if (s.bc.left.is_dirichlet()) s.params.p1.front() = 0.0;
  if (cfg.excitation == "release") return s;
  const double c2 = cfg.c * cfg.c;
  const double b = cfg.b;
  const double alpha = cfg.alpha;
  const double frac = std::tgamma(2.0 - alpha);
  s.params.r = [=](double x, double t) {
    const double damping = alpha >= 1.0 ? A : A * std::pow(t, 1.0 - alpha) / frac;
    return std::sin(k * x) * k * k * (b * damping + c2 * A * t);
  };
  return s;
}

namespace detail {

using nlohmann::json;

inline BoundarySide parse_side(const json& j, const std::string& where) {
  require(j.is_string(), ErrorKind::InvalidConfig, where + ": expected a string");
  const std::string s = j.get<std::string>();
  if (s == "dirichlet") return BoundarySide::dirichlet();
  if (s == "neumann") return BoundarySide::neumann();
  if (s.rfind("impedance:", 0) == 0) return BoundarySide::impedance(std::strtod(s.c_str() + 10, nullptr));
  fail(ErrorKind::InvalidConfig, where + ": expected dirichlet, neumann or impedance:<beta>, got '" + s + "'");
}

inline std::string side_name(const BoundarySide& s) {
  switch (s.kind) {
    case BoundarySide::Kind::Dirichlet0: return "dirichlet";
    case BoundarySide::Kind::Neumann0: return "neumann";
    case BoundarySide::Kind::Impedance: return "impedance:" + io::format_double(s.beta);
  }
  return "dirichlet";
}

/// Reads obj[key] into out when present; reports the dotted path on type errors.
template <class T>
void read_key(const json& obj, const std::string& path, const char* key, T& out, std::set<std::string>& seen) {
  seen.insert(key);
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::InvalidConfig, path + "." + key + ": " + e.what());
  }
}

inline void reject_unknown(const json& obj, const std::string& path, const std::set<std::string>& seen) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!seen.count(it.key())) fail(ErrorKind::InvalidConfig, "unknown key " + path + "." + it.key());
}

inline const json& section(const json& root, const char* key, std::set<std::string>& seen) {
  static const json empty = json::object();
  seen.insert(key);
  if (!root.contains(key)) return empty;
  require(root.at(key).is_object(), ErrorKind::InvalidConfig, std::string(key) + ": expected an object");
  return root.at(key);
}

}  // namespace detail

/// Overlays a JSON key tree on top of cfg.
inline ExperimentConfig apply_json(ExperimentConfig cfg, const nlohmann::json& root) {
  using detail::read_key;
  require(root.is_object(), ErrorKind::InvalidConfig, "config root must be an object");
  std::set<std::string> top;
  {
    std::set<std::string> seen;
    const auto& j = detail::section(root, "physics", top);
    read_key(j, "physics", "c", cfg.c, seen);
    read_key(j, "physics", "b", cfg.b, seen);
    read_key(j, "physics", "alpha", cfg.alpha, seen);
    detail::reject_unknown(j, "physics", seen);
  }
  {
    std::set<std::string> seen;
    const auto& j = detail::section(root, "grid", top);
    read_key(j, "grid", "nx", cfg.nx, seen);
    read_key(j, "grid", "nt", cfg.nt, seen);
    read_key(j, "grid", "T", cfg.T, seen);
    detail::reject_unknown(j, "grid", seen);
  }
  {
    std::set<std::string> seen{"left", "right"};
    const auto& j = detail::section(root, "bc", top);
    if (j.contains("left")) cfg.bc.left = detail::parse_side(j.at("left"), "bc.left");
    if (j.contains("right")) cfg.bc.right = detail::parse_side(j.at("right"), "bc.right");
    detail::reject_unknown(j, "bc", seen);
  }
  {
    std::set<std::string> seen;
    const auto& j = detail::section(root, "excitation", top);
    read_key(j, "excitation", "type", cfg.excitation, seen);
    read_key(j, "excitation", "amplitude", cfg.amplitude, seen);
    detail::reject_unknown(j, "excitation", seen);
  }
  {
    std::set<std::string> seen;
    const auto& j = detail::section(root, "target", top);
    read_key(j, "target", "type", cfg.target, seen);
    read_key(j, "target", "kappa", cfg.kappa, seen);
    read_key(j, "target", "nodes", cfg.pwl_nodes, seen);
    read_key(j, "target", "values", cfg.pwl_values, seen);
    detail::reject_unknown(j, "target", seen);
  }
  {
    std::set<std::string> seen;
    const auto& j = detail::section(root, "data", top);
    read_key(j, "data", "kind", cfg.data_kind, seen);
    read_key(j, "data", "x0", cfg.x0, seen);
    std::vector<double> omega{cfg.omega_lo, cfg.omega_hi};
    read_key(j, "data", "omega", omega, seen);
    require(omega.size() == 2, ErrorKind::InvalidConfig, "data.omega: expected [lo, hi]");
    cfg.omega_lo = omega[0];
    cfg.omega_hi = omega[1];
    read_key(j, "data", "n_samples", cfg.n_samples, seen);
    read_key(j, "data", "delta", cfg.delta, seen);
    read_key(j, "data", "seed", cfg.seed, seen);
    std::set<std::string> smoother_seen;
    const auto& sj = detail::section(j, "smoother", seen);
    read_key(sj, "data.smoother", "n_basis", cfg.smoother.n_basis, smoother_seen);
    read_key(sj, "data.smoother", "gamma", cfg.smoother.gamma_lower, smoother_seen);
    read_key(sj, "data.smoother", "poly_degree", cfg.smoother.poly_degree, smoother_seen);
    read_key(sj, "data.smoother", "quarter_wave", cfg.smoother.quarter_wave, smoother_seen);
    smoother_seen.insert("sign");
    if (sj.contains("sign")) {
      const auto& s = sj.at("sign");
      if (s.is_string() && s.get<std::string>() == "auto")
        cfg.smoother.derivative_sign = 0;
      else if (s.is_number_integer() && (s.get<int>() == 1 || s.get<int>() == -1))
        cfg.smoother.derivative_sign = s.get<int>();
      else
        fail(ErrorKind::InvalidConfig, "data.smoother.sign: expected 1, -1 or \"auto\"");
    }
    detail::reject_unknown(sj, "data.smoother", smoother_seen);
    detail::reject_unknown(j, "data", seen);
  }
  {
    std::set<std::string> seen;
    const auto& j = detail::section(root, "scheme", top);
    read_key(j, "scheme", "name", cfg.scheme, seen);
    read_key(j, "scheme", "n_iters", cfg.n_iters, seen);
    read_key(j, "scheme", "m", cfg.depth, seen);
    read_key(j, "scheme", "beta", cfg.beta, seen);
    read_key(j, "scheme", "nonnegative_weights", cfg.nonnegative_weights, seen);
    read_key(j, "scheme", "n_basis", cfg.n_basis, seen);
    read_key(j, "scheme", "span_max", cfg.span_max, seen);
    read_key(j, "scheme", "lambda", cfg.lambda, seen);
    read_key(j, "scheme", "gamma", cfg.gamma_lower, seen);
    detail::reject_unknown(j, "scheme", seen);
  }
  {
    std::set<std::string> seen;
    const auto& j = detail::section(root, "admissible", top);
    read_key(j, "admissible", "sigma_upper", cfg.admissible.sigma_upper, seen);
    read_key(j, "admissible", "sigma_lower", cfg.admissible.sigma_lower, seen);
    read_key(j, "admissible", "lip", cfg.admissible.lip, seen);
    read_key(j, "admissible", "pin_origin", cfg.admissible.pin_origin, seen);
    detail::reject_unknown(j, "admissible", seen);
  }
  if (root.contains("bounds")) {
    std::set<std::string> seen;
    const auto& j = detail::section(root, "bounds", top);
    PicardBounds b;
    read_key(j, "bounds", "P_lo", b.P_lo, seen);
    read_key(j, "bounds", "P_hi", b.P_hi, seen);
    read_key(j, "bounds", "Q_lo", b.Q_lo, seen);
    read_key(j, "bounds", "Q_hi", b.Q_hi, seen);
    b.gamma_lower = cfg.gamma_lower;
    detail::reject_unknown(j, "bounds", seen);
    cfg.bounds = b;
  }
  top.insert("bounds");
  top.insert("eval_window");
  if (root.contains("eval_window")) {
    std::vector<double> w;
    read_key(root, "", "eval_window", w, top);
    require(w.size() == 2, ErrorKind::InvalidConfig, "eval_window: expected [lo, hi]");
    cfg.eval_window = std::make_pair(w[0], w[1]);
  }
  {
    std::set<std::string> seen;
    const auto& j = detail::section(root, "explicit", top);
    read_key(j, "explicit", "t_lo", cfg.explicit_t_lo, seen);
    read_key(j, "explicit", "t_hi", cfg.explicit_t_hi, seen);
    read_key(j, "explicit", "gamma", cfg.explicit_gamma, seen);
    detail::reject_unknown(j, "explicit", seen);
  }
  detail::reject_unknown(root, "config", top);
  cfg.validate();
  return cfg;
}

inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["physics"] = {{"c", cfg.c}, {"b", cfg.b}, {"alpha", cfg.alpha}};
  j["grid"] = {{"nx", cfg.nx}, {"nt", cfg.nt}, {"T", cfg.T}};
  j["bc"] = {{"left", detail::side_name(cfg.bc.left)}, {"right", detail::side_name(cfg.bc.right)}};
  j["excitation"] = {{"type", cfg.excitation}, {"amplitude", cfg.amplitude}};
  j["target"] = {{"type", cfg.target}, {"kappa", cfg.kappa}, {"nodes", cfg.pwl_nodes}, {"values", cfg.pwl_values}};
  nlohmann::json sign = cfg.smoother.derivative_sign == 0 ? nlohmann::json("auto") : nlohmann::json(cfg.smoother.derivative_sign);
  j["data"] = {{"kind", cfg.data_kind},
               {"x0", cfg.x0},
               {"omega", {cfg.omega_lo, cfg.omega_hi}},
               {"n_samples", cfg.n_samples},
               {"delta", cfg.delta},
               {"seed", cfg.seed},
               {"smoother",
                {{"n_basis", cfg.smoother.n_basis},
                 {"gamma", cfg.smoother.gamma_lower},
                 {"sign", sign},
                 {"poly_degree", cfg.smoother.poly_degree},
                 {"quarter_wave", cfg.smoother.quarter_wave}}}};
  j["scheme"] = {{"name", cfg.scheme},   {"n_iters", cfg.n_iters}, {"m", cfg.depth},
                 {"beta", cfg.beta},     {"nonnegative_weights", cfg.nonnegative_weights},
                 {"n_basis", cfg.n_basis}, {"span_max", cfg.span_max}, {"lambda", cfg.lambda},
                 {"gamma", cfg.gamma_lower}};
  j["admissible"] = {{"sigma_upper", cfg.admissible.sigma_upper},
                     {"sigma_lower", cfg.admissible.sigma_lower},
                     {"lip", cfg.admissible.lip},
                     {"pin_origin", cfg.admissible.pin_origin}};
  if (cfg.bounds)
    j["bounds"] = {{"P_lo", cfg.bounds->P_lo}, {"P_hi", cfg.bounds->P_hi}, {"Q_lo", cfg.bounds->Q_lo},
                   {"Q_hi", cfg.bounds->Q_hi}};
  if (cfg.eval_window) j["eval_window"] = {cfg.eval_window->first, cfg.eval_window->second};
  j["explicit"] = {{"t_lo", cfg.explicit_t_lo}, {"t_hi", cfg.explicit_t_hi}, {"gamma", cfg.explicit_gamma}};
  return j;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"titr-paper", "fiti-paper", "pwl-paper", "frac-paper", "linearized-t2"};
  return names;
}

inline ExperimentConfig preset(const std::string& name) {
  ExperimentConfig cfg;
  if (name == "titr-paper") {
    cfg.scheme = "picard_anderson";
    cfg.span_max = 1.0;
  } else if (name == "fiti-paper") {
    cfg.target = "final_time";
    cfg.data_kind = "final_time";
    cfg.scheme = "picard_anderson";
    // g'' enters the update, so the fit uses a short dictionary matched to Dirichlet-left/Neumann-right
    cfg.smoother.n_basis = 4;
    cfg.smoother.poly_degree = 1;
    cfg.smoother.quarter_wave = true;
  } else if (name == "pwl-paper") {
    cfg.target = "pwl";
    cfg.n_iters = 7;
  } else if (name == "frac-paper") {
    cfg.alpha = 0.75;
    cfg.scheme = "picard_anderson";
    cfg.span_max = 1.0;
  } else if (name == "linearized-t2") {
    cfg.excitation = "quadratic";
    cfg.bc = {BoundarySide::neumann(), BoundarySide::neumann()};
    cfg.target = "linear";
    cfg.kappa = 0.1;
    cfg.delta = 0.0;
    cfg.scheme = "explicit_linearized";
  } else {
    std::string all;
    for (const auto& p : preset_names()) all += (all.empty() ? "" : ", ") + p;
    fail(ErrorKind::InvalidConfig, "unknown preset '" + name + "'; valid presets: " + all);
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {}) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
  }
  return apply_json(std::move(base), j);
}

struct SimulationResult {
  ForwardSetup setup;
  PressureField field;
  SolveReport report;
  ObservationTrace exact;
  ObservationTrace noisy;
  ObservationTrace smoothed;
};

/// The linearised-state trace z(x0, .) around f = 0 in direction f_act (explicit scheme data).
inline ObservationTrace linearized_trace(const ExperimentConfig& cfg, const ForwardSetup& setup,
                                         const PressureField& base) {
  const auto df = make_target(cfg);
  auto zero = [](double) { return 0.0; };
  const auto lin = solve_linearized(setup.params, zero, zero, base, df, setup.grid, setup.bc);
  ObservationTrace out;
  out.kind = ObservationKind::time_trace(cfg.x0);
  out.abscissae = setup.grid.t_nodes;
  out.values = observe_values(lin.z, out.kind, setup.grid);
  out.derivative = observe_values(lin.zt, out.kind, setup.grid);
  return out;
}

/// Forward solve with f_act, exact trace, noisy subsample, smoothed up-resolved trace.
inline SimulationResult simulate(const ExperimentConfig& cfg) {
  SimulationResult res;
  res.setup = make_setup(cfg);
  const bool lin = cfg.scheme == "explicit_linearized";
  const auto f_act = make_target(cfg);
  auto zero = [](double) { return 0.0; };
  auto solved = lin ? res.setup.solve(zero) : res.setup.solve(f_act);
  res.field = std::move(solved.first);
  res.report = std::move(solved.second);
  res.exact = lin ? linearized_trace(cfg, res.setup, res.field) : observe(res.field, cfg.observation(), res.setup.grid);
  res.noisy = subsample_and_noise(res.exact, cfg.n_samples, cfg.delta, cfg.seed);
  if (lin) {
    res.smoothed = res.exact;
    return res;
  }
  SmootherConfig sc = cfg.smoother;
  sc.target_resolution = static_cast<int>(res.exact.size());
  res.smoothed = smooth_upsample(res.noisy, sc);
  return res;
}

struct ReconstructionResult {
  IterationHistory history;
  std::optional<ExplicitReconstruction> explicit_result;
};

/// Runs the configured scheme on (smoothed) data and fills F2 / Finf against f_act.
inline ReconstructionResult reconstruct(const ExperimentConfig& cfg, const ObservationTrace& data) {
  const ForwardSetup setup = make_setup(cfg);
  const auto f_act = make_target(cfg);
  ReconstructionResult out;
  if (cfg.scheme == "explicit_linearized") {
    auto eta = [](double t) { return t * t; };
    auto deta = [](double t) { return 2.0 * t; };
    out.explicit_result =
        explicit_linearized_reconstruction(data, eta, deta, cfg.explicit_t_lo, cfg.explicit_t_hi, cfg.explicit_gamma);
    auto& hist = out.history;
    hist.scheme = cfg.scheme;
    hist.iterates.push_back(out.explicit_result->df);
    const auto nodes = out.explicit_result->df.nodes();
    std::tie(hist.F2, hist.Finf) = error_history(hist.iterates, f_act, nodes.front(), nodes.back());
    for (double t : out.explicit_result->excluded_t)
      hist.notes.push_back("excluded t=" + io::format_double(t) + " (|eta'| < gamma)");
    return out;
  }
  if (cfg.scheme == "picard" || cfg.scheme == "picard_anderson") {
    PicardConfig pc;
    pc.n_iters = cfg.n_iters;
    pc.admissible = cfg.admissible;
    pc.gamma_lower = cfg.gamma_lower;
    pc.bounds = cfg.bounds;
    if (cfg.scheme == "picard_anderson") {
      AndersonState st;
      st.depth = cfg.depth;
      st.beta = {cfg.beta};
      st.nonnegative = cfg.nonnegative_weights;
      pc.anderson = st;
    }
    out.history = run_picard(data, setup, pc);
  } else {
    NewtonConfig nc;
    nc.n_iters = cfg.n_iters;
    nc.basis = SineBasis{cfg.n_basis, cfg.span_max};
    nc.lambda = cfg.lambda;
    nc.relinearize = cfg.scheme == "newton";
    nc.admissible = cfg.admissible;
    out.history = frozen_newton(data, setup, nc);
  }
  const auto& first = out.history.iterates.front();
  const auto window = cfg.eval_window.value_or(std::make_pair(first.nodes().front(), first.nodes().back()));
  std::tie(out.history.F2, out.history.Finf) = error_history(out.history.iterates, f_act, window.first, window.second);
  return out;
}

/// Gnuplot script drawing the iterates against f_act and the error curves.
inline std::string plot_script(const IterationHistory& hist) {
  std::string s;
  s += "# gnuplot script\nset datafile separator ','\nset key outside right\n";
  s += "set terminal pngcairo size 1200,500\nset output 'reconstruction.png'\nset multiplot layout 1,2\n";
  s += "set title 'iterates'\nset xlabel 'u'\nplot 'f_act.csv' using 1:2 with lines lw 3 lc 'black' title 'f_{act}'";
  for (std::size_t k = 1; k < hist.iterates.size(); ++k)
    s += ", 'iterates/iterate_" + std::to_string(k) + ".csv' using 1:2 with lines title 'k=" + std::to_string(k) + "'";
  s += "\nset title 'log10 relative error'\nset xlabel 'k'\n";
  s += "plot 'history.csv' using 1:2 every ::1 with linespoints title 'F_2', "
       "'history.csv' using 1:3 every ::1 with linespoints title 'F_{inf}'\n";
  s += "unset multiplot\n";
  return s;
}

}  // namespace nlacoustic
