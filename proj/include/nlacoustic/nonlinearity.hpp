#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nlacoustic/core.hpp"
#include "nlacoustic/error.hpp"
#include "nlacoustic/io.hpp"

namespace nlacoustic {

/// Piecewise-linear f on increasing nodes, constant outside the node range.
class Nonlinearity {
 public:
  Nonlinearity() : Nonlinearity({-1.0, 1.0}, {0.0, 0.0}) {}

  Nonlinearity(std::vector<double> u_nodes, std::vector<double> values, bool zero_at_origin = false)
      : u_(std::move(u_nodes)), f_(std::move(values)) {
    require(u_.size() == f_.size(), ErrorKind::ShapeMismatch, "Nonlinearity: nodes/values length");
    require(u_.size() >= 2, ErrorKind::EmptyInput, "Nonlinearity: need at least two nodes");
    for (std::size_t i = 0; i + 1 < u_.size(); ++i)
      require(u_[i + 1] > u_[i], ErrorKind::InvalidInterval, "Nonlinearity: nodes must increase");
    if (zero_at_origin && u_.front() <= 0.0 && u_.back() >= 0.0) {
      const double shift = (*this)(0.0);
      for (double& v : f_) v -= shift;
    }
  }

  static Nonlinearity zero(std::vector<double> u_nodes) {
    std::vector<double> values(u_nodes.size(), 0.0);
    return {std::move(u_nodes), std::move(values)};
  }

  template <ScalarMap F>
  static Nonlinearity sample(const F& f, std::vector<double> u_nodes) {
    std::vector<double> values(u_nodes.size());
    for (std::size_t i = 0; i < u_nodes.size(); ++i) values[i] = f(u_nodes[i]);
    return {std::move(u_nodes), std::move(values)};
  }

  double operator()(double u) const { return interp_clamped(u_, f_, u); }

  /// Left-continuous slope of the piecewise-linear graph, zero outside the nodes.
  double derivative(double u) const {
    if (!(u > u_.front()) || u > u_.back()) return 0.0;
    const auto it = std::lower_bound(u_.begin(), u_.end(), u);
    const std::size_t hi = static_cast<std::size_t>(it - u_.begin());
    return (f_[hi] - f_[hi - 1]) / (u_[hi] - u_[hi - 1]);
  }

  auto derivative_map() const {
    return [this](double u) { return derivative(u); };
  }

  std::span<const double> nodes() const { return u_; }
  std::span<const double> values() const { return f_; }
  std::size_t size() const { return u_.size(); }
  double M() const { return std::max(std::abs(u_.front()), std::abs(u_.back())); }

  /// Same graph resampled on other nodes (piecewise-linear interpolation).
  Nonlinearity resampled(std::vector<double> u_nodes) const {
    return sample(*this, std::move(u_nodes));
  }

 private:
  std::vector<double> u_;
  std::vector<double> f_;
};

/// Box and Lipschitz bounds of the admissible set: -sigma_lower <= f <= sigma_upper, |f'| <= lip.
struct AdmissibleSetParams {
  double sigma_upper = 0.5;
  double sigma_lower = 0.5;
  double lip = 10.0;
  bool pin_origin = false;  // additionally f(0) = 0 at a node u = 0, when there is one

  void validate() const {
    require(sigma_upper < 1.0, ErrorKind::InvalidConfig, "sigma_upper must be < 1");
    require(sigma_lower >= 0.0, ErrorKind::InvalidConfig, "sigma_lower must be >= 0");
    require(lip > 0.0, ErrorKind::InvalidConfig, "lip must be > 0");
  }

  bool contains(const Nonlinearity& f, double tol = 1e-9) const {
    const auto u = f.nodes();
    const auto v = f.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] > sigma_upper + tol || v[i] < -sigma_lower - tol) return false;
      if (i + 1 < v.size() && std::abs(v[i + 1] - v[i]) > lip * (u[i + 1] - u[i]) + tol) return false;
      if (pin_origin && u[i] == 0.0 && std::abs(v[i]) > tol) return false;
    }
    return true;
  }
};

inline double clamp(double z, double a, double b) {
  require(a <= b, ErrorKind::InvalidInterval, "clamp: lower bound exceeds upper bound");
  return std::min(b, std::max(a, z));
}

namespace detail {

// Derivative of a convex piecewise-quadratic on [lo, hi]: alpha + beta*u on each piece.
struct DerivativePiece {
  double lo;
  double hi;
  double alpha;
  double beta;
  double at(double u) const { return alpha + beta * u; }
};

inline double argmin_from_derivative(const std::vector<DerivativePiece>& pieces) {
  for (const auto& p : pieces) {
    if (p.at(p.lo) >= 0.0) return p.lo;
    if (p.at(p.hi) >= 0.0) return -p.alpha / p.beta;
  }
  return pieces.back().hi;
}

}  // namespace detail

/// Euclidean projection of the graph {(u_i, y_i)} onto the admissible set.
///
/// Exact dynamic program over the chain: the value function of the prefix
/// problem is convex piecewise quadratic, so its derivative is tracked as a
/// list of linear pieces. The slope constraint acts on it as a min-convolution
/// (split at the minimiser and shift both halves apart), the box as a
/// restriction of the domain. Back substitution clamps each prefix minimiser
/// into the window allowed by its successor.
inline Nonlinearity smooth_project(std::span<const double> u, std::span<const double> y,
                                   const AdmissibleSetParams& params) {
  require(params.sigma_upper >= -params.sigma_lower, ErrorKind::InfeasibleConstraints,
          "smooth_project: sigma_upper < -sigma_lower");
  params.validate();
  require(u.size() == y.size(), ErrorKind::ShapeMismatch, "smooth_project: length mismatch");
  require(u.size() >= 2, ErrorKind::EmptyInput, "smooth_project: need at least two nodes");
  for (std::size_t i = 0; i + 1 < u.size(); ++i)
    require(u[i + 1] > u[i], ErrorKind::InvalidInterval, "smooth_project: nodes must increase");

  const double lo = -params.sigma_lower;
  const double hi = params.sigma_upper;
  const std::size_t n = u.size();
  std::vector<double> argmins(n);
  std::vector<detail::DerivativePiece> pieces{{lo, hi, 0.0, 0.0}};
  std::vector<detail::DerivativePiece> next;

  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      const double delta = params.lip * (u[i] - u[i - 1]);
      const double m = argmins[i - 1];
      next.clear();
      for (const auto& p : pieces) {
        if (p.lo < m) {
          const double top = std::min(p.hi, m);
          next.push_back({p.lo - delta, top - delta, p.alpha + p.beta * delta, p.beta});
        }
      }
      next.push_back({m - delta, m + delta, 0.0, 0.0});
      for (const auto& p : pieces) {
        if (p.hi > m) {
          const double bottom = std::max(p.lo, m);
          next.push_back({bottom + delta, p.hi + delta, p.alpha - p.beta * delta, p.beta});
        }
      }
      pieces.clear();
      for (auto p : next) {
        p.lo = std::max(p.lo, lo);
        p.hi = std::min(p.hi, hi);
        if (p.hi > p.lo) pieces.push_back(p);
      }
      if (pieces.empty()) pieces.push_back({lo, hi, 0.0, 0.0});
    }
    if (params.pin_origin && u[i] == 0.0) {
      // the cost is finite only at f_i = 0; the next step sees a flat cost on [-delta, delta]
      pieces.clear();
      argmins[i] = 0.0;
      continue;
    }
    for (auto& p : pieces) {
      p.alpha -= y[i];
      p.beta += 1.0;
    }
    argmins[i] = detail::argmin_from_derivative(pieces);
  }

  std::vector<double> f(n);
  f[n - 1] = argmins[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    const double delta = params.lip * (u[i + 1] - u[i]);
    f[i] = std::min(f[i + 1] + delta, std::max(f[i + 1] - delta, argmins[i]));
  }
  return {std::vector<double>(u.begin(), u.end()), std::move(f)};
}

/// Sorted nodes with u = 0 inserted if absent (extending the range when 0 lies outside it).
inline std::vector<double> with_origin(std::vector<double> nodes) {
  const auto it = std::lower_bound(nodes.begin(), nodes.end(), 0.0);
  if (it == nodes.end() || *it != 0.0) nodes.insert(it, 0.0);
  return nodes;
}

inline Nonlinearity smooth_project(const Nonlinearity& raw, const AdmissibleSetParams& params) {
  return smooth_project(raw.nodes(), raw.values(), params);
}

/// phi_j(u) = sin(j pi u / U), j = 1..n_basis.
struct SineBasis {
  int n_basis = 10;
  double span_max = 1.0;

  double phi(int j, double u) const { return std::sin(j * kPi * u / span_max); }
  double dphi(int j, double u) const {
    return (j * kPi / span_max) * std::cos(j * kPi * u / span_max);
  }
};

/// Analytic sine series; callable, with an analytic derivative.
struct SineExpansion {
  std::vector<double> coeffs;
  SineBasis basis;

  double operator()(double u) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < coeffs.size(); ++j) acc += coeffs[j] * basis.phi(static_cast<int>(j) + 1, u);
    return acc;
  }
  double derivative(double u) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < coeffs.size(); ++j) acc += coeffs[j] * basis.dphi(static_cast<int>(j) + 1, u);
    return acc;
  }
  auto derivative_map() const {
    return [this](double u) { return derivative(u); };
  }
};

/// Sample the sine series on u_nodes; a node at u = 0 is inserted when the range straddles it.
inline Nonlinearity sine_expand(std::span<const double> coeffs, const SineBasis& basis,
                                std::vector<double> u_nodes) {
  require(coeffs.size() == static_cast<std::size_t>(basis.n_basis), ErrorKind::ShapeMismatch,
          "sine_expand: coefficient count != n_basis");
  require(basis.span_max > 0.0, ErrorKind::InvalidConfig, "sine_expand: span_max must be > 0");
  if (!u_nodes.empty() && u_nodes.front() < 0.0 && u_nodes.back() > 0.0 &&
      !std::binary_search(u_nodes.begin(), u_nodes.end(), 0.0)) {
    u_nodes.insert(std::upper_bound(u_nodes.begin(), u_nodes.end(), 0.0), 0.0);
  }
  const SineExpansion series{std::vector<double>(coeffs.begin(), coeffs.end()), basis};
  return Nonlinearity::sample(series, std::move(u_nodes));
}

inline void write_csv(const Nonlinearity& f, const std::filesystem::path& path) {
  auto out = io::open_for_write(path);
  out << "u,f\n";
  for (std::size_t i = 0; i < f.size(); ++i)
    out << io::format_double(f.nodes()[i]) << ',' << io::format_double(f.values()[i]) << '\n';
}

inline Nonlinearity read_nonlinearity_csv(const std::filesystem::path& path) {
  const auto table = io::read_csv(path);
  require(table.header.size() >= 2, ErrorKind::Io, path.string() + ": expected columns u,f");
  return {table.column(0), table.column(1)};
}

}  // namespace nlacoustic
