#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

#include "nlacoustic/nonlinearity.hpp"
#include "nlacoustic/qp.hpp"

using namespace nlacoustic;

namespace {

// Box and slope constraints of the admissible set as G x >= h rows, optionally with x_k = 0 as two rows.
void admissible_rows(const std::vector<double>& u, const AdmissibleSetParams& p, Eigen::MatrixXd& G,
                     Eigen::VectorXd& h) {
  const auto n = static_cast<Eigen::Index>(u.size());
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  auto add = [&](Eigen::VectorXd r, double b) {
    rows.push_back(std::move(r));
    rhs.push_back(b);
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
    r[i] = -1.0;
    add(r, -p.sigma_upper);
    r[i] = 1.0;
    add(r, -p.sigma_lower);
    if (p.pin_origin && u[static_cast<std::size_t>(i)] == 0.0) {
      add(r, 0.0);
      r[i] = -1.0;
      add(r, 0.0);
    }
  }
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double d = p.lip * (u[static_cast<std::size_t>(i) + 1] - u[static_cast<std::size_t>(i)]);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
    r[i + 1] = 1.0;
    r[i] = -1.0;
    add(r, -d);
    add(-r, -d);
  }
  G.resize(static_cast<Eigen::Index>(rows.size()), n);
  h.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    G.row(static_cast<Eigen::Index>(k)) = rows[k].transpose();
    h[static_cast<Eigen::Index>(k)] = rhs[k];
  }
}

std::vector<double> qp_projection(const std::vector<double>& u, const std::vector<double>& y,
                                  const AdmissibleSetParams& p) {
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  admissible_rows(u, p, G, h);
  const auto n = static_cast<Eigen::Index>(u.size());
  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  const auto res = solve_inequality_qp(Eigen::MatrixXd::Identity(n, n), -yv, G, h, Eigen::VectorXd::Zero(n));
  return {res.x.data(), res.x.data() + n};
}

double distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

}  // namespace

TEST(Nonlinearity, LinearInterpolation) {
  const Nonlinearity f({-1.0, 0.0, 1.0}, {-0.2, 0.0, 0.2});
  EXPECT_NEAR(f(0.5), 0.1, 1e-15);
  EXPECT_EQ(f(2.0), 0.2);
  EXPECT_EQ(f(-3.0), -0.2);
}

TEST(Nonlinearity, SampledTimeTraceTarget) {
  auto target = [](double u) { return 0.2 * std::sin(6.0 * kPi * u) * (1.0 - std::exp(u)); };
  const auto f = Nonlinearity::sample(target, linspace(0.0, 1.0, 401));
  EXPECT_NEAR(f(0.25), 0.2 * (std::exp(0.25) - 1.0), 1e-12);
  EXPECT_NEAR(f(0.25), 0.05681, 1e-5);
}

TEST(Nonlinearity, NodesEvaluateExactly) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  std::vector<double> u(40), v(40);
  double acc = -2.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    acc += 0.01 + 0.1 * (ud(gen) + 1.0);
    u[i] = acc;
    v[i] = ud(gen);
  }
  const Nonlinearity f(u, v);
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_EQ(f(u[i]), v[i]);
}

TEST(Nonlinearity, ZeroAtOriginShift) {
  const Nonlinearity f({-1.0, 1.0}, {0.1, 0.3}, true);
  EXPECT_NEAR(f(0.0), 0.0, 1e-15);
  EXPECT_NEAR(f(1.0), 0.1, 1e-15);
}

TEST(Nonlinearity, DerivativeIsLeftContinuous) {
  const Nonlinearity f({0.0, 1.0, 2.0}, {0.0, 1.0, 3.0});
  EXPECT_EQ(f.derivative(0.5), 1.0);
  EXPECT_EQ(f.derivative(1.0), 1.0);
  EXPECT_EQ(f.derivative(1.5), 2.0);
  EXPECT_EQ(f.derivative(5.0), 0.0);
}

TEST(Nonlinearity, RejectsBadNodes) {
  EXPECT_THROW(Nonlinearity({0.0, 0.0}, {1.0, 2.0}), Error);
  EXPECT_THROW(Nonlinearity({0.0, 1.0}, {1.0}), Error);
  EXPECT_THROW(Nonlinearity({0.0}, {1.0}), Error);
}

TEST(Clamp, Examples) {
  EXPECT_EQ(clamp(0.5, 0.0, 1.0), 0.5);
  EXPECT_EQ(clamp(-3.0, 0.0, 1.0), 0.0);
  EXPECT_EQ(clamp(7.0, 0.0, 1.0), 1.0);
  EXPECT_THROW(clamp(0.0, 1.0, 0.0), Error);
}

TEST(SmoothProject, MemberIsFixed) {
  const AdmissibleSetParams p{0.5, 0.5, 2.0};
  const auto u = linspace(0.0, 1.0, 50);
  std::vector<double> y(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) y[i] = 0.3 * std::sin(3.0 * u[i]);
  const auto f = smooth_project(u, y, p);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(f.values()[i], y[i], 1e-10);
}

TEST(SmoothProject, PureBoxClamp) {
  const AdmissibleSetParams p{0.4, 0.5, 10.0};
  const auto u = linspace(0.0, 1.0, 20);
  const std::vector<double> y(u.size(), 0.8);
  const auto f = smooth_project(u, y, p);
  for (double v : f.values()) EXPECT_NEAR(v, 0.4, 1e-15);
}

TEST(SmoothProject, SawtoothAgainstQpOracle) {
  const AdmissibleSetParams p{0.9, 0.9, 1.0};
  const auto u = linspace(0.0, 1.1, 12);
  std::vector<double> y(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) y[i] = (i % 2 == 0 ? 0.0 : 3.0 * p.lip * (u[1] - u[0]));
  const auto f = smooth_project(u, y, p);
  for (std::size_t i = 0; i + 1 < u.size(); ++i)
    EXPECT_LE(std::abs(f.values()[i + 1] - f.values()[i]) / (u[i + 1] - u[i]), 1.0 + 1e-9);
  const auto oracle = qp_projection(u, y, p);
  double obj_dp = 0.0, obj_qp = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    obj_dp += 0.5 * std::pow(f.values()[i] - y[i], 2);
    obj_qp += 0.5 * std::pow(oracle[i] - y[i], 2);
  }
  EXPECT_NEAR(obj_dp, obj_qp, 1e-6);
}

TEST(SmoothProject, RandomInstancesMatchQp) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> u(12), y(12);
    double acc = -0.6;
    for (auto& x : u) x = (acc += 0.02 + 0.1 * ud(gen));
    for (auto& v : y) v = 2.0 * ud(gen) - 1.0;
    AdmissibleSetParams p{0.1 + 0.8 * ud(gen), 0.1 + 0.8 * ud(gen), 0.5 + 5.0 * ud(gen)};
    p.pin_origin = trial % 2 == 0;
    if (p.pin_origin) {
      u = with_origin(u);
      y.resize(u.size(), 0.5);
    }
    const auto f = smooth_project(u, y, p);
    const auto oracle = qp_projection(u, y, p);
    for (std::size_t i = 0; i < u.size(); ++i) ASSERT_NEAR(f.values()[i], oracle[i], 1e-8) << "trial " << trial;
  }
}

TEST(SmoothProject, IdempotentAndNonExpansive) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const AdmissibleSetParams p{0.3, 0.4, 3.0};
  const auto u = linspace(-1.0, 1.0, 60);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> y(u.size()), z(u.size());
    for (auto& v : y) v = 2.0 * ud(gen) - 1.0;
    for (auto& v : z) v = 2.0 * ud(gen) - 1.0;
    const auto py = smooth_project(u, y, p);
    EXPECT_TRUE(p.contains(py));
    const auto again = smooth_project(py, p);
    for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(again.values()[i], py.values()[i], 1e-9);
    // any member of the set: the projection of z
    const auto member = smooth_project(u, z, p);
    EXPECT_LE(distance(py.values(), member.values()), distance(y, member.values()) + 1e-8);
  }
}

TEST(SmoothProject, PinnedOriginIsZero) {
  AdmissibleSetParams p;
  p.pin_origin = true;
  const auto u = with_origin(linspace(-0.3, 0.7, 11));
  const std::vector<double> y(u.size(), 0.4);
  const auto f = smooth_project(u, y, p);
  EXPECT_EQ(f(0.0), 0.0);
  EXPECT_TRUE(p.contains(f));
}

TEST(SmoothProject, RejectsInvalidParams) {
  const auto u = linspace(0.0, 1.0, 5);
  const std::vector<double> y(5, 0.0);
  EXPECT_THROW(smooth_project(u, y, AdmissibleSetParams{1.0, 0.5, 1.0}), Error);
  EXPECT_THROW(smooth_project(u, y, AdmissibleSetParams{0.5, -0.1, 1.0}), Error);
  EXPECT_THROW(smooth_project(u, y, AdmissibleSetParams{0.5, 0.5, 0.0}), Error);
}

TEST(WithOrigin, InsertsOnlyWhenMissing) {
  EXPECT_EQ(with_origin({-1.0, 0.0, 1.0}).size(), 3u);
  EXPECT_EQ(with_origin({-1.0, 1.0}), (std::vector<double>{-1.0, 0.0, 1.0}));
  EXPECT_EQ(with_origin({0.5, 1.0}), (std::vector<double>{0.0, 0.5, 1.0}));
}

TEST(SineExpand, Examples) {
  const auto nodes = linspace(-1.0, 1.0, 41);
  const auto flat = sine_expand(std::vector<double>(3, 0.0), {3, 1.0}, nodes);
  for (double v : flat.values()) EXPECT_EQ(v, 0.0);
  EXPECT_NEAR(sine_expand(std::vector<double>{1.0}, {1, 1.0}, nodes)(0.5), 1.0, 1e-15);
  const std::vector<double> c{0.3, -0.1};
  const auto f = sine_expand(c, {2, 2.0}, linspace(0.0, 1.0, 3));
  EXPECT_NEAR(f(0.5), 0.3 * std::sin(kPi / 4.0) - 0.1, 1e-15);
  EXPECT_NEAR(f(0.5), 0.11213, 1e-5);
}

TEST(SineExpand, VanishesAtOrigin) {
  const std::vector<double> c{0.3, -0.2, 0.7, 0.1};
  const auto f = sine_expand(c, {4, 1.3}, linspace(-0.77, 0.91, 17));
  EXPECT_EQ(f(0.0), 0.0);
  EXPECT_THROW(sine_expand(c, {3, 1.0}, linspace(0.0, 1.0, 3)), Error);
}
