#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "nlacoustic/experiment.hpp"
#include "nlacoustic/forward_solver.hpp"

using namespace nlacoustic;

namespace {

const BoundaryCondition kDirichlet{BoundarySide::dirichlet(), BoundarySide::dirichlet()};

double zero(double) { return 0.0; }

double exact_mms(double x, double t) { return std::sin(kPi * x) * t * t; }

// sin(pi x) (2t + b pi^2 t^2 + c^2 pi^2 t^3 / 3): p* substituted into the once-integrated equation
PhysicalParams mms_params() {
  PhysicalParams pp;
  pp.c = 1.0;
  pp.b = 0.05;
  pp.r_tilde_override = [](double x, double t) {
    const double pi2 = kPi * kPi;
    return std::sin(kPi * x) * (2.0 * t + 0.05 * pi2 * t * t + pi2 * t * t * t / 3.0);
  };
  return pp;
}

double mms_error(int nx, int nt) {
  const Grid g = make_grid(nx, nt);
  const auto field = solve_forward(mms_params(), zero, g, kDirichlet).first;
  double acc = 0.0;
  for (std::size_t n = 0; n < g.n_time(); ++n)
    for (std::size_t i = 0; i < g.n_space(); ++i)
      acc += std::pow(field.p(n, i) - exact_mms(g.x_nodes[i], g.t_nodes[n]), 2);
  return std::sqrt(acc * g.dx * g.dt);
}

PressureField sampled_mms(const Grid& g) {
  PressureField f;
  f.p = Field2D(g.n_time(), g.n_space());
  for (std::size_t n = 0; n < g.n_time(); ++n)
    for (std::size_t i = 0; i < g.n_space(); ++i) f.p(n, i) = exact_mms(g.x_nodes[i], g.t_nodes[n]);
  return f;
}

}  // namespace

TEST(Rtilde, ZeroData) {
  const Grid g = make_grid(10, 10);
  for (double v : assemble_rtilde(PhysicalParams{}, zero, g, {}).data) EXPECT_EQ(v, 0.0);
}

TEST(Rtilde, InitialVelocityTerm) {
  const Grid g = make_grid(10, 10);
  PhysicalParams pp;
  pp.p1.assign(g.n_space(), 1.0);
  for (double v : assemble_rtilde(pp, zero, g, {}).data) EXPECT_EQ(v, 1.0);
}

TEST(Rtilde, TimeIntegralOfSource) {
  const Grid g = make_grid(20, 40);
  PhysicalParams pp;
  pp.r = [](double x, double) { return std::sin(kPi * x); };
  const auto rt = assemble_rtilde(pp, zero, g, {});
  for (std::size_t n = 0; n < g.n_time(); ++n)
    for (std::size_t i = 0; i < g.n_space(); ++i)
      EXPECT_NEAR(rt(n, i), g.t_nodes[n] * std::sin(kPi * g.x_nodes[i]), 1e-12);
}

TEST(SolveForward, ZeroDataGivesZero) {
  const Grid g = make_grid(20, 20);
  const auto [field, report] = solve_forward(PhysicalParams{}, zero, g, {});
  for (double v : field.p.data) EXPECT_EQ(v, 0.0);
  EXPECT_LE(report.residual_norm, 1e-12);
  EXPECT_GT(field.degeneracy_margin, 0.0);
}

TEST(SolveForward, ManufacturedSolutionOrder) {
  const double e1 = mms_error(50, 100);
  const double e2 = mms_error(100, 200);
  const double e3 = mms_error(200, 400);
  EXPECT_GE(std::log2(e1 / e2), 1.8);
  EXPECT_GE(std::log2(e2 / e3), 1.8);
}

TEST(SolveForward, MemorySignMutationBreaksOrder) {
  SolverOptions opts;
  opts.flip_memory_sign = true;
  const Grid g = make_grid(50, 100);
  const auto field = solve_forward(mms_params(), zero, g, kDirichlet, opts).first;
  double worst = 0.0;
  for (std::size_t i = 0; i < g.n_space(); ++i)
    worst = std::max(worst, std::abs(field.p(g.nt, i) - exact_mms(g.x_nodes[i], 1.0)));
  EXPECT_GT(worst, 0.1);
}

TEST(SolveForward, WesterveltCaseDiagnostics) {
  ExperimentConfig cfg;
  const ForwardSetup setup = make_setup(cfg);
  auto f = [](double u) { return 0.2 * u; };
  const auto [field, report] = setup.solve(f);
  EXPECT_GT(field.degeneracy_margin, 0.7);
  for (int c : report.inner_iter_counts) EXPECT_LE(c, 10);
  EXPECT_EQ(report.inner_iter_counts.size(), static_cast<std::size_t>(setup.grid.nt));
  EXPECT_LE(discrete_residual(field, setup.params, f, setup.grid, setup.bc), 10.0 * SolverOptions{}.tol_inner);
}

TEST(SolveForward, InitialDataReproduced) {
  const Grid g = make_grid(20, 20);
  PhysicalParams pp;
  pp.p0.resize(g.n_space());
  pp.p1.resize(g.n_space());
  for (std::size_t i = 0; i < g.n_space(); ++i) {
    pp.p0[i] = std::sin(kPi * g.x_nodes[i]);
    pp.p1[i] = 0.5 * std::sin(kPi * g.x_nodes[i]);
  }
  const auto field = solve_forward(pp, zero, g, kDirichlet).first;
  for (std::size_t i = 0; i < g.n_space(); ++i) {
    EXPECT_NEAR(field.p(0, i), pp.p0[i], 1e-15);
    EXPECT_NEAR(field.pt(0, i), pp.p1[i], 1e-15);
  }
}

TEST(SolveForward, DeterministicBitwise) {
  ExperimentConfig cfg;
  const ForwardSetup setup = make_setup(cfg);
  auto f = [](double u) { return 0.1 * std::sin(u); };
  const auto a = setup.solve(f).first;
  const auto b = setup.solve(f).first;
  EXPECT_EQ(a.p.data, b.p.data);
  EXPECT_EQ(a.pt.data, b.pt.data);
}

TEST(SolveForward, MemoryCostIsQuadratic) {
  for (int nt : {5, 17, 40}) {
    const Grid g = make_grid(8, nt);
    const auto report = solve_forward(PhysicalParams{}, zero, g, {}).second;
    EXPECT_EQ(report.history_slices_touched, static_cast<std::uint64_t>(nt) * (nt + 1) / 2);
  }
}

TEST(SolveForward, DissipativeWithoutForcing) {
  const Grid g = make_grid(50, 200);
  PhysicalParams pp;
  pp.p0.resize(g.n_space());
  for (std::size_t i = 0; i < g.n_space(); ++i) pp.p0[i] = std::sin(kPi * g.x_nodes[i]);
  const auto field = solve_forward(pp, zero, g, kDirichlet).first;
  const double e0 = norms(g.x_nodes, field.p.row(0)).l2;
  const double eT = norms(g.x_nodes, field.p.row(g.nt)).l2;
  EXPECT_LE(eT, e0 + 1e-8);
}

TEST(SolveForward, DegeneracyIsReported) {
  ExperimentConfig cfg;
  const ForwardSetup setup = make_setup(cfg);
  auto f = [](double u) { return 2.0 * u; };
  try {
    setup.solve(f);
    FAIL() << "expected NonDegeneracyViolated";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonDegeneracyViolated);
  }
}

TEST(SolveForward, RangeLimit) {
  ExperimentConfig cfg;
  ForwardSetup setup = make_setup(cfg);
  setup.solver.strict_range = true;
  setup.solver.range_limit = 0.1;
  try {
    setup.solve(zero);
    FAIL() << "expected RangeExceeded";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RangeExceeded);
  }
}

TEST(SolveForward, AlphaDispatchChecks) {
  const Grid g = make_grid(10, 10);
  PhysicalParams pp;
  pp.alpha = 0.5;
  EXPECT_THROW(solve_forward(pp, zero, g, {}), Error);
  pp.alpha = 1.0;
  EXPECT_THROW(solve_forward_fractional(pp, zero, g, {}), Error);
  pp.alpha = 1.5;
  try {
    solve(pp, zero, g, {});
    FAIL() << "expected InvalidAlpha";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidAlpha);
  }
}

TEST(FractionalSolver, ZeroDataGivesZero) {
  const Grid g = make_grid(20, 20);
  PhysicalParams pp;
  pp.alpha = 0.5;
  const auto [field, report] = solve_forward_fractional(pp, zero, g, {});
  for (double v : field.p.data) EXPECT_EQ(v, 0.0);
  EXPECT_NE(report.kernel.find("abel"), std::string::npos);
}

TEST(FractionalSolver, SelfConvergence) {
  auto run = [](int nx, int nt) {
    ExperimentConfig cfg;
    cfg.alpha = 0.5;
    cfg.nx = nx;
    cfg.nt = nt;
    return make_setup(cfg).solve(zero).first;
  };
  const auto a = run(50, 100);
  const auto b = run(100, 200);
  const auto c = run(200, 400);
  double d1 = 0.0, d2 = 0.0;
  for (std::size_t n = 0; n <= 100; ++n)
    for (std::size_t i = 0; i <= 50; ++i) {
      d1 += std::pow(a.p(n, i) - b.p(2 * n, 2 * i), 2);
      d2 += std::pow(b.p(2 * n, 2 * i) - c.p(4 * n, 4 * i), 2);
    }
  EXPECT_GE(0.5 * std::log2(d1 / d2), 1.0);
}

TEST(FractionalSolver, NearIntegerLimit) {
  auto run = [](double alpha) {
    ExperimentConfig cfg;
    cfg.alpha = alpha;
    return make_setup(cfg).solve(zero).first;
  };
  const auto a = run(0.99);
  const auto b = run(1.0);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < a.p.data.size(); ++k) {
    num += std::pow(a.p.data[k] - b.p.data[k], 2);
    den += b.p.data[k] * b.p.data[k];
  }
  EXPECT_LE(std::sqrt(num / den), 5e-2);
}

TEST(DiscreteResidual, PerturbationIncreasesResidual) {
  ExperimentConfig cfg;
  cfg.nx = 40;
  cfg.nt = 80;
  const ForwardSetup setup = make_setup(cfg);
  auto f = [](double u) { return 0.1 * u; };
  auto field = setup.solve(f).first;
  const double base = discrete_residual(field, setup.params, f, setup.grid, setup.bc);
  for (std::size_t n = 1; n < field.p.rows; ++n)
    for (std::size_t i = 1; i < field.p.cols; ++i) field.p(n, i) += 1e-3 * std::sin(3.0 * static_cast<double>(i + n));
  EXPECT_GT(discrete_residual(field, setup.params, f, setup.grid, setup.bc), base);
}

TEST(DiscreteResidual, ManufacturedConsistencyOrder) {
  auto resid = [](int nx, int nt) {
    const Grid g = make_grid(nx, nt);
    return discrete_residual(sampled_mms(g), mms_params(), zero, g, kDirichlet);
  };
  const double r1 = resid(50, 100);
  const double r2 = resid(100, 200);
  const double r3 = resid(200, 400);
  EXPECT_NEAR(r1 / r2, 4.0, 0.8);
  EXPECT_NEAR(r2 / r3, 4.0, 0.8);
}

TEST(FieldDump, RoundTrip) {
  ExperimentConfig cfg;
  cfg.nx = 10;
  cfg.nt = 12;
  const ForwardSetup setup = make_setup(cfg);
  const auto field = setup.solve(zero).first;
  const auto path = std::filesystem::temp_directory_path() / "nlacoustic_field_roundtrip.bin";
  dump_field(field, setup.grid, path);
  const auto [back, grid] = load_field(path);
  EXPECT_EQ(grid.nx, 10);
  EXPECT_EQ(grid.nt, 12);
  EXPECT_EQ(back.p.data, field.p.data);
  EXPECT_EQ(back.pt.data, field.pt.data);
  std::filesystem::remove(path);
}
