#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "nlacoustic/experiment.hpp"
#include "nlacoustic/verification.hpp"

using namespace nlacoustic;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string output;
};

Run run_cli(const std::string& args) {
  const std::string cmd = std::string(NLACOUSTIC_CLI_PATH) + " " + args + " 2>&1";
  Run r{-1, {}};
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe)) r.output += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("nlacoustic_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST(Config, PresetsValidate) {
  for (const auto& name : preset_names()) EXPECT_NO_THROW(preset(name)) << name;
  EXPECT_THROW(preset("nope"), Error);
}

TEST(Config, ReferenceDefaults) {
  const auto cfg = preset("titr-paper");
  EXPECT_EQ(cfg.T, 1.0);
  EXPECT_EQ(cfg.c, 1.0);
  EXPECT_EQ(cfg.b, 0.05);
  EXPECT_EQ(cfg.delta, 0.01);
  EXPECT_EQ(cfg.n_samples, 50);
  EXPECT_EQ(cfg.depth, 3);
  EXPECT_EQ(cfg.beta, 1.0);
  EXPECT_EQ(cfg.nx, 200);
  EXPECT_EQ(cfg.nt, 400);
}

TEST(Config, DegeneracyMarginOfPresets) {
  for (const char* name : {"titr-paper", "fiti-paper", "pwl-paper", "frac-paper"}) {
    const auto sim = simulate(preset(name));
    EXPECT_GT(sim.field.degeneracy_margin, 0.5) << name;
  }
}

TEST(Config, JsonRoundTrip) {
  auto cfg = preset("fiti-paper");
  cfg.bounds = PicardBounds{-1.0, 2.0, 0.5, 4.0, 1e-3};
  cfg.eval_window = std::make_pair(0.1, 0.9);
  const auto back = apply_json(ExperimentConfig{}, to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
}

TEST(Config, UnknownKeysAndSchemes) {
  EXPECT_THROW(apply_json({}, nlohmann::json::parse(R"({"physics": {"cc": 1}})")), Error);
  EXPECT_THROW(apply_json({}, nlohmann::json::parse(R"({"nonsense": {}})")), Error);
  try {
    apply_json({}, nlohmann::json::parse(R"({"scheme": {"name": "bogus"}})"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.is_usage_error());
    for (const auto& s : scheme_names()) EXPECT_NE(std::string(e.what()).find(s), std::string::npos);
  }
}

TEST(Config, TypeErrorNamesTheField) {
  try {
    apply_json({}, nlohmann::json::parse(R"({"grid": {"nx": "many"}})"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("grid.nx"), std::string::npos);
  }
}

TEST(Config, FractionalFinalTimePicardRejected) {
  auto cfg = preset("fiti-paper");
  cfg.alpha = 0.5;
  EXPECT_THROW(cfg.validate(), Error);
  cfg.alpha = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Config, ZeroNoiseSubsample) {
  auto cfg = preset("titr-paper");
  cfg.delta = 0.0;
  const auto sim = simulate(cfg);
  for (std::size_t i = 0; i < sim.noisy.size(); ++i)
    EXPECT_EQ(sim.noisy.values[i], interp_clamped(sim.exact.abscissae, sim.exact.values, sim.noisy.abscissae[i]));
}

TEST(Config, FractionalPathReported) {
  auto cfg = preset("titr-paper");
  cfg.alpha = 0.5;
  EXPECT_NE(simulate(cfg).report.kernel.find("abel"), std::string::npos);
}

TEST(Cli, SimulateWritesTraces) {
  const auto out = scratch("simulate");
  const auto r = run_cli("simulate --preset titr-paper --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto noisy = read_trace_csv(out / "noisy.csv");
  const auto smoothed = read_trace_csv(out / "smoothed.csv");
  EXPECT_EQ(noisy.size(), 50u);
  EXPECT_EQ(smoothed.size(), 401u);
  EXPECT_EQ(noisy.kind.x0, 1.0);
  fs::remove_all(out);
}

TEST(Cli, ReconstructAndDeterminism) {
  const auto a = scratch("rec_a");
  const auto b = scratch("rec_b");
  ASSERT_EQ(run_cli("reconstruct --preset titr-paper --out " + a.string()).code, 0);
  ASSERT_EQ(run_cli("reconstruct --preset titr-paper --out " + b.string()).code, 0);
  const auto table = io::read_csv(a / "history.csv");
  EXPECT_EQ(table.rows.size(), 5u);
  EXPECT_TRUE(fs::exists(a / "plot.gp"));
  for (const char* file : {"history.csv", "smoothed.csv", "iterates/iterate_4.csv", "f_act.csv"})
    EXPECT_EQ(slurp(a / file), slurp(b / file)) << file;
  const auto it = read_nonlinearity_csv(a / "iterates/iterate_4.csv");
  EXPECT_GT(it.size(), 2u);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, ReconstructFromDataFile) {
  const auto out = scratch("from_data");
  ASSERT_EQ(run_cli("simulate --preset fiti-paper --out " + out.string()).code, 0);
  const auto r = run_cli("reconstruct --preset fiti-paper --data " + (out / "smoothed.csv").string() + " --out " +
                         (out / "rec").string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(io::read_csv(out / "rec" / "history.csv").rows.size(), 5u);
  fs::remove_all(out);
}

TEST(Cli, ExplicitSchemeWritesDf) {
  const auto out = scratch("explicit");
  ASSERT_EQ(run_cli("reconstruct --preset linearized-t2 --out " + out.string()).code, 0);
  const auto df = read_nonlinearity_csv(out / "df.csv");
  EXPECT_NEAR(df.nodes().front(), 0.04, 1e-12);
  EXPECT_NEAR(df.nodes().back(), 1.0, 1e-12);
  fs::remove_all(out);
}

TEST(Cli, ConfigOverlayAndSeed) {
  const auto out = scratch("config");
  fs::create_directories(out);
  std::ofstream(out / "cfg.json") << R"({"grid": {"nx": 60, "nt": 120}, "data": {"n_samples": 30}})";
  const auto r = run_cli("simulate --preset titr-paper --config " + (out / "cfg.json").string() + " --seed 5 --out " +
                         out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto noisy = read_trace_csv(out / "noisy.csv");
  EXPECT_EQ(noisy.size(), 30u);
  EXPECT_EQ(noisy.seed, 5u);
  fs::remove_all(out);
}

TEST(Cli, UsageErrorsExitTwo) {
  const auto r = run_cli("reconstruct --preset titr-paper --scheme bogus --out " + scratch("bogus").string());
  EXPECT_EQ(r.code, 2);
  for (const auto& s : scheme_names()) EXPECT_NE(r.output.find(s), std::string::npos) << s;
  EXPECT_EQ(run_cli("simulate --preset missing").code, 2);
  EXPECT_EQ(run_cli("frobnicate").code, 2);
  EXPECT_EQ(run_cli("simulate --config /nonexistent/cfg.json").code, 2);
  EXPECT_EQ(run_cli("verify --filter no-such-criterion").code, 2);
}

TEST(Cli, NumericalFailureExitsOne) {
  const auto out = scratch("degenerate");
  fs::create_directories(out);
  std::ofstream(out / "cfg.json") << R"({"target": {"type": "linear", "kappa": 3.0}})";
  const auto r = run_cli("simulate --config " + (out / "cfg.json").string() + " --out " + out.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("NonDegeneracyViolated"), std::string::npos);
  fs::remove_all(out);
}

TEST(Cli, VerifyFilterRunsOnlyAnderson) {
  const auto r = run_cli("verify --filter anderson");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("[5] anderson"), std::string::npos);
  EXPECT_EQ(r.output.find("[1]"), std::string::npos);
}

TEST(Cli, MutationProbeFailsManufacturedCriterion) {
  const auto r = run_cli("verify --filter 1 --mutate-memory-sign");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("FAIL [1]"), std::string::npos);
  EXPECT_EQ(run_cli("verify --filter 1").code, 0);
}

TEST(Verification, FilterPlumbing) {
  int count = 0;
  for (const auto& c : verify::criteria()) count += verify::selected(c, "anderson") ? 1 : 0;
  EXPECT_EQ(count, 1);
  EXPECT_TRUE(verify::selected(verify::criteria()[0], ""));
  EXPECT_TRUE(verify::selected(verify::criteria()[2], "2,3"));
  EXPECT_FALSE(verify::selected(verify::criteria()[3], "2,3"));
}
