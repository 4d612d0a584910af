#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "nlacoustic/nlacoustic.hpp"
#include "nlacoustic/verification.hpp"

namespace fs = std::filesystem;
using namespace nlacoustic;

namespace {

enum ExitCode { kOk = 0, kNumerical = 1, kUsage = 2 };

struct CommonArgs {
  std::string config;
  std::string preset;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::string scheme;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config, "JSON config overlaid on the preset (or on defaults)")->check(CLI::ExistingFile);
  cmd->add_option("--preset", a.preset, "named experiment");
  cmd->add_option("--out", a.out, "output directory");
  cmd->add_option("--seed", a.seed, "noise seed");
  cmd->add_option("--scheme", a.scheme, "reconstruction scheme override");
}

ExperimentConfig resolve(const CommonArgs& a) {
  ExperimentConfig cfg = a.preset.empty() ? ExperimentConfig{} : preset(a.preset);
  if (!a.config.empty()) cfg = load_config(a.config, cfg);
  if (a.seed) cfg.seed = *a.seed;
  if (!a.scheme.empty()) cfg.scheme = a.scheme;
  cfg.validate();
  return cfg;
}

void write_target(const ExperimentConfig& cfg, double lo, double hi, const fs::path& path) {
  if (!(hi > lo)) hi = lo + 1.0;
  write_csv(Nonlinearity::sample(make_target(cfg), linspace(lo, hi, 401)), path);
}

int cmd_simulate(const CommonArgs& a, bool dump) {
  const auto cfg = resolve(a);
  const fs::path out = a.out;
  const auto sim = simulate(cfg);
  io::open_for_write(out / "config.json") << to_json(cfg).dump(2) << '\n';
  write_trace_csv(sim.exact, out / "exact.csv");
  write_trace_csv(sim.noisy, out / "noisy.csv");
  write_trace_csv(sim.smoothed, out / "smoothed.csv");
  if (dump) dump_field(sim.field, sim.setup.grid, out / "field.bin");
  int inner_max = 0;
  for (int c : sim.report.inner_iter_counts) inner_max = std::max(inner_max, c);
  std::printf("kernel %s\nmax |p| %.6g\ndegeneracy margin %.6g\nmax inner iterations %d\nresidual %.3g\n"
              "wallclock %.3f s\nwrote %s\n",
              sim.report.kernel.c_str(), sim.field.max_abs_p, sim.field.degeneracy_margin, inner_max,
              sim.report.residual_norm, sim.report.wallclock, out.string().c_str());
  return kOk;
}

int cmd_reconstruct(const CommonArgs& a, const std::string& data_path) {
  const auto cfg = resolve(a);
  const fs::path out = a.out;
  ObservationTrace data;
  if (!data_path.empty()) {
    data = read_trace_csv(data_path);
  } else {
    const auto sim = simulate(cfg);
    data = sim.smoothed;
    write_trace_csv(sim.smoothed, out / "smoothed.csv");
  }
  const auto rec = reconstruct(cfg, data);
  const auto& hist = rec.history;
  io::open_for_write(out / "config.json") << to_json(cfg).dump(2) << '\n';
  write_history_csv(hist, out / "history.csv");
  write_iterates(hist, out / "iterates");
  const auto nodes = hist.iterates.back().nodes();
  write_target(cfg, nodes.front(), nodes.back(), out / "f_act.csv");
  if (rec.explicit_result) write_csv(rec.explicit_result->df, out / "df.csv");
  io::open_for_write(out / "plot.gp") << plot_script(hist);
  for (std::size_t k = 0; k < hist.F2.size(); ++k)
    std::printf("k=%zu F2=%.4f Finf=%.4f\n", k, hist.F2[k], hist.Finf[k]);
  for (const auto& note : hist.notes) std::printf("note: %s\n", note.c_str());
  std::printf("wrote %s\n", out.string().c_str());
  return kOk;
}

int cmd_verify(const std::string& filter, bool mutate) {
  verify::Options opt;
  opt.flip_memory_sign = mutate;
  bool all = true;
  const auto results = verify::run(filter, opt, [&all](const verify::Result& r) {
    std::printf("%s\n", verify::format_line(r).c_str());
    std::fflush(stdout);
    all = all && r.pass;
  });
  if (results.empty()) {
    std::fprintf(stderr, "no criterion matches '%s'\n", filter.c_str());
    return kUsage;
  }
  return all ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"generalized Westervelt solver and nonlinearity reconstruction"};
  app.require_subcommand(1);

  CommonArgs sim_args;
  bool dump = false;
  auto* sim = app.add_subcommand("simulate", "forward solve with f_act and write exact, noisy and smoothed data");
  add_common(sim, sim_args);
  sim->add_flag("--dump-field", dump, "also write the binary space-time field");

  CommonArgs rec_args;
  std::string data_path;
  auto* rec = app.add_subcommand("reconstruct", "run a reconstruction scheme and write history, iterates, plot script");
  add_common(rec, rec_args);
  rec->add_option("--data", data_path, "smoothed trace CSV (default: simulate in-process)")->check(CLI::ExistingFile);

  std::string filter;
  bool mutate = false;
  auto* ver = app.add_subcommand("verify", "run the acceptance criteria");
  ver->add_option("--filter", filter, "comma-separated criterion ids or name fragments");
  ver->add_flag("--mutate-memory-sign", mutate, "test hook: corrupt the forward solver first");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*sim) return cmd_simulate(sim_args, dump);
    if (*rec) return cmd_reconstruct(rec_args, data_path);
    return cmd_verify(filter, mutate);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.is_usage_error() ? kUsage : kNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumerical;
  }
}
