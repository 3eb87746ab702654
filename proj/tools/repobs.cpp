#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "repobs/repobs.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::string t_grid;
  std::optional<std::size_t> workers;
  std::string curve;
  bool weighted = false;
};

repobs::RunConfig resolve(const Flags& f) {
  repobs::RunConfig c = repobs::load_config(f.config);
  if (!f.out.empty()) c.out_dir = f.out;
  if (f.seed) c.seed = *f.seed;
  if (f.trials) c.trials = *f.trials;
  if (!f.t_grid.empty()) c.t_grid = repobs::parse_t_grid(f.t_grid);
  if (f.workers) c.workers = *f.workers;
  return c;
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "run config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--seed", f.seed, "seed, overrides the config");
  cmd->add_option("--trials", f.trials, "trials per class and t");
  cmd->add_option("--t-grid", f.t_grid, "a:b:step or a comma list");
  cmd->add_option("--workers", f.workers, "worker threads (never changes results)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Error bounds and simulations for classification from repeated observations"};
  app.require_subcommand(1);
  Flags f;
  auto* bounds = app.add_subcommand("bounds", "evaluate bound families over a t grid");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo error curve, audit and exponent fit");
  auto* optimize = app.add_subcommand("optimize", "transform optimizers and selection");
  auto* exponent = app.add_subcommand("exponent", "fit the error exponent of a curve CSV");
  for (auto* cmd : {bounds, simulate, optimize}) add_common(cmd, f);
  exponent->add_option("--curve", f.curve, "curve CSV")->required()->check(CLI::ExistingFile);
  exponent->add_option("--out", f.out, "output directory (default: the curve's directory)");
  exponent->add_flag("--weighted", f.weighted, "inverse-variance weighted fit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : repobs::kExitConfig;
  }

  try {
    if (*bounds) {
      const auto report = repobs::cmd_bounds(resolve(f));
      for (const auto& col : report.columns)
        if (!col.note.empty()) std::cerr << col.name << ": " << col.note << "\n";
    } else if (*simulate) {
      const auto r = repobs::cmd_simulate(resolve(f));
      const auto violations = repobs::count_violations(r.audit);
      std::cout << "violations: " << violations << "\n";
      if (r.fit) std::cout << "fitted slope: " << repobs::format_double(r.fit->slope) << "\n";
    } else if (*optimize) {
      const auto r = repobs::cmd_optimize(resolve(f));
      std::cout << "selected: " << r.selected.criterion << "\n";
    } else if (*exponent) {
      const std::filesystem::path curve = f.curve;
      const std::filesystem::path out = f.out.empty() ? curve.parent_path() : std::filesystem::path(f.out);
      const auto r = repobs::cmd_exponent(curve, out, f.weighted);
      std::cout << "slope: " << repobs::format_double(r.fit.slope) << "\n";
    }
  } catch (const repobs::Error& e) {
    std::cerr << e.what() << "\n";
    return repobs::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return repobs::kExitConfig;
  }
  return repobs::kExitOk;
}
