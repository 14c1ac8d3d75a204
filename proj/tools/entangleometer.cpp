// Config-driven front end: simulate sweeps, fit retardance, characterize the
// source, and build the three-way instrument comparison, all reproducible
// from (config, seed).

#include "qell/errors.hpp"
#include "qell/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config_error = 2;
constexpr int exit_degenerate = 3;
constexpr int exit_non_convergence = 4;

int fail(int code, const std::string& kind, const std::string& message) {
  qell::json err{{"error", kind}, {"message", message}, {"exit_code", code}};
  std::cout << err.dump(2) << std::endl;
  return code;
}

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config (JSON)")->required();
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--out", args.out_dir, "output directory");
}

qell::json load_config(const CommonArgs& args) {
  qell::json j = qell::json::parse(qell::read_text_file(args.config_path));
  if (args.seed) j["seed"] = *args.seed;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"entangleometer: quantum/classical transmission ellipsometer simulator"};
  app.require_subcommand(1);

  CommonArgs sim_args, fit_args, chr_args, tab_args;
  bool override_validity = false;
  bool sensitivity = false;

  CLI::App* sim = app.add_subcommand("simulate", "generate sweep datasets");
  add_common(sim, sim_args);
  sim->add_flag("--override-validity", override_validity,
                "run sweeps even at retardance-blind angle settings");

  CLI::App* fit = app.add_subcommand("fit", "fit a sweep dataset");
  add_common(fit, fit_args);
  fit->add_flag("--sensitivity", sensitivity, "add an initial-condition sensitivity scan");

  CLI::App* chr = app.add_subcommand("characterize", "run the source characterization suite");
  add_common(chr, chr_args);

  CLI::App* tab = app.add_subcommand("table1", "three-way instrument comparison grid");
  add_common(tab, tab_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    return fail(exit_config_error, "cli_parse", e.what());
  }

  try {
    if (sim->parsed()) {
      qell::json j = load_config(sim_args);
      if (override_validity) j["override_validity"] = true;
      const std::string hash = qell::fnv1a_hex(j.dump());
      const qell::ExperimentConfig cfg = qell::experiment_from_json(j);
      const qell::SimulateOutput out = qell::run_simulate(cfg, sim_args.out_dir, hash);
      std::cout << out.summary.dump(2) << std::endl;
      return exit_ok;
    }
    if (fit->parsed()) {
      qell::json j = load_config(fit_args);
      if (sensitivity) j["sensitivity"] = true;
      const std::string hash = qell::fnv1a_hex(j.dump());
      const qell::FitCommandConfig cfg = qell::fit_command_from_json(j);
      const qell::json report = qell::run_fit(cfg, hash);
      const std::string status = report.at("fit").value("status", "");
      qell::write_text_file(std::filesystem::path(fit_args.out_dir) / "fit_report.json",
                            report.dump(2) + "\n");
      std::cout << report.dump(2) << std::endl;
      if (status == "degenerate_sweep") return exit_degenerate;
      if (status == "non_convergence") return exit_non_convergence;
      return exit_ok;
    }
    if (chr->parsed()) {
      qell::json j = load_config(chr_args);
      const std::string hash = qell::fnv1a_hex(j.dump());
      const qell::CharacterizeConfig cfg = qell::characterize_from_json(j);
      const qell::json report = qell::run_characterize(cfg, chr_args.out_dir, hash);
      std::cout << report.dump(2) << std::endl;
      return exit_ok;
    }
    if (tab->parsed()) {
      qell::json j = load_config(tab_args);
      const std::string hash = qell::fnv1a_hex(j.dump());
      const qell::Table1Config cfg = qell::table1_from_json(j);
      const qell::json report = qell::run_table1(cfg, hash);
      std::filesystem::create_directories(tab_args.out_dir);
      qell::write_text_file(std::filesystem::path(tab_args.out_dir) / "table1.json",
                            report.dump(2) + "\n");
      qell::write_text_file(std::filesystem::path(tab_args.out_dir) / "table1.txt",
                            qell::table1_text(report));
      std::cout << report.dump(2) << std::endl;
      return exit_ok;
    }
  } catch (const qell::DegenerateSweepError& e) {
    return fail(exit_degenerate, "degenerate_sweep", e.what());
  } catch (const qell::NonConvergenceError& e) {
    return fail(exit_non_convergence, "non_convergence", e.what());
  } catch (const qell::json::exception& e) {
    return fail(exit_config_error, "config_parse", e.what());
  } catch (const std::exception& e) {
    return fail(exit_config_error, "config_error", e.what());
  }
  return fail(exit_config_error, "config_error", "no subcommand executed");
}
