#include "qell/pipeline.hpp"

#include "qell/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace qell {

namespace {

std::vector<double> degrees_to_radians(const std::vector<double>& deg) {
  std::vector<double> rad;
  rad.reserve(deg.size());
  for (double d : deg) rad.push_back(deg_to_rad(d));
  return rad;
}

std::vector<double> radians_to_degrees(const std::vector<double>& rad) {
  std::vector<double> deg;
  deg.reserve(rad.size());
  for (double r : rad) deg.push_back(rad_to_deg(r));
  return deg;
}

FitModel fit_model_from(const std::string& s) {
  if (s == "no_compensator") return FitModel::no_compensator;
  if (s == "compensator") return FitModel::compensator;
  if (s == "senarmont") return FitModel::senarmont;
  if (s == "classical_psa") return FitModel::classical_psa;
  throw std::invalid_argument("unknown fit model: " + s);
}

const char* fit_model_name(FitModel m) {
  switch (m) {
    case FitModel::no_compensator: return "no_compensator";
    case FitModel::compensator: return "compensator";
    case FitModel::senarmont: return "senarmont";
    case FitModel::classical_psa: return "classical_psa";
  }
  return "?";
}

}  // namespace

std::uint64_t repetition_seed(std::uint64_t seed, int rep) {
  return splitmix64(splitmix64(seed) + 0xB5297A4D3F84D5B5ull * (static_cast<std::uint64_t>(rep) + 1));
}

FitConfig fit_config_from_json(const json& j) {
  FitConfig cfg;
  if (j.contains("model")) cfg.model = fit_model_from(j.at("model").get<std::string>());
  if (j.contains("signal_hwp_deg")) cfg.signal_hwp_rad = deg_to_rad(j.at("signal_hwp_deg").get<double>());
  if (j.contains("polarizer_deg")) cfg.polarizer_rad = deg_to_rad(j.at("polarizer_deg").get<double>());
  if (j.contains("theta_deg")) cfg.theta_rad = deg_to_rad(j.at("theta_deg").get<double>());
  cfg.classical_compensator = j.value("classical_compensator", cfg.classical_compensator);
  if (j.contains("initial_delta_rad") && !j.at("initial_delta_rad").is_null()) {
    cfg.initial_delta_rad = j.at("initial_delta_rad").get<double>();
  }
  if (j.contains("initial_scale") && !j.at("initial_scale").is_null()) {
    cfg.initial_scale = j.at("initial_scale").get<double>();
  }
  cfg.max_iterations = j.value("max_iterations", cfg.max_iterations);
  cfg.convergence_tol = j.value("convergence_tol", cfg.convergence_tol);
  cfg.scale_perturbation = j.value("scale_perturbation", cfg.scale_perturbation);
  cfg.scale_grid = j.value("scale_grid", cfg.scale_grid);
  cfg.dependence_relative_floor =
      j.value("dependence_relative_floor", cfg.dependence_relative_floor);
  cfg.poisson_weighting = j.value("poisson_weighting", cfg.poisson_weighting);
  cfg.validate();
  return cfg;
}

ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig cfg;
  const std::string mode = j.value("mode", "quantum");
  if (mode == "quantum") {
    cfg.mode = Mode::quantum;
    cfg.parameter = SweptParameter::idler_hwp;
  } else if (mode == "classical") {
    cfg.mode = Mode::classical;
    cfg.parameter = SweptParameter::analyzer;
  } else {
    throw std::invalid_argument("mode must be 'quantum' or 'classical'");
  }
  cfg.compensator = j.value("compensator", false);

  if (!j.contains("sample")) throw std::invalid_argument("config needs a 'sample' block");
  const json& s = j.at("sample");
  if (s.contains("delta_rad")) {
    cfg.sample.delta_rad = s.at("delta_rad").get<double>();
    cfg.sample.theta_rad = deg_to_rad(s.value("theta_deg", 0.0));
  } else {
    PhysicalSample ps;
    ps.wavelength_nm = s.value("wavelength_nm", 808.0);
    ps.birefringence = s.at("birefringence").get<double>();
    ps.thickness_nm = s.at("thickness_nm").get<double>();
    ps.axis_rad = deg_to_rad(s.value("axis_deg", 0.0));
    cfg.sample.delta_rad = retardance_of(ps);
    cfg.sample.theta_rad = ps.axis_rad;
  }

  const json sweep = j.value("sweep", json::object());
  if (sweep.contains("parameter")) {
    const std::string p = sweep.at("parameter").get<std::string>();
    if (p == "idler_hwp") cfg.parameter = SweptParameter::idler_hwp;
    else if (p == "analyzer") cfg.parameter = SweptParameter::analyzer;
    else throw std::invalid_argument("sweep.parameter must be 'idler_hwp' or 'analyzer'");
  }
  if (sweep.contains("angles_deg")) {
    cfg.angles_rad = degrees_to_radians(sweep.at("angles_deg").get<std::vector<double>>());
  } else {
    const double start = sweep.value("start_deg", 0.0);
    const double step = sweep.value("step_deg", cfg.mode == Mode::quantum ? 5.0 : 10.0);
    const int points = sweep.value("points", 18);
    if (points < 4) throw std::invalid_argument("sweep needs at least 4 points");
    for (int k = 0; k < points; ++k) cfg.angles_rad.push_back(deg_to_rad(start + k * step));
  }
  cfg.signal_hwp_rad = deg_to_rad(sweep.value("signal_hwp_deg", 0.0));
  cfg.polarizer_rad = deg_to_rad(sweep.value("polarizer_deg", 90.0));
  cfg.compensator_angle_rad = deg_to_rad(sweep.value("compensator_angle_deg", 0.0));

  if (j.contains("detection")) cfg.detection = detection_from_json(j.at("detection"));
  if (j.contains("fit")) {
    cfg.fit = fit_config_from_json(j.at("fit"));
    cfg.has_fit = true;
  }
  cfg.repetitions = j.value("repetitions", 1);
  if (cfg.repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  if (j.contains("axis_schedule_deg")) {
    cfg.axis_schedule_rad = degrees_to_radians(j.at("axis_schedule_deg").get<std::vector<double>>());
  }
  cfg.seed = j.value("seed", 0ull);
  cfg.override_validity = j.value("override_validity", false);
  return cfg;
}

json experiment_to_json(const ExperimentConfig& cfg) {
  json j;
  j["mode"] = cfg.mode == Mode::quantum ? "quantum" : "classical";
  j["compensator"] = cfg.compensator;
  j["sample"] = json{{"theta_deg", rad_to_deg(cfg.sample.theta_rad)},
                     {"delta_rad", cfg.sample.delta_rad}};
  j["sweep"] = json{
      {"parameter", cfg.parameter == SweptParameter::idler_hwp ? "idler_hwp" : "analyzer"},
      {"angles_deg", radians_to_degrees(cfg.angles_rad)},
      {"signal_hwp_deg", rad_to_deg(cfg.signal_hwp_rad)},
      {"polarizer_deg", rad_to_deg(cfg.polarizer_rad)},
      {"compensator_angle_deg", rad_to_deg(cfg.compensator_angle_rad)}};
  j["detection"] = detection_to_json(cfg.detection);
  j["repetitions"] = cfg.repetitions;
  if (!cfg.axis_schedule_rad.empty()) {
    j["axis_schedule_deg"] = radians_to_degrees(cfg.axis_schedule_rad);
  }
  j["seed"] = cfg.seed;
  j["override_validity"] = cfg.override_validity;
  return j;
}

SweepPlan plan_from_experiment(const ExperimentConfig& cfg) {
  SweepPlan plan;
  plan.mode = cfg.mode;
  plan.parameter = cfg.parameter;
  plan.angles_rad = cfg.angles_rad;
  plan.analyzer.signal = {cfg.signal_hwp_rad, Port::transmitted};
  plan.analyzer.idler = {0.0, Port::transmitted};
  plan.analyzer.compensator_present = cfg.compensator;
  plan.analyzer.compensator_angle_rad = cfg.compensator_angle_rad;
  plan.psa.polarizer_rad = cfg.polarizer_rad;
  plan.psa.compensator_present = cfg.compensator;
  return plan;
}

double true_scale(const ExperimentConfig& cfg) {
  const DetectionModel& m = cfg.detection;
  if (cfg.mode == Mode::classical) {
    return m.singles_rate_classical_cps * m.integration_time_s;
  }
  const double base =
      m.pair_rate_cps * m.efficiency_signal * m.efficiency_idler * m.integration_time_s;
  // probability = model fraction for the compensator family, half of it
  // for the compensator-free family
  return cfg.compensator ? base : 0.5 * base;
}

SimulateOutput run_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                            const std::string& config_hash) {
  std::filesystem::create_directories(out_dir);
  const SweepPlan plan = plan_from_experiment(cfg);
  SimulateOutput out;
  json files = json::array();
  // With an axis schedule, each scheduled sample orientation gets its own
  // block of repetitions.
  std::vector<double> axes = cfg.axis_schedule_rad;
  if (axes.empty()) axes.push_back(cfg.sample.theta_rad);
  int idx = 0;
  for (std::size_t a = 0; a < axes.size(); ++a) {
    SampleSpec sample = cfg.sample;
    sample.theta_rad = axes[a];
    for (int rep = 0; rep < cfg.repetitions; ++rep, ++idx) {
      const std::uint64_t rep_seed = repetition_seed(cfg.seed + 0x100 * a, rep);
      const SweepDataset ds =
          run_sweep(plan, sample, cfg.detection, rep_seed, cfg.override_validity);
      char name[32];
      std::snprintf(name, sizeof(name), "sweep_%03d", idx);
      const auto csv = out_dir / (std::string(name) + ".csv");
      const auto meta = out_dir / (std::string(name) + ".meta.json");
      write_sweep_csv(csv, ds);
      write_sweep_meta(meta, ds, csv.filename().string(), config_hash);
      out.csv_paths.push_back(csv);
      out.meta_paths.push_back(meta);
      files.push_back(json{{"csv", csv.filename().string()},
                           {"meta", meta.filename().string()},
                           {"theta_deg", rad_to_deg(sample.theta_rad)},
                           {"seed", rep_seed}});
    }
  }
  out.summary = json{{"schema_version", report_schema_version},
                     {"config_hash", config_hash},
                     {"seed", cfg.seed},
                     {"repetitions", cfg.repetitions},
                     {"files", files}};
  return out;
}

FitCommandConfig fit_command_from_json(const json& j) {
  FitCommandConfig cfg;
  if (!j.contains("dataset_csv")) throw std::invalid_argument("fit config needs 'dataset_csv'");
  cfg.dataset_csv = j.at("dataset_csv").get<std::string>();
  if (j.contains("dataset_meta")) cfg.dataset_meta = j.at("dataset_meta").get<std::string>();
  if (j.contains("fit")) {
    cfg.fit = fit_config_from_json(j.at("fit"));
    cfg.fit_given = true;
  }
  if (j.contains("delta_std_rad") && !j.at("delta_std_rad").is_null()) {
    cfg.delta_std_rad = j.at("delta_std_rad").get<double>();
  }
  cfg.sensitivity = j.value("sensitivity", false);
  cfg.seed = j.value("seed", 0ull);
  return cfg;
}

namespace {

// Defaults the fit protocol from dataset metadata when the config does not
// pin one: classical datasets fit the Jones-chain model, quantum datasets
// the matching closed form, with fixed angles taken from the sweep.
FitConfig default_fit_for(const SweepDataset& ds) {
  FitConfig cfg;
  if (ds.mode == Mode::classical) {
    cfg.model = FitModel::classical_psa;
    cfg.polarizer_rad = ds.psa.polarizer_rad;
    cfg.classical_compensator = ds.psa.compensator_present;
  } else {
    cfg.model = ds.analyzer.compensator_present ? FitModel::compensator
                                                : FitModel::no_compensator;
    cfg.signal_hwp_rad = ds.analyzer.signal.hwp_rad;
  }
  if (ds.has_ground_truth) cfg.theta_rad = ds.ground_truth.theta_rad;
  return cfg;
}

}  // namespace

json run_fit(const FitCommandConfig& cfg, const std::string& config_hash) {
  const SweepDataset ds = cfg.dataset_meta.empty()
                              ? read_sweep_csv_only(cfg.dataset_csv)
                              : read_sweep(cfg.dataset_csv, cfg.dataset_meta);
  const FitConfig fit_cfg = cfg.fit_given ? cfg.fit : default_fit_for(ds);
  const FitResult res = fit_retardance(ds, fit_cfg);

  json report{{"schema_version", report_schema_version},
              {"config_hash", config_hash},
              {"seed", cfg.seed},
              {"dataset_csv", cfg.dataset_csv.string()},
              {"records", ds.records.size()},
              {"model", fit_model_name(fit_cfg.model)},
              {"fit", fit_result_to_json(res)}};
  if (cfg.delta_std_rad) {
    report["delta_std_rad"] = *cfg.delta_std_rad;
    if (res.status == FitStatus::converged) {
      report["relative_error"] = relative_error(res.delta_hat_rad, *cfg.delta_std_rad);
    }
  }
  if (cfg.sensitivity && res.status != FitStatus::degenerate_sweep) {
    report["sensitivity"] = sensitivity_to_json(sensitivity_scan(ds, fit_cfg));
  }
  return report;
}

CharacterizeConfig characterize_from_json(const json& j) {
  CharacterizeConfig cfg;
  if (j.contains("state")) cfg.visibility = j.at("state").value("visibility", 1.0);
  if (!(cfg.visibility >= 0.0 && cfg.visibility <= 1.0)) {
    throw std::invalid_argument("state.visibility must be in [0, 1]");
  }
  if (j.contains("detection")) cfg.detection = detection_from_json(j.at("detection"));
  cfg.seed = j.value("seed", 0ull);
  return cfg;
}

namespace {

json chsh_to_json(const ChshResult& r) {
  return json{{"settings_pol_rad", json::array({r.settings.a1, r.settings.a2, r.settings.b1,
                                                r.settings.b2})},
              {"correlations", json::array({r.correlations[0], r.correlations[1],
                                            r.correlations[2], r.correlations[3]})},
              {"s_value", r.s_value},
              {"s_std", r.s_std},
              {"variant", r.variant}};
}

json visibility_to_json(const VisibilityResult& v) {
  return json{{"basis", v.basis_label},
              {"c_max", v.c_max},
              {"c_min", v.c_min},
              {"visibility", v.visibility},
              {"sigma_visibility", v.sigma_visibility}};
}

json matrix_part_json(const Mat4& m, bool real_part) {
  json rows = json::array();
  for (int i = 0; i < 4; ++i) {
    json row = json::array();
    for (int j = 0; j < 4; ++j) row.push_back(real_part ? m(i, j).real() : m(i, j).imag());
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

json run_characterize(const CharacterizeConfig& cfg, const std::filesystem::path& out_dir,
                      const std::string& config_hash) {
  std::filesystem::create_directories(out_dir);
  const BiphotonDensity rho = depolarize(bell_phi_plus(), cfg.visibility);
  const CharacterizationReport rep = simulate_characterization(rho, cfg.detection, cfg.seed);

  write_sweep_csv(out_dir / "fringe_h.csv", rep.fringe_h);
  write_sweep_meta(out_dir / "fringe_h.meta.json", rep.fringe_h, "fringe_h.csv", config_hash);
  write_sweep_csv(out_dir / "fringe_d.csv", rep.fringe_d);
  write_sweep_meta(out_dir / "fringe_d.meta.json", rep.fringe_d, "fringe_d.csv", config_hash);
  write_tomography_csv(out_dir / "tomography_counts.csv", rep.tomo_counts);

  {
    std::ostringstream chsh_csv;
    chsh_csv << "alice_pol_rad,bob_pol_rad,tt,tr,rt,rr,correlation\n";
    const ChshResult& ch = rep.chsh_result;
    const std::array<std::pair<double, double>, 4> pairs{
        std::pair{ch.settings.a1, ch.settings.b1}, std::pair{ch.settings.a1, ch.settings.b2},
        std::pair{ch.settings.a2, ch.settings.b1}, std::pair{ch.settings.a2, ch.settings.b2}};
    for (int i = 0; i < 4; ++i) {
      chsh_csv << format_double(pairs[i].first) << ',' << format_double(pairs[i].second);
      for (int j = 0; j < 4; ++j) chsh_csv << ',' << format_double(ch.setting_counts[i][j]);
      chsh_csv << ',' << format_double(ch.correlations[i]) << '\n';
    }
    write_text_file(out_dir / "chsh.csv", chsh_csv.str());
  }

  json rho_j = rho_to_json(rep.tomo.rho);
  rho_j["config_hash"] = config_hash;
  rho_j["seed"] = cfg.seed;
  write_text_file(out_dir / "rho.json", rho_j.dump(2) + "\n");

  json report{{"schema_version", report_schema_version},
              {"config_hash", config_hash},
              {"seed", cfg.seed},
              {"source_visibility", cfg.visibility},
              {"visibility_h", visibility_to_json(rep.vis_h)},
              {"visibility_d", visibility_to_json(rep.vis_d)},
              {"chsh", chsh_to_json(rep.chsh_result)},
              {"tomography", json{{"fidelity_to_phi_plus", rep.tomo.fidelity_to_target},
                                  {"log_likelihood", rep.tomo.log_likelihood},
                                  {"iterations", rep.tomo.iterations},
                                  {"rho_real", matrix_part_json(rep.tomo.rho, true)},
                                  {"rho_imag", matrix_part_json(rep.tomo.rho, false)}}},
              {"files", json::array({"fringe_h.csv", "fringe_d.csv", "tomography_counts.csv",
                                     "rho.json"})}};
  write_text_file(out_dir / "characterization_report.json", report.dump(2) + "\n");
  return report;
}

Table1Config table1_from_json(const json& j) {
  Table1Config cfg;
  if (j.contains("samples")) {
    for (const json& s : j.at("samples")) {
      Table1SampleSpec spec;
      spec.name = s.value("name", "sample");
      spec.delta_rad = s.at("delta_rad").get<double>();
      spec.delta_std_rad = s.value("delta_std_rad", spec.delta_rad);
      cfg.samples.push_back(spec);
    }
  } else {
    cfg.samples.push_back({"hwp", 3.1341, 3.1341});
    cfg.samples.push_back({"qwp", 1.56, 1.56});
  }
  cfg.repetitions = j.value("repetitions", 15);
  if (cfg.repetitions < 2) throw std::invalid_argument("table1 needs repetitions >= 2");
  if (j.contains("axis_schedule_deg")) {
    cfg.axis_schedule_rad = degrees_to_radians(j.at("axis_schedule_deg").get<std::vector<double>>());
  } else {
    for (int d = 10; d <= 170; d += 10) {
      if (d == 90) continue;  // retardance-blind axis for the H-base cases
      cfg.axis_schedule_rad.push_back(deg_to_rad(static_cast<double>(d)));
    }
  }
  if (j.contains("detection")) {
    cfg.detection = detection_from_json(j.at("detection"));
  }
  if (j.contains("classical_detection")) {
    cfg.classical_detection = detection_from_json(j.at("classical_detection"));
  } else {
    // Budget-matched default: the classical singles rate equals the quantum
    // peak coincidence rate, so the two columns compare at equal counts with
    // their own background floors.
    cfg.classical_detection = cfg.detection;
    cfg.classical_detection.singles_rate_classical_cps =
        0.5 * cfg.detection.pair_rate_cps * cfg.detection.efficiency_signal *
        cfg.detection.efficiency_idler;
  }
  cfg.sweep_points = j.value("sweep_points", 18);
  cfg.seed = j.value("seed", 0ull);
  return cfg;
}

namespace {

struct Table1Case {
  std::string name;
  Mode mode;
  bool compensator;
  FitModel model;
  double theta_long_rad;
};

ExperimentConfig case_experiment(const Table1Case& c, const Table1Config& cfg,
                                 const Table1SampleSpec& sample, double theta_rad) {
  ExperimentConfig e;
  e.mode = c.mode;
  e.compensator = c.compensator;
  e.sample = {theta_rad, sample.delta_rad};
  e.detection = c.mode == Mode::quantum ? cfg.detection : cfg.classical_detection;
  if (c.mode == Mode::quantum) {
    e.parameter = SweptParameter::idler_hwp;
    e.signal_hwp_rad = 0.0;
    for (int k = 0; k < cfg.sweep_points; ++k) {
      e.angles_rad.push_back(k * 0.5 * pi / cfg.sweep_points);
    }
  } else {
    e.parameter = SweptParameter::analyzer;
    e.polarizer_rad = 0.5 * pi;
    for (int k = 0; k < cfg.sweep_points; ++k) {
      e.angles_rad.push_back(k * pi / cfg.sweep_points);
    }
  }
  return e;
}

FitConfig case_fit(const Table1Case& c, const Table1SampleSpec& sample,
                   const ExperimentConfig& e, double theta_rad) {
  FitConfig f;
  f.model = c.model;
  f.signal_hwp_rad = 0.0;
  f.polarizer_rad = 0.5 * pi;
  f.theta_rad = theta_rad;
  f.classical_compensator = c.compensator;
  f.initial_delta_rad = sample.delta_std_rad;
  f.initial_scale = true_scale(e);
  return f;
}

json summary_json(const AggregateSummary& s) {
  return json{{"n", s.n},
              {"mean_delta_rad", s.mean_delta},
              {"std_delta_rad", s.std_delta},
              {"rel_error_mean", s.mean_rel_error},
              {"rel_error_std", s.std_rel_error}};
}

}  // namespace

json run_table1(const Table1Config& cfg, const std::string& config_hash) {
  const std::array<Table1Case, 3> cases{
      Table1Case{"quantum_no_compensator", Mode::quantum, false, FitModel::no_compensator,
                 deg_to_rad(22.5)},
      Table1Case{"quantum_compensator", Mode::quantum, true, FitModel::compensator,
                 deg_to_rad(45.0)},
      Table1Case{"classical_compensator", Mode::classical, true, FitModel::classical_psa,
                 deg_to_rad(45.0)}};

  json out{{"schema_version", report_schema_version},
           {"config_hash", config_hash},
           {"seed", cfg.seed},
           {"note", "All values are simulated from the configured source, detection, and "
                    "fitting models; they are not hardware measurements."},
           {"delta_unit", "rad"}};
  json case_rows = json::array();

  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const Table1Case& c = cases[ci];
    json samples = json::array();
    for (std::size_t si = 0; si < cfg.samples.size(); ++si) {
      const Table1SampleSpec& sample = cfg.samples[si];
      const std::uint64_t cell_seed =
          splitmix64(cfg.seed + 0x1000 * (ci + 1) + 0x10 * (si + 1));
      json cell{{"name", sample.name}, {"delta_std_rad", sample.delta_std_rad}};

      // Long-duration: repeated runs at a fixed axis.
      try {
        const ExperimentConfig e = case_experiment(c, cfg, sample, c.theta_long_rad);
        const FitConfig f = case_fit(c, sample, e, c.theta_long_rad);
        const SweepPlan plan = plan_from_experiment(e);
        std::vector<FitResult> fits;
        SweepDataset first_ds;
        for (int r = 0; r < cfg.repetitions; ++r) {
          const SweepDataset ds =
              run_sweep(plan, e.sample, e.detection, repetition_seed(cell_seed, r));
          if (r == 0) first_ds = ds;
          const FitResult fr = fit_retardance(ds, f);
          if (fr.status == FitStatus::converged) fits.push_back(fr);
        }
        if (fits.size() < 2) throw std::runtime_error("fewer than 2 usable fits");
        cell["long_duration"] = summary_json(aggregate(fits, sample.delta_std_rad));
        // Initial-condition dependence, probed on the first dataset by
        // perturbing the initial scale guess.
        const SensitivityReport sens = sensitivity_scan(first_ds, f);
        cell["initial_condition_dependent"] = sens.dependent;
        cell["sensitivity"] = sensitivity_to_json(sens);
      } catch (const std::exception& ex) {
        cell["long_duration"] = json{{"status", "failed"}, {"error", ex.what()}};
      }

      // Varying axes: one run per scheduled axis angle.
      try {
        std::vector<FitResult> fits;
        int idx = 0;
        for (double theta : cfg.axis_schedule_rad) {
          const ExperimentConfig e = case_experiment(c, cfg, sample, theta);
          const FitConfig f = case_fit(c, sample, e, theta);
          const SweepPlan plan = plan_from_experiment(e);
          const SweepDataset ds =
              run_sweep(plan, e.sample, e.detection, repetition_seed(cell_seed ^ 0xA5A5, idx));
          const FitResult fr = fit_retardance(ds, f);
          if (fr.status == FitStatus::converged) fits.push_back(fr);
          ++idx;
        }
        if (fits.size() < 2) throw std::runtime_error("fewer than 2 usable fits");
        json axes = summary_json(aggregate(fits, sample.delta_std_rad));
        axes["spread_label"] = "std over sample axes";
        cell["varying_axes"] = axes;
      } catch (const std::exception& ex) {
        cell["varying_axes"] = json{{"status", "failed"}, {"error", ex.what()}};
      }

      samples.push_back(cell);
    }
    case_rows.push_back(json{{"case", c.name}, {"samples", samples}});
  }
  out["cases"] = case_rows;
  return out;
}

std::string table1_text(const json& report) {
  std::ostringstream out;
  out << "Retardance comparison (simulated)\n";
  out << "config " << report.value("config_hash", "") << "  seed " << report.value("seed", 0ull)
      << "\n";
  out << "note: " << report.value("note", "") << "\n\n";
  char line[256];
  for (const json& c : report.at("cases")) {
    out << c.at("case").get<std::string>() << "\n";
    for (const json& s : c.at("samples")) {
      const std::string name = s.value("name", "?");
      auto cellline = [&](const char* label, const json& cell) {
        if (cell.contains("status")) {
          std::snprintf(line, sizeof(line), "  %-6s %-22s failed: %s\n", name.c_str(), label,
                        cell.value("error", "").c_str());
        } else {
          std::snprintf(line, sizeof(line),
                        "  %-6s %-22s %9.4f +/- %7.4f rad   rel err %8.4f%% +/- %7.4f%%\n",
                        name.c_str(), label, cell.value("mean_delta_rad", 0.0),
                        cell.value("std_delta_rad", 0.0), 100.0 * cell.value("rel_error_mean", 0.0),
                        100.0 * cell.value("rel_error_std", 0.0));
        }
        out << line;
      };
      if (s.contains("long_duration")) cellline("long duration", s.at("long_duration"));
      if (s.contains("varying_axes")) cellline("varying axes", s.at("varying_axes"));
      if (s.contains("initial_condition_dependent")) {
        std::snprintf(line, sizeof(line), "  %-6s %-22s %s\n", name.c_str(),
                      "initial-cond dependent",
                      s.at("initial_condition_dependent").get<bool>() ? "yes" : "no");
        out << line;
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace qell
