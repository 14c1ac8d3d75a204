#pragma once

#include "qell/io.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace qell {

/// One batch experiment: a sweep definition plus detection, fit, and
/// repetition settings. Angles are degrees in config files and radians here.
struct ExperimentConfig {
  Mode mode = Mode::quantum;
  bool compensator = false;
  SampleSpec sample;
  SweptParameter parameter = SweptParameter::idler_hwp;
  std::vector<double> angles_rad;
  double signal_hwp_rad = 0.0;
  double polarizer_rad = 0.0;
  double compensator_angle_rad = 0.0;
  DetectionModel detection;
  FitConfig fit;
  bool has_fit = false;
  int repetitions = 1;
  std::vector<double> axis_schedule_rad;
  std::uint64_t seed = 0;
  bool override_validity = false;
};

ExperimentConfig experiment_from_json(const json& j);
json experiment_to_json(const ExperimentConfig& cfg);

FitConfig fit_config_from_json(const json& j);

/// Seed for repetition `rep` of a run seeded with `seed`.
std::uint64_t repetition_seed(std::uint64_t seed, int rep);

SweepPlan plan_from_experiment(const ExperimentConfig& cfg);

/// True count scale (counts per unit model fraction) implied by a detection
/// model, i.e. the fit's scale parameter at truth.
double true_scale(const ExperimentConfig& cfg);

struct SimulateOutput {
  std::vector<std::filesystem::path> csv_paths;
  std::vector<std::filesystem::path> meta_paths;
  json summary;
};

/// `simulate`: writes sweep_###.csv + sweep_###.meta.json per repetition.
SimulateOutput run_simulate(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                            const std::string& config_hash);

struct FitCommandConfig {
  std::filesystem::path dataset_csv;
  std::filesystem::path dataset_meta;  // optional; empty means CSV only
  FitConfig fit;
  bool fit_given = false;
  std::optional<double> delta_std_rad;
  bool sensitivity = false;
  std::uint64_t seed = 0;
};

FitCommandConfig fit_command_from_json(const json& j);

/// `fit`: loads a dataset, fits it, and returns the report JSON.
json run_fit(const FitCommandConfig& cfg, const std::string& config_hash);

struct CharacterizeConfig {
  double visibility = 1.0;  // Werner parameter of the source state
  DetectionModel detection;
  std::uint64_t seed = 0;
};

CharacterizeConfig characterize_from_json(const json& j);

/// `characterize`: runs the source-characterization suite and writes fringe
/// CSVs, the CHSH table, the tomography count table, rho JSON, and a report.
json run_characterize(const CharacterizeConfig& cfg, const std::filesystem::path& out_dir,
                      const std::string& config_hash);

struct Table1SampleSpec {
  std::string name;
  double delta_rad = 0.0;
  double delta_std_rad = 0.0;
};

struct Table1Config {
  std::vector<Table1SampleSpec> samples;
  int repetitions = 15;
  std::vector<double> axis_schedule_rad;
  DetectionModel detection;            // quantum arms
  DetectionModel classical_detection;  // classical arm (budget-matched default)
  int sweep_points = 18;
  std::uint64_t seed = 0;
};

Table1Config table1_from_json(const json& j);

/// `table1`: simulates the three instrument configurations against each
/// sample and emits the comparison grid (long-duration and varying-axes
/// statistics, relative errors, initial-condition dependence flags).
json run_table1(const Table1Config& cfg, const std::string& config_hash);

std::string table1_text(const json& report);

}  // namespace qell
