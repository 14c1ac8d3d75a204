#include "qell/detection.hpp"

#include "qell/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace qell {

void DetectionModel::validate() const {
  auto nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!nonneg(pair_rate_cps) || !nonneg(dark_rate_signal_cps) || !nonneg(dark_rate_idler_cps) ||
      !nonneg(singles_rate_classical_cps)) {
    throw std::invalid_argument("DetectionModel: rates must be finite and >= 0");
  }
  auto in01 = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  if (!in01(efficiency_signal) || !in01(efficiency_idler)) {
    throw std::invalid_argument("DetectionModel: efficiencies must be in [0, 1]");
  }
  // window 0 is the idealization with no accidental floor
  if (!(coincidence_window_s >= 0.0) || !(integration_time_s > 0.0)) {
    throw std::invalid_argument(
        "DetectionModel: window must be >= 0 and integration time > 0");
  }
}

double expected_coincidences(double p, const DetectionModel& model) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("expected_coincidences: probability must be in [0, 1]");
  }
  model.validate();
  const double true_rate =
      model.pair_rate_cps * model.efficiency_signal * model.efficiency_idler * p;
  return (true_rate + model.accidental_rate_cps()) * model.integration_time_s;
}

double expected_classical_counts(double intensity_fraction, const DetectionModel& model) {
  if (!(intensity_fraction >= 0.0 && intensity_fraction <= 1.0)) {
    throw std::invalid_argument("expected_classical_counts: fraction must be in [0, 1]");
  }
  model.validate();
  return (model.singles_rate_classical_cps * intensity_fraction + model.dark_rate_idler_cps) *
         model.integration_time_s;
}

long long sample_counts(double mean, std::uint64_t seed, std::uint64_t draw_index) {
  if (!(mean >= 0.0)) throw std::invalid_argument("sample_counts: mean must be >= 0");
  CounterRng rng(seed, draw_index);
  return rng.poisson(mean);
}

void SweepPlan::validate() const {
  if (angles_rad.size() < 4) {
    throw std::invalid_argument("SweepPlan: need at least 4 sweep angles");
  }
  std::set<double> distinct(angles_rad.begin(), angles_rad.end());
  if (distinct.size() < 4) {
    throw std::invalid_argument("SweepPlan: need at least 4 distinct sweep angles");
  }
  for (double a : angles_rad) {
    if (!std::isfinite(a)) throw std::invalid_argument("SweepPlan: angles must be finite");
  }
  if (mode == Mode::quantum && parameter != SweptParameter::idler_hwp) {
    throw std::invalid_argument("SweepPlan: quantum sweeps rotate the idler HWP");
  }
  if (mode == Mode::classical && parameter != SweptParameter::analyzer) {
    throw std::invalid_argument("SweepPlan: classical sweeps rotate the analyzer");
  }
}

double sweep_mean_counts(const SweepPlan& plan, const SampleSpec& sample,
                         const DetectionModel& model, double angle_rad) {
  if (plan.mode == Mode::quantum) {
    const BiphotonState after =
        apply_local(bell_phi_plus(), Mat2::Identity(), retarder(sample.theta_rad, sample.delta_rad));
    AnalyzerConfig cfg = plan.analyzer;
    cfg.idler.hwp_rad = angle_rad;
    return expected_coincidences(coincidence_probability(after, cfg), model);
  }
  PsaConfig cfg = plan.psa;
  cfg.theta_rad = sample.theta_rad;
  cfg.delta_rad = sample.delta_rad;
  cfg.analyzer_rad = angle_rad;
  return expected_classical_counts(psa_intensity(cfg), model);
}

SweepDataset run_sweep(const SweepPlan& plan, const SampleSpec& sample,
                       const DetectionModel& model, std::uint64_t seed,
                       bool override_validity) {
  plan.validate();
  model.validate();
  if (plan.mode == Mode::quantum && !override_validity &&
      !sweep_validity(plan.analyzer.signal.hwp_rad, sample.theta_rad)) {
    throw std::invalid_argument(
        "run_sweep: counts at this (signal HWP, sample axis) setting do not depend on the "
        "retardance (4 h_s + 2 theta is a multiple of pi); pass override_validity to force");
  }

  SweepDataset out;
  out.mode = plan.mode;
  out.parameter = plan.parameter;
  out.detection = model;
  out.seed = seed;
  out.shot_noise = model.shot_noise;
  out.has_ground_truth = true;
  out.ground_truth = sample;
  out.analyzer = plan.analyzer;
  out.psa = plan.psa;
  out.psa.theta_rad = sample.theta_rad;
  out.psa.delta_rad = sample.delta_rad;

  out.records.resize(plan.angles_rad.size());
  for (std::size_t k = 0; k < plan.angles_rad.size(); ++k) {
    const double angle = plan.angles_rad[k];
    const double mean = sweep_mean_counts(plan, sample, model, angle);
    SweepRecord rec;
    rec.angle_rad = angle;
    rec.integration_s = model.integration_time_s;
    rec.counts = model.shot_noise
                     ? static_cast<double>(sample_counts(mean, seed, static_cast<std::uint64_t>(k)))
                     : mean;
    out.records[k] = rec;
  }
  return out;
}

}  // namespace qell
