#pragma once

#include "qell/biphoton.hpp"
#include "qell/classical_psa.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace qell {

/// Detector and source parameters shared by the quantum and classical modes.
struct DetectionModel {
  double pair_rate_cps = 2.0e4;
  double efficiency_signal = 0.6;
  double efficiency_idler = 0.6;
  double dark_rate_signal_cps = 360.0;
  double dark_rate_idler_cps = 360.0;
  double coincidence_window_s = 1e-9;
  double integration_time_s = 10.0;
  double singles_rate_classical_cps = 2.1e5;
  bool shot_noise = true;

  void validate() const;

  /// Accidental coincidence rate R_s R_i tau, singles including dark counts.
  double accidental_rate_cps() const {
    const double rs = pair_rate_cps * efficiency_signal + dark_rate_signal_cps;
    const double ri = pair_rate_cps * efficiency_idler + dark_rate_idler_cps;
    return rs * ri * coincidence_window_s;
  }
};

/// Expected coincidence counts over one integration for probability p:
/// pair_rate eta_s eta_i p T + accidentals T. Dark counts feed the
/// accidental term only; generated data never has it subtracted.
double expected_coincidences(double p, const DetectionModel& model);

/// Expected classical singles counts for an intensity fraction in [0, 1]:
/// singles_rate f T + dark T (classical mode uses the idler-arm detector).
double expected_classical_counts(double intensity_fraction, const DetectionModel& model);

/// Poisson variate, deterministic for a fixed (seed, draw_index).
long long sample_counts(double mean, std::uint64_t seed, std::uint64_t draw_index = 0);

enum class Mode { quantum, classical };
enum class SweptParameter { idler_hwp, analyzer };

struct SampleSpec {
  double theta_rad = 0.0;
  double delta_rad = 0.0;
};

struct SweepPlan {
  Mode mode = Mode::quantum;
  SweptParameter parameter = SweptParameter::idler_hwp;
  std::vector<double> angles_rad;  // >= 4 distinct values, order preserved
  // quantum fixed settings (idler HWP angle is taken from the sweep)
  AnalyzerConfig analyzer;
  // classical fixed settings (analyzer angle is taken from the sweep)
  PsaConfig psa;

  void validate() const;
};

struct SweepRecord {
  double angle_rad = 0.0;
  double counts = 0.0;  // integer-valued when shot noise is on; exact means otherwise
  double integration_s = 0.0;
};

/// One sweep plus the metadata needed to reproduce it bit-exactly.
struct SweepDataset {
  std::vector<SweepRecord> records;
  Mode mode = Mode::quantum;
  SweptParameter parameter = SweptParameter::idler_hwp;
  DetectionModel detection;
  std::uint64_t seed = 0;
  bool shot_noise = true;
  bool has_ground_truth = false;
  SampleSpec ground_truth;
  AnalyzerConfig analyzer;
  PsaConfig psa;
};

/// Generate a sweep dataset. Quantum records come from the first-principles
/// coincidence engine, classical records from the Jones chain. Quantum plans
/// that fail sweep_validity are refused unless override_validity is set.
/// Record k draws from the RNG stream (seed, k), so results are independent
/// of evaluation order.
SweepDataset run_sweep(const SweepPlan& plan, const SampleSpec& sample,
                       const DetectionModel& model, std::uint64_t seed,
                       bool override_validity = false);

/// Expected (pre-sampling) counts for one record of the plan.
double sweep_mean_counts(const SweepPlan& plan, const SampleSpec& sample,
                         const DetectionModel& model, double angle_rad);

}  // namespace qell
