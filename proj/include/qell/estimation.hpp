#pragma once

#include "qell/detection.hpp"

#include <optional>
#include <vector>

namespace qell {

enum class FitModel { no_compensator, compensator, senarmont, classical_psa };

enum class FitStatus { converged, non_convergence, degenerate_sweep };

/// Fitting protocol for one sweep. Fixed angles describe the non-swept
/// settings; the swept angle comes from the dataset records.
struct FitConfig {
  FitModel model = FitModel::senarmont;
  double signal_hwp_rad = 0.0;   // quantum families
  double polarizer_rad = 0.0;    // classical family
  double theta_rad = 0.0;        // sample axis (fixed, known)
  bool classical_compensator = true;
  std::optional<double> initial_delta_rad;
  std::optional<double> initial_scale;
  int max_iterations = 100;
  double convergence_tol = 1e-8;        // relative SSE improvement
  double scale_perturbation = 0.02;     // sensitivity scan half-range
  int scale_grid = 9;                   // sensitivity scan grid points
  // The scan flags dependence when the delta_hat spread across the assumed
  // count scales exceeds this fraction of the central estimate.
  double dependence_relative_floor = 0.005;
  bool poisson_weighting = false;

  void validate() const;
};

struct FitResult {
  double delta_hat_rad = 0.0;
  double scale_hat = 0.0;
  double residual_norm = 0.0;
  double std_error_delta = 0.0;
  double std_error_scale = 0.0;
  int iterations = 0;
  bool converged = false;
  FitStatus status = FitStatus::non_convergence;
};

struct SensitivityReport {
  std::vector<double> delta_hats;
  double spread = 0.0;          // max pairwise wrapped distance
  bool dependent = false;
  double sigma_delta_central = 0.0;
  double threshold = 0.0;
  int failures = 0;
};

/// Closed-form model fraction and its delta derivative at one sweep angle.
std::pair<double, double> fit_model_eval(const FitConfig& cfg, double angle_rad, double delta);

/// Least-squares fit of (delta, scale) to counts = scale * model(angle; delta)
/// by damped Gauss-Newton with analytic Jacobians. When no initial delta is
/// given, the fit multi-starts over 8 evenly spaced delta values plus a
/// linear-regression seed. delta_hat is wrapped to [0, 2pi); families whose
/// model is even in delta report the representative in [0, pi].
FitResult fit_retardance(const SweepDataset& data, const FitConfig& config);

/// Extremum-location estimator: fits offset + amplitude sinusoid (period
/// pi/2 in the swept HWP angle) by linear least squares and reads the
/// retardance off the fitted minimum, delta = 4 h_min mod 2pi.
FitResult senarmont_estimate(const SweepDataset& data);

/// Probes how the estimate leans on the assumed count scale: delta is refit
/// with the scale held at s0 (1 + g) for g on a symmetric grid of half-width
/// scale_perturbation, and the spread of delta_hat across the grid is
/// compared against the relative floor. The central fit keeps both
/// parameters free.
SensitivityReport sensitivity_scan(const SweepDataset& data, const FitConfig& config);

/// |delta_hat - delta_std| / delta_std with a wrapped numerator.
double relative_error(double delta_hat_rad, double delta_std_rad);

struct AggregateSummary {
  int n = 0;
  double mean_delta = 0.0;
  double std_delta = 0.0;
  double mean_rel_error = 0.0;
  double std_rel_error = 0.0;
};

/// Mean and sample standard deviation of delta_hat and of the relative
/// error against delta_std.
AggregateSummary aggregate(const std::vector<FitResult>& results, double delta_std_rad);

/// Linear least-squares fit of y = c0 + c1 cos(4x) + c2 sin(4x).
struct Sinusoid4Fit {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
  double sse = 0.0;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
};
Sinusoid4Fit fit_sinusoid4(const std::vector<double>& angles_rad,
                           const std::vector<double>& values);

}  // namespace qell
