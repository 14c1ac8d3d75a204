#pragma once

#include "qell/detection.hpp"
#include "qell/errors.hpp"
#include "qell/estimation.hpp"

#include <array>
#include <string>

namespace qell {

struct VisibilityResult {
  std::string basis_label;
  double c_max = 0.0;
  double c_min = 0.0;
  double visibility = 0.0;
  double sigma_visibility = 0.0;
};

/// Fringe contrast (C_max - C_min) / (C_max + C_min) from a fitted
/// offset + amplitude sinusoid; backgrounds are not subtracted.
VisibilityResult visibility(const SweepDataset& curve, const std::string& basis_label = "");

/// Analyzer polarization angles (the HWPs sit at half these values).
struct ChshSettings {
  double a1 = 0.0;
  double a2 = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
};

/// (0, 45) x (22.5, 67.5) degrees in polarization space.
ChshSettings canonical_chsh_settings();

struct ChshResult {
  ChshSettings settings;
  std::array<double, 4> correlations{};  // E(a1,b1), E(a1,b2), E(a2,b1), E(a2,b2)
  // per-setting port counts (tt, tr, rt, rr); exact probabilities when not sampled
  std::array<std::array<double, 4>, 4> setting_counts{};
  double s_value = 0.0;
  double s_std = 0.0;
  int variant = 0;  // index of the term carrying the minus sign
};

/// CHSH S from the four correlation functions; the sign placement is chosen
/// to maximize |S| over the four standard CHSH combinations, each of which
/// obeys the classical bound 2 and the Tsirelson bound 2 sqrt(2).
/// counts_per_setting <= 0 evaluates probabilities exactly (no sampling).
ChshResult chsh(const BiphotonDensity& rho, const ChshSettings& settings,
                double counts_per_setting, std::uint64_t seed);

/// <psi| rho |psi> for a pure target.
double fidelity(const BiphotonDensity& rho, const BiphotonState& target);

/// Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
double fidelity(const BiphotonDensity& rho, const BiphotonDensity& sigma);

/// Single-photon analysis bases, in table order.
enum class Basis1 { H, V, D, A, R, L };
constexpr std::array<Basis1, 6> tomography_bases{Basis1::H, Basis1::V, Basis1::D,
                                                 Basis1::A, Basis1::R, Basis1::L};
const char* basis_name(Basis1 b);
Basis1 basis_from_name(const std::string& name);
Vec2 basis_ket(Basis1 b);

/// Counts of the 36 joint projections; rows index the signal basis in
/// table order, columns the idler basis.
struct TomographyCounts {
  Eigen::Matrix<double, 6, 6> counts = Eigen::Matrix<double, 6, 6>::Zero();
};

TomographyCounts simulate_tomography_counts(const BiphotonDensity& rho,
                                            const DetectionModel& model, std::uint64_t seed);

struct TomographyResult {
  BiphotonDensity rho = BiphotonDensity::Zero();
  double fidelity_to_target = 0.0;
  double log_likelihood = 0.0;
  int iterations = 0;
};

/// Linear-inversion seed followed by iterative maximum-likelihood
/// refinement on the physical (PSD, trace-1) cone. Deterministic given the
/// counts. Throws IllConditionedError when the 36 settings do not span the
/// state space (missing settings).
TomographyResult tomography(const TomographyCounts& counts,
                            const BiphotonState& target = bell_phi_plus());

struct CharacterizationReport {
  VisibilityResult vis_h;
  VisibilityResult vis_d;
  ChshResult chsh_result;
  TomographyResult tomo;
  SweepDataset fringe_h;
  SweepDataset fringe_d;
  TomographyCounts tomo_counts;
  std::uint64_t seed = 0;
};

/// One-call source characterization: H- and D-base fringe sweeps, CHSH, and
/// the 36-setting tomography table, all generated from rho with per-block
/// RNG streams and then analyzed.
CharacterizationReport simulate_characterization(const BiphotonDensity& rho,
                                                 const DetectionModel& model,
                                                 std::uint64_t seed);

}  // namespace qell
