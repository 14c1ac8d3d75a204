#pragma once

#include "qell/polcore.hpp"

#include <utility>

namespace qell {

/// One-way Polarizer-Sample-Analyzer chain. The polarizer output is a unit
/// amplitude linear state at angle p; the analyzer projects onto angle a.
/// The compensator, when present, is a quarter-wave retarder at angle 0
/// placed after the sample.
struct PsaConfig {
  double polarizer_rad = 0.0;
  double analyzer_rad = 0.0;
  double theta_rad = 0.0;
  double delta_rad = 0.0;
  bool compensator_present = false;
};

/// Intensity fraction and its delta derivative from the Jones chain
/// A(a) [C] S(theta, delta) P(p), evaluated at the given analyzer angle.
inline std::pair<double, double> psa_intensity_d(const PsaConfig& cfg, double analyzer_rad) {
  const Vec2 in = linear_polarization(cfg.polarizer_rad);
  const Vec2 out = linear_polarization(analyzer_rad);
  Vec2 v = retarder(cfg.theta_rad, cfg.delta_rad) * in;
  Vec2 dv = retarder_delta_derivative(cfg.theta_rad, cfg.delta_rad) * in;
  if (cfg.compensator_present) {
    const Mat2 c = qwp(0.0);
    v = c * v;
    dv = c * dv;
  }
  const Complex e = out.dot(v);
  const Complex de = out.dot(dv);
  const double f = std::norm(e);
  const double df = 2.0 * (std::conj(e) * de).real();
  return {f, df};
}

inline double psa_intensity(const PsaConfig& cfg) {
  return psa_intensity_d(cfg, cfg.analyzer_rad).first;
}

/// Closed-form intensity fraction of the compensator-free PSA:
///   f = 1/4 [2 + (1+cos d) cos(2(a-p)) + (1-cos d) cos(2(a+p-2 theta))]
inline double psa_closed_form(double p, double a, double theta, double delta) {
  const double cd = std::cos(delta);
  return 0.25 * (2.0 + (1.0 + cd) * std::cos(2.0 * (a - p)) +
                 (1.0 - cd) * std::cos(2.0 * (a + p - 2.0 * theta)));
}

struct PolarizerAngles {
  double polarizer_rad = 0.0;
  double analyzer_rad = 0.0;
};

/// Variable substitution that maps the quantum HWP angles onto the classical
/// polarizer/analyzer pair: a = 2 h_i, p = pi/2 - 2 h_s.
inline PolarizerAngles quantum_classical_map(double h_s, double h_i) {
  return {0.5 * pi - 2.0 * h_s, 2.0 * h_i};
}

}  // namespace qell
