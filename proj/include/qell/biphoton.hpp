#pragma once

#include "qell/polcore.hpp"

#include <Eigen/Eigenvalues>

#include <utility>

namespace qell {

// Two-photon amplitudes are ordered (HH, HV, VH, VV) with the signal photon
// as the left tensor factor, fixed project-wide.
using Vec4 = Eigen::Vector4cd;
using Mat4 = Eigen::Matrix4cd;
using BiphotonState = Vec4;
using BiphotonDensity = Mat4;

enum class Port { transmitted, reflected };

/// One analyzer arm: HWP angle followed by a PBS port.
struct ProjectorSetting {
  double hwp_rad = 0.0;
  Port port = Port::transmitted;
};

/// Joint analyzer: signal and idler arms plus an optional quarter-wave
/// compensator in the idler arm placed after the sample.
struct AnalyzerConfig {
  ProjectorSetting signal;
  ProjectorSetting idler;
  bool compensator_present = false;
  double compensator_angle_rad = 0.0;
};

/// (|HV> + |VH>) / sqrt(2).
inline BiphotonState bell_phi_plus() {
  const double r = 1.0 / std::sqrt(2.0);
  return BiphotonState(Complex(0, 0), Complex(r, 0), Complex(r, 0), Complex(0, 0));
}

inline Mat4 kron2(const Mat2& a, const Mat2& b) {
  Mat4 k;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      k.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return k;
}

inline BiphotonState normalized_state(const BiphotonState& s) {
  const double n = s.norm();
  if (!(n > 0.0)) throw std::invalid_argument("biphoton state has zero norm");
  return s / n;
}

/// Evolve the pair by local unitaries: (J_s tensor J_i) |state>.
inline BiphotonState apply_local(const BiphotonState& state, const Mat2& j_signal,
                                 const Mat2& j_idler) {
  if (!is_unitary(j_signal) || !is_unitary(j_idler)) {
    throw std::invalid_argument("apply_local: operators must be unitary");
  }
  return normalized_state(kron2(j_signal, j_idler) * state);
}

/// Single-photon projector behind an HWP at angle h and a PBS port.
/// Transmitted port projects onto (cos 2h, sin 2h).
inline Mat2 projector(const ProjectorSetting& s) {
  const double c = std::cos(2.0 * s.hwp_rad);
  const double n = std::sin(2.0 * s.hwp_rad);
  Vec2 d;
  if (s.port == Port::transmitted) {
    d << Complex(c, 0), Complex(n, 0);
  } else {
    d << Complex(-n, 0), Complex(c, 0);
  }
  return d * d.adjoint();
}

inline Mat4 joint_projection_operator(const AnalyzerConfig& cfg) {
  Mat2 e_i = projector(cfg.idler);
  if (cfg.compensator_present) {
    const Mat2 c = qwp(cfg.compensator_angle_rad);
    e_i = c.adjoint() * e_i * c;
  }
  return kron2(projector(cfg.signal), e_i);
}

/// Coincidence probability tr[(E_s tensor E_i) rho] for a pure state.
inline double coincidence_probability(const BiphotonState& state, const AnalyzerConfig& cfg) {
  const BiphotonState s = normalized_state(state);
  const Complex v = s.adjoint() * joint_projection_operator(cfg) * s;
  return std::clamp(v.real(), 0.0, 1.0);
}

inline double coincidence_probability(const BiphotonDensity& rho, const AnalyzerConfig& cfg) {
  const Complex v = (joint_projection_operator(cfg) * rho).trace();
  return std::clamp(v.real(), 0.0, 1.0);
}

inline BiphotonDensity density_of(const BiphotonState& state) {
  const BiphotonState s = normalized_state(state);
  return s * s.adjoint();
}

/// Werner channel: rho = v |psi><psi| + (1 - v) I/4.
inline BiphotonDensity depolarize(const BiphotonState& state, double visibility) {
  if (!(visibility >= 0.0 && visibility <= 1.0)) {
    throw std::invalid_argument("depolarize: visibility must be in [0, 1]");
  }
  return visibility * density_of(state) +
         (1.0 - visibility) * 0.25 * BiphotonDensity::Identity();
}

inline bool is_valid_density(const BiphotonDensity& rho, double hermit_tol = 1e-10,
                             double trace_tol = 1e-10, double eig_tol = 1e-9) {
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > hermit_tol) return false;
  if (std::abs(rho.trace().real() - 1.0) > trace_tol ||
      std::abs(rho.trace().imag()) > trace_tol)
    return false;
  Eigen::SelfAdjointEigenSolver<Mat4> es(rho);
  return es.eigenvalues().minCoeff() >= -eig_tol;
}

// Closed-form coincidence models, as fractions of the nominal count scale.
// Conventions (verified against the first-principles engine above):
//   probability = 0.5 * model_no_compensator(...)
//   probability = 1.0 * model_compensator(...) = 1.0 * model_senarmont(...)
// The one free scale per family is a fit parameter downstream, so only the
// internal consistency matters.

/// No-compensator model and its delta derivative:
///   f = 1/4 [2 - (1+cos d) cos(4(h_s+h_i)) - (1-cos d) cos(4(h_i-h_s-theta))]
inline std::pair<double, double> model_no_compensator(double h_s, double h_i, double theta,
                                                      double delta) {
  const double a = 4.0 * (h_s + h_i);
  const double b = 4.0 * (h_i - h_s - theta);
  const double cd = std::cos(delta);
  const double value =
      0.25 * (2.0 - (1.0 + cd) * std::cos(a) - (1.0 - cd) * std::cos(b));
  const double deriv = 0.25 * std::sin(delta) * (std::cos(a) - std::cos(b));
  return {value, deriv};
}

/// Compensator model (ideal quarter-wave plate at 0 in the idler arm):
///   f = 1/4 [1 - cos 4h_i (cos 4h_s cos^2(d/2) + cos(4h_s+4theta) sin^2(d/2))
///            - sin 4h_i sin(4h_s+2theta) sin d]
inline std::pair<double, double> model_compensator(double h_s, double h_i, double theta,
                                                   double delta) {
  const double c2 = std::cos(0.5 * delta);
  const double s2 = std::sin(0.5 * delta);
  const double c4hi = std::cos(4.0 * h_i);
  const double s4hi = std::sin(4.0 * h_i);
  const double value =
      0.25 * (1.0 -
              c4hi * (std::cos(4.0 * h_s) * c2 * c2 +
                      std::cos(4.0 * h_s + 4.0 * theta) * s2 * s2) -
              s4hi * std::sin(4.0 * h_s + 2.0 * theta) * std::sin(delta));
  const double deriv = 0.25 * std::sin(4.0 * h_s + 2.0 * theta) *
                       (-std::cos(delta) * s4hi + c4hi * std::sin(delta) * std::sin(2.0 * theta));
  return {value, deriv};
}

/// Senarmont special case (h_s = 0, theta = pi/4):
///   f = 1/2 sin^2(d/2 - 2 h_i),  df/dd = 1/4 sin(d - 4 h_i)
inline std::pair<double, double> model_senarmont(double h_i, double delta) {
  const double s = std::sin(0.5 * delta - 2.0 * h_i);
  return {0.5 * s * s, 0.25 * std::sin(delta - 4.0 * h_i)};
}

/// A sweep of the idler HWP carries retardance information only when
/// 4 h_s + 2 theta is not a multiple of pi.
inline bool sweep_validity(double h_s, double theta) {
  return wrapped_distance(4.0 * h_s + 2.0 * theta, 0.0, pi) > 1e-9;
}

}  // namespace qell
