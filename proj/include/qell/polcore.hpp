#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

namespace qell {

using Complex = std::complex<double>;
using Mat2 = Eigen::Matrix2cd;
using Vec2 = Eigen::Vector2cd;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Wrap x into [0, period).
inline double wrap_angle(double x, double period = two_pi) {
  double r = std::fmod(x, period);
  if (r < 0.0) r += period;
  return r;
}

/// Shortest distance between a and b on a circle of the given period.
inline double wrapped_distance(double a, double b, double period = two_pi) {
  const double d = wrap_angle(a - b, period);
  return std::min(d, period - d);
}

inline double deg_to_rad(double deg) { return deg * pi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / pi; }

/// Rotation matrix [[cos a, sin a], [-sin a, cos a]].
inline Mat2 rotation(double alpha_rad) {
  const double c = std::cos(alpha_rad);
  const double s = std::sin(alpha_rad);
  Mat2 m;
  m << Complex(c, 0), Complex(s, 0), Complex(-s, 0), Complex(c, 0);
  return m;
}

/// Linear retarder with slow axis at theta and phase delta on the slow
/// component: R(-theta) * diag(1, e^{i delta}) * R(theta).
/// No global-phase normalization is applied.
inline Mat2 retarder(double theta_rad, double delta_rad) {
  const Complex e = std::exp(Complex(0.0, delta_rad));
  Mat2 d;
  d << Complex(1, 0), Complex(0, 0), Complex(0, 0), e;
  return rotation(-theta_rad) * d * rotation(theta_rad);
}

/// d/d(delta) of retarder(theta, delta).
inline Mat2 retarder_delta_derivative(double theta_rad, double delta_rad) {
  const Complex e = Complex(0.0, 1.0) * std::exp(Complex(0.0, delta_rad));
  Mat2 d;
  d << Complex(0, 0), Complex(0, 0), Complex(0, 0), e;
  return rotation(-theta_rad) * d * rotation(theta_rad);
}

inline Mat2 hwp(double theta_rad) { return retarder(theta_rad, pi); }
inline Mat2 qwp(double theta_rad) { return retarder(theta_rad, 0.5 * pi); }

/// Jones vector of linear polarization at the given angle from H.
inline Vec2 linear_polarization(double angle_rad) {
  return Vec2(Complex(std::cos(angle_rad), 0), Complex(std::sin(angle_rad), 0));
}

/// Birefringent sample described by its physical parameters.
struct PhysicalSample {
  double wavelength_nm = 808.0;
  double birefringence = 0.0;  // |n_e - n_o|
  double thickness_nm = 0.0;
  double axis_rad = 0.0;
};

/// delta = 2 pi |n_e - n_o| d / lambda, unwrapped (callers wrap for comparisons).
inline double retardance_of(const PhysicalSample& s) {
  if (!(s.wavelength_nm > 0.0)) {
    throw std::invalid_argument("retardance_of: wavelength must be > 0");
  }
  if (s.birefringence < 0.0 || s.thickness_nm < 0.0) {
    throw std::invalid_argument("retardance_of: birefringence and thickness must be >= 0");
  }
  return two_pi * s.birefringence * s.thickness_nm / s.wavelength_nm;
}

inline bool is_unitary(const Mat2& u, double tol = 1e-10) {
  return ((u.adjoint() * u) - Mat2::Identity()).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace qell
