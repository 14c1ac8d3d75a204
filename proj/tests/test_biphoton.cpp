#include "test_util.hpp"

#include "qell/biphoton.hpp"

#include <doctest.h>

using namespace qell;
using test::max_abs_diff;

namespace {

AnalyzerConfig both_transmitted(double h_s, double h_i, bool comp = false) {
  AnalyzerConfig cfg;
  cfg.signal = {h_s, Port::transmitted};
  cfg.idler = {h_i, Port::transmitted};
  cfg.compensator_present = comp;
  return cfg;
}

}  // namespace

TEST_CASE("bell state amplitudes") {
  const BiphotonState s = bell_phi_plus();
  CHECK(std::abs(s(0)) <= 1e-15);
  CHECK(s(1).real() == doctest::Approx(0.7071067811865475).epsilon(1e-12));
  CHECK(s(2).real() == doctest::Approx(0.7071067811865475).epsilon(1e-12));
  CHECK(std::abs(s(3)) <= 1e-15);
  CHECK(s.norm() == doctest::Approx(1.0).epsilon(1e-14));
  // <HH|phi+> = 0
  CHECK(coincidence_probability(s, both_transmitted(0.0, 0.0)) <= 1e-15);
}

TEST_CASE("local evolution basics") {
  const BiphotonState s = bell_phi_plus();
  const BiphotonState same = apply_local(s, Mat2::Identity(), Mat2::Identity());
  CHECK((same - s).norm() <= 1e-14);

  // HWP at 45 degrees in the idler arm swaps H and V there.
  const BiphotonState swapped = apply_local(s, Mat2::Identity(), hwp(0.25 * pi));
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(swapped(0) - Complex(r, 0)) <= 1e-12);
  CHECK(std::abs(swapped(1)) <= 1e-12);
  CHECK(std::abs(swapped(2)) <= 1e-12);
  CHECK(std::abs(swapped(3) - Complex(r, 0)) <= 1e-12);

  Mat2 not_unitary;
  not_unitary << Complex(1, 0), Complex(0, 0), Complex(0, 0), Complex(0, 0);
  CHECK_THROWS_AS(apply_local(s, Mat2::Identity(), not_unitary), std::invalid_argument);
}

TEST_CASE("sample evolution reproduces the closed-form amplitudes") {
  // (I x S)|phi+> = (A|HH> + B|HV> + C|VH> + D|VV>)/sqrt(2) with
  // A = D = -sin t cos t (e^{id} - 1), B = sin^2 t + e^{id} cos^2 t,
  // C = cos^2 t + e^{id} sin^2 t.
  CounterRng rng(21);
  for (int i = 0; i < 50; ++i) {
    const double t = test::uniform_angle(rng);
    const double d = test::uniform_angle(rng);
    const BiphotonState out = apply_local(bell_phi_plus(), Mat2::Identity(), retarder(t, d));
    const Complex e = std::exp(Complex(0, d));
    const double st = std::sin(t), ct = std::cos(t);
    const Complex a = -st * ct * (e - 1.0);
    const Complex b = st * st + e * ct * ct;
    const Complex c = ct * ct + e * st * st;
    const double r = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(out(0) - r * a) <= 1e-12);
    CHECK(std::abs(out(1) - r * b) <= 1e-12);
    CHECK(std::abs(out(2) - r * c) <= 1e-12);
    CHECK(std::abs(out(3) - r * a) <= 1e-12);
  }
}

TEST_CASE("projector matrices") {
  Mat2 h_proj;
  h_proj << Complex(1, 0), Complex(0, 0), Complex(0, 0), Complex(0, 0);
  CHECK(max_abs_diff(projector({0.0, Port::transmitted}), h_proj) <= 1e-15);

  const Mat2 d_proj = projector({0.125 * pi, Port::transmitted});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(std::abs(d_proj(i, j) - Complex(0.5, 0)) <= 1e-12);

  CounterRng rng(22);
  for (int i = 0; i < 50; ++i) {
    const double h = test::uniform_angle(rng);
    const Mat2 t = projector({h, Port::transmitted});
    const Mat2 r = projector({h, Port::reflected});
    CHECK(max_abs_diff(t + r, Mat2::Identity()) <= 1e-12);
    CHECK(max_abs_diff(t * t, t) <= 1e-12);  // idempotent
    CHECK(max_abs_diff(t.adjoint(), t) <= 1e-12);
  }
}

TEST_CASE("coincidence probabilities at hand-computed settings") {
  const BiphotonState s = bell_phi_plus();
  CHECK(coincidence_probability(s, both_transmitted(0.0, 0.0)) <= 1e-15);

  // After a half-wave sample at 45 deg the state is (|HH> + |VV>)/sqrt(2).
  const BiphotonState after = apply_local(s, Mat2::Identity(), hwp(0.25 * pi));
  CHECK(coincidence_probability(after, both_transmitted(0.0, 0.0)) ==
        doctest::Approx(0.5).epsilon(1e-12));

  // <H, D| phi+>^2 = 1/4
  CHECK(coincidence_probability(s, both_transmitted(0.0, 0.125 * pi)) ==
        doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("four port combinations are complete") {
  CounterRng rng(23);
  for (int i = 0; i < 200; ++i) {
    const BiphotonState s = test::random_pure_state(rng);
    const double h_s = test::uniform_angle(rng);
    const double h_i = test::uniform_angle(rng);
    const bool comp = rng.uniform() < 0.5;
    double sum = 0.0;
    for (Port ps : {Port::transmitted, Port::reflected}) {
      for (Port pi_ : {Port::transmitted, Port::reflected}) {
        AnalyzerConfig cfg;
        cfg.signal = {h_s, ps};
        cfg.idler = {h_i, pi_};
        cfg.compensator_present = comp;
        sum += coincidence_probability(s, cfg);
      }
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("no-compensator model reference points") {
  CHECK(model_no_compensator(0.0, 0.0, 0.3, 0.0).first <= 1e-15);
  CHECK(model_no_compensator(0.0, 0.0, 1.1, 0.0).first <= 1e-15);
  // theta = 45 deg, delta = pi peaks at the model's full scale
  CHECK(model_no_compensator(0.0, 0.0, 0.25 * pi, pi).first ==
        doctest::Approx(1.0).epsilon(1e-12));
  // cross-check against the engine, probability = model / 2
  const BiphotonState after =
      apply_local(bell_phi_plus(), Mat2::Identity(), retarder(0.25 * pi, pi));
  CHECK(coincidence_probability(after, both_transmitted(0.0, 0.0)) ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("no-compensator derivative vanishes at delta in {0, pi}") {
  for (int a = 0; a < 8; ++a) {
    for (int b = 0; b < 8; ++b) {
      for (int c = 0; c < 8; ++c) {
        const double h_s = a * pi / 8.0;
        const double h_i = b * pi / 8.0 + 0.05;
        const double theta = c * pi / 8.0 + 0.02;
        CHECK(std::abs(model_no_compensator(h_s, h_i, theta, 0.0).second) <= 1e-12);
        CHECK(std::abs(model_no_compensator(h_s, h_i, theta, pi).second) <= 1e-12);
      }
    }
  }
}

TEST_CASE("compensator model reference points") {
  CHECK(model_compensator(0.0, 0.0, 0.0, 0.0).first <= 1e-15);
  CHECK(model_compensator(0.0, 0.125 * pi, 0.0, 0.0).first ==
        doctest::Approx(0.25).epsilon(1e-12));
  // engine agreement at the same setting
  const BiphotonState s = bell_phi_plus();  // delta = 0 sample is a no-op
  AnalyzerConfig cfg = both_transmitted(0.0, 0.125 * pi, true);
  CHECK(coincidence_probability(s, cfg) == doctest::Approx(0.25).epsilon(1e-12));

  // Unlike the compensator-free model, the derivative survives at delta = pi.
  const double d = model_compensator(0.0, 0.125 * pi, 0.25 * pi, pi).second;
  CHECK(d == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("senarmont model null, peak, and contrast") {
  CounterRng rng(24);
  for (int i = 0; i < 100; ++i) {
    const double delta = test::uniform_angle(rng);
    CHECK(model_senarmont(0.25 * delta, delta).first <= 1e-12);
    CHECK(model_senarmont(0.25 * delta + 0.25 * pi, delta).first ==
          doctest::Approx(0.5).epsilon(1e-12));
    // max - min over the analyzer angle is half the count scale for every delta
    CHECK(model_senarmont(0.25 * delta + 0.25 * pi, delta).first -
              model_senarmont(0.25 * delta, delta).first ==
          doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("senarmont equals the compensator model at h_s = 0, theta = 45 deg") {
  CounterRng rng(25);
  for (int i = 0; i < 300; ++i) {
    const double h_i = test::uniform_angle(rng);
    const double delta = test::uniform_angle(rng);
    const auto a = model_senarmont(h_i, delta);
    const auto b = model_compensator(0.0, h_i, 0.25 * pi, delta);
    CHECK(std::abs(a.first - b.first) <= 1e-12);
    CHECK(std::abs(a.second - b.second) <= 1e-12);
  }
}

TEST_CASE("closed forms match the first-principles engine up to one scale per family") {
  CounterRng rng(26);
  for (int i = 0; i < 1000; ++i) {
    const double h_s = test::uniform_angle(rng);
    const double h_i = test::uniform_angle(rng);
    const double theta = test::uniform_angle(rng);
    const double delta = test::uniform_angle(rng);
    const BiphotonState after =
        apply_local(bell_phi_plus(), Mat2::Identity(), retarder(theta, delta));

    const double p1 = coincidence_probability(after, both_transmitted(h_s, h_i));
    CHECK(std::abs(0.5 * model_no_compensator(h_s, h_i, theta, delta).first - p1) <= 1e-10);

    const double p2 = coincidence_probability(after, both_transmitted(h_s, h_i, true));
    CHECK(std::abs(model_compensator(h_s, h_i, theta, delta).first - p2) <= 1e-10);
  }
  // Senarmont special case against the engine
  for (int i = 0; i < 200; ++i) {
    const double h_i = test::uniform_angle(rng);
    const double delta = test::uniform_angle(rng);
    const BiphotonState after =
        apply_local(bell_phi_plus(), Mat2::Identity(), retarder(0.25 * pi, delta));
    const double p = coincidence_probability(after, both_transmitted(0.0, h_i, true));
    CHECK(std::abs(model_senarmont(h_i, delta).first - p) <= 1e-10);
  }
}

TEST_CASE("model derivatives match central finite differences") {
  CounterRng rng(27);
  const double h = 1e-6;
  int checked = 0;
  while (checked < 200) {
    const double h_s = test::uniform_angle(rng);
    const double h_i = test::uniform_angle(rng);
    const double theta = test::uniform_angle(rng);
    const double delta = test::uniform_angle(rng);

    const auto check_one = [&](auto&& f) {
      const auto [v, dv] = f(delta);
      if (std::abs(dv) < 1e-3) return false;  // relative comparison needs a signal
      const double fd = (f(delta + h).first - f(delta - h).first) / (2.0 * h);
      CHECK(std::abs(fd - dv) / std::abs(dv) <= 1e-6);
      return true;
    };

    const bool used =
        check_one([&](double d) { return model_no_compensator(h_s, h_i, theta, d); }) &
        check_one([&](double d) { return model_compensator(h_s, h_i, theta, d); }) &
        check_one([&](double d) { return model_senarmont(h_i, d); });
    if (used) ++checked;
  }
}

TEST_CASE("sweep validity condition") {
  CHECK_FALSE(sweep_validity(0.0, 0.5 * pi));          // theta = 90 deg in the H base
  CHECK_FALSE(sweep_validity(0.125 * pi, 0.25 * pi));  // theta = 45 deg in the D base
  CHECK_FALSE(sweep_validity(0.125 * pi, 0.75 * pi));  // theta = 135 deg in the D base
  CHECK(sweep_validity(0.0, 0.125 * pi));
  CHECK(sweep_validity(0.0, 0.25 * pi));
}

TEST_CASE("invalid sweeps are retardance-blind") {
  const std::array<std::pair<double, double>, 3> bad{
      std::pair{0.0, 0.5 * pi}, std::pair{0.125 * pi, 0.25 * pi}, std::pair{0.125 * pi, 0.75 * pi}};
  for (const auto& [h_s, theta] : bad) {
    for (double h_i : {0.07, 0.51, 1.13}) {
      double lo = 1.0, hi = 0.0;
      for (int g = 0; g <= 40; ++g) {
        const double delta = g * two_pi / 40.0;
        const BiphotonState after =
            apply_local(bell_phi_plus(), Mat2::Identity(), retarder(theta, delta));
        const double p = coincidence_probability(after, both_transmitted(h_s, h_i));
        lo = std::min(lo, p);
        hi = std::max(hi, p);
      }
      CHECK(hi - lo <= 1e-12);
    }
  }
}

TEST_CASE("compensator keeps full sensitivity in the senarmont configuration") {
  // max over h_i of |d model / d delta| equals 1/4 for every delta
  for (int g = 0; g <= 32; ++g) {
    const double delta = g * two_pi / 32.0;
    const double h_star = 0.25 * (delta - 0.5 * pi);  // where |sin(delta - 4h)| = 1
    CHECK(std::abs(model_senarmont(h_star, delta).second) == doctest::Approx(0.25).epsilon(1e-9));
    for (int k = 0; k < 64; ++k) {
      const double h = k * pi / 64.0;
      CHECK(std::abs(model_senarmont(h, delta).second) <= 0.25 + 1e-12);
    }
  }
}

TEST_CASE("depolarize produces valid Werner states") {
  const BiphotonState s = bell_phi_plus();
  CHECK(max_abs_diff(depolarize(s, 1.0), density_of(s)) <= 1e-14);
  CHECK(max_abs_diff(depolarize(s, 0.0), 0.25 * Mat4::Identity()) <= 1e-14);

  const BiphotonDensity w = depolarize(s, 0.9);
  CHECK(is_valid_density(w));
  const Complex f = s.adjoint() * w * s;
  CHECK(f.real() == doctest::Approx(0.925).epsilon(1e-12));

  CHECK_THROWS_AS(depolarize(s, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(depolarize(s, -0.1), std::invalid_argument);
}

TEST_CASE("density-based coincidence probabilities agree with pure-state ones") {
  CounterRng rng(28);
  for (int i = 0; i < 100; ++i) {
    const BiphotonState s = test::random_pure_state(rng);
    AnalyzerConfig cfg = both_transmitted(test::uniform_angle(rng), test::uniform_angle(rng),
                                          rng.uniform() < 0.5);
    CHECK(coincidence_probability(density_of(s), cfg) ==
          doctest::Approx(coincidence_probability(s, cfg)).epsilon(1e-12));
  }
}
