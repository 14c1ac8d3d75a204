#include "test_util.hpp"

#include "qell/detection.hpp"
#include "qell/estimation.hpp"

#include <doctest.h>

using namespace qell;

namespace {

DetectionModel exact_model(double count_scale = 1e5) {
  DetectionModel m;
  m.pair_rate_cps = count_scale;
  m.efficiency_signal = 1.0;
  m.efficiency_idler = 1.0;
  m.dark_rate_signal_cps = 0.0;
  m.dark_rate_idler_cps = 0.0;
  m.coincidence_window_s = 0.0;  // no accidental floor
  m.integration_time_s = 1.0;
  m.shot_noise = false;
  return m;
}

SweepPlan quantum_plan(double h_s, bool compensator, int points = 18) {
  SweepPlan plan;
  plan.mode = Mode::quantum;
  plan.parameter = SweptParameter::idler_hwp;
  for (int k = 0; k < points; ++k) plan.angles_rad.push_back(k * 0.5 * pi / points);
  plan.analyzer.signal = {h_s, Port::transmitted};
  plan.analyzer.idler = {0.0, Port::transmitted};
  plan.analyzer.compensator_present = compensator;
  return plan;
}

SweepPlan classical_plan(double p, bool compensator, int points = 18) {
  SweepPlan plan;
  plan.mode = Mode::classical;
  plan.parameter = SweptParameter::analyzer;
  for (int k = 0; k < points; ++k) plan.angles_rad.push_back(k * pi / points);
  plan.psa.polarizer_rad = p;
  plan.psa.compensator_present = compensator;
  return plan;
}

}  // namespace

TEST_CASE("noise-free senarmont round trip") {
  const double truth = 1.5522;
  const SweepDataset ds = run_sweep(quantum_plan(0.0, true), {0.25 * pi, truth}, exact_model(), 1);
  FitConfig cfg;
  cfg.model = FitModel::senarmont;
  const FitResult res = fit_retardance(ds, cfg);
  CHECK(res.status == FitStatus::converged);
  CHECK(wrapped_distance(res.delta_hat_rad, truth, two_pi) <= 1e-9);
  CHECK(res.scale_hat == doctest::Approx(1e5).epsilon(1e-9));
}

TEST_CASE("noise-free compensator-free round trip") {
  const double truth = 0.5 * pi;
  const SweepDataset ds =
      run_sweep(quantum_plan(0.0, false), {0.125 * pi, truth}, exact_model(), 2);
  FitConfig cfg;
  cfg.model = FitModel::no_compensator;
  cfg.signal_hwp_rad = 0.0;
  cfg.theta_rad = 0.125 * pi;
  const FitResult res = fit_retardance(ds, cfg);
  CHECK(res.status == FitStatus::converged);
  CHECK(wrapped_distance(res.delta_hat_rad, truth, two_pi) <= 1e-9);
}

TEST_CASE("degenerate sweeps are reported as such") {
  const SweepDataset ds = run_sweep(quantum_plan(0.0, false), {0.5 * pi, 1.0}, exact_model(), 3,
                                    /*override_validity=*/true);
  FitConfig cfg;
  cfg.model = FitModel::no_compensator;
  cfg.signal_hwp_rad = 0.0;
  cfg.theta_rad = 0.5 * pi;
  const FitResult res = fit_retardance(ds, cfg);
  CHECK(res.status == FitStatus::degenerate_sweep);
}

TEST_CASE("noise-free round trips across all model families") {
  CounterRng rng(41);
  const int per_family = 25;

  for (int i = 0; i < per_family; ++i) {
    const double scale = 1e3 + rng.uniform() * 1e6;

    // no-compensator family: identifiable on [0, pi] away from the blind points
    {
      const double truth = 0.15 + rng.uniform() * (pi - 0.3);
      const SweepDataset ds =
          run_sweep(quantum_plan(0.0, false), {0.125 * pi, truth}, exact_model(scale), 100 + i);
      FitConfig cfg;
      cfg.model = FitModel::no_compensator;
      cfg.theta_rad = 0.125 * pi;
      const FitResult res = fit_retardance(ds, cfg);
      CHECK(res.status == FitStatus::converged);
      CHECK(wrapped_distance(res.delta_hat_rad, truth, two_pi) <= 1e-9);
      CHECK(std::abs(res.scale_hat - 0.5 * scale) / (0.5 * scale) <= 1e-8);
    }

    // compensator family, generic angles
    {
      const double truth = 0.05 + rng.uniform() * (two_pi - 0.1);
      const SweepDataset ds =
          run_sweep(quantum_plan(0.0, true), {0.125 * pi, truth}, exact_model(scale), 200 + i);
      FitConfig cfg;
      cfg.model = FitModel::compensator;
      cfg.theta_rad = 0.125 * pi;
      const FitResult res = fit_retardance(ds, cfg);
      CHECK(res.status == FitStatus::converged);
      CHECK(wrapped_distance(res.delta_hat_rad, truth, two_pi) <= 1e-9);
    }

    // senarmont family
    {
      const double truth = rng.uniform() * two_pi;
      const SweepDataset ds =
          run_sweep(quantum_plan(0.0, true), {0.25 * pi, truth}, exact_model(scale), 300 + i);
      FitConfig cfg;
      cfg.model = FitModel::senarmont;
      const FitResult res = fit_retardance(ds, cfg);
      CHECK(res.status == FitStatus::converged);
      CHECK(wrapped_distance(res.delta_hat_rad, truth, two_pi) <= 1e-9);
    }

    // classical family with compensator
    {
      const double truth = 0.05 + rng.uniform() * (two_pi - 0.1);
      DetectionModel m = exact_model();
      m.singles_rate_classical_cps = scale;
      const SweepDataset ds =
          run_sweep(classical_plan(0.5 * pi, true), {0.25 * pi, truth}, m, 400 + i);
      FitConfig cfg;
      cfg.model = FitModel::classical_psa;
      cfg.polarizer_rad = 0.5 * pi;
      cfg.theta_rad = 0.25 * pi;
      cfg.classical_compensator = true;
      const FitResult res = fit_retardance(ds, cfg);
      CHECK(res.status == FitStatus::converged);
      CHECK(wrapped_distance(res.delta_hat_rad, truth, two_pi) <= 1e-9);
    }
  }
}

TEST_CASE("senarmont extremum estimator") {
  // delta = 1: the null sits at h = 0.25 rad
  {
    const SweepDataset ds = run_sweep(quantum_plan(0.0, true), {0.25 * pi, 1.0}, exact_model(), 4);
    const FitResult res = senarmont_estimate(ds);
    CHECK(res.status == FitStatus::converged);
    CHECK(wrapped_distance(res.delta_hat_rad, 1.0, two_pi) <= 1e-9);
  }
  // delta = 0 and delta = pi land exactly
  for (double truth : {0.0, pi}) {
    const SweepDataset ds =
        run_sweep(quantum_plan(0.0, true), {0.25 * pi, truth}, exact_model(), 5);
    const FitResult res = senarmont_estimate(ds);
    CHECK(res.status == FitStatus::converged);
    CHECK(wrapped_distance(res.delta_hat_rad, truth, two_pi) <= 1e-9);
  }
}

TEST_CASE("senarmont estimator agrees with the least-squares fit") {
  CounterRng rng(42);
  // noise-free: agreement to 1e-6
  for (int i = 0; i < 20; ++i) {
    const double truth = rng.uniform() * two_pi;
    const SweepDataset ds =
        run_sweep(quantum_plan(0.0, true), {0.25 * pi, truth}, exact_model(), 500 + i);
    FitConfig cfg;
    cfg.model = FitModel::senarmont;
    const FitResult lsq = fit_retardance(ds, cfg);
    const FitResult ext = senarmont_estimate(ds);
    CHECK(wrapped_distance(lsq.delta_hat_rad, ext.delta_hat_rad, two_pi) <= 1e-6);
  }
  // noisy: agreement within 3 combined standard errors
  DetectionModel noisy = exact_model(2e4);
  noisy.shot_noise = true;
  noisy.integration_time_s = 10.0;
  for (int i = 0; i < 20; ++i) {
    const double truth = 0.3 + rng.uniform() * (two_pi - 0.6);
    const SweepDataset ds = run_sweep(quantum_plan(0.0, true), {0.25 * pi, truth}, noisy, 600 + i);
    FitConfig cfg;
    cfg.model = FitModel::senarmont;
    const FitResult lsq = fit_retardance(ds, cfg);
    const FitResult ext = senarmont_estimate(ds);
    const double sigma = std::hypot(lsq.std_error_delta, ext.std_error_delta);
    CHECK(wrapped_distance(lsq.delta_hat_rad, ext.delta_hat_rad, two_pi) <= 3.0 * sigma + 1e-9);
  }
}

TEST_CASE("senarmont estimator rejects degenerate and undersampled sweeps") {
  // featureless curve: constant counts carry no fringe
  SweepDataset flat;
  CounterRng rng(43);
  for (int k = 0; k < 16; ++k) {
    SweepRecord rec;
    rec.angle_rad = k * 0.5 * pi / 16.0;
    rec.integration_s = 1.0;
    rec.counts = static_cast<double>(CounterRng(44, k).poisson(1000.0));
    flat.records.push_back(rec);
  }
  CHECK(senarmont_estimate(flat).status == FitStatus::degenerate_sweep);

  SweepDataset narrow = run_sweep(quantum_plan(0.0, true), {0.25 * pi, 1.0}, exact_model(), 7);
  // keep only a sliver of the period
  SweepDataset cut = narrow;
  cut.records.assign(narrow.records.begin(), narrow.records.begin() + 4);
  CHECK_THROWS_AS(senarmont_estimate(cut), std::invalid_argument);
}

TEST_CASE("noise-free sensitivity scans report no dependence") {
  const SweepDataset ds = run_sweep(quantum_plan(0.0, true), {0.25 * pi, 2.0}, exact_model(), 8);
  FitConfig cfg;
  cfg.model = FitModel::senarmont;
  cfg.initial_delta_rad = 2.1;
  cfg.initial_scale = 0.9e5;
  const SensitivityReport rep = sensitivity_scan(ds, cfg);
  CHECK(rep.failures == 0);
  CHECK(rep.spread <= 1e-9);
  CHECK_FALSE(rep.dependent);
}

TEST_CASE("relative error formula") {
  CHECK(relative_error(3.1341, 3.1341) == 0.0);
  CHECK(relative_error(3.1463, 3.1341) == doctest::Approx(0.0039).epsilon(0.01));
  CHECK(relative_error(1.5255, 1.56) == doctest::Approx(0.0221).epsilon(0.01));
  // wrapped numerator: values on either side of 0 are close
  CHECK(relative_error(two_pi - 0.01, 0.02) == doctest::Approx(0.03 / 0.02).epsilon(1e-9));
  CHECK_THROWS_AS(relative_error(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(relative_error(1.0, -1.0), std::invalid_argument);
}

TEST_CASE("aggregate summary statistics") {
  FitResult a, b;
  a.delta_hat_rad = 3.14;
  b.delta_hat_rad = 3.16;
  const AggregateSummary s = aggregate({a, b}, 3.15);
  CHECK(s.mean_delta == doctest::Approx(3.15).epsilon(1e-12));
  CHECK(s.std_delta == doctest::Approx(0.0141421356).epsilon(1e-6));
  CHECK(s.mean_rel_error == doctest::Approx(0.01 / 3.15).epsilon(1e-9));
  CHECK(s.std_rel_error <= 1e-12);

  const AggregateSummary same = aggregate({a, a}, 3.15);
  CHECK(same.std_delta == 0.0);
  CHECK_THROWS_AS(aggregate({a}, 3.15), std::invalid_argument);
}

TEST_CASE("poisson weighting recovers the truth as well") {
  DetectionModel noisy = exact_model(2e4);
  noisy.shot_noise = true;
  noisy.integration_time_s = 10.0;
  const double truth = 2.3;
  const SweepDataset ds = run_sweep(quantum_plan(0.0, true), {0.25 * pi, truth}, noisy, 650);
  FitConfig cfg;
  cfg.model = FitModel::senarmont;
  cfg.poisson_weighting = true;
  const FitResult res = fit_retardance(ds, cfg);
  CHECK(res.status == FitStatus::converged);
  CHECK(wrapped_distance(res.delta_hat_rad, truth, two_pi) <= 5.0 * res.std_error_delta);
}

TEST_CASE("monte carlo fits are unbiased at high counts") {
  DetectionModel noisy = exact_model(5e4);
  noisy.shot_noise = true;
  noisy.integration_time_s = 10.0;
  const double truth = 2.3;
  std::vector<FitResult> fits;
  for (int i = 0; i < 100; ++i) {
    const SweepDataset ds =
        run_sweep(quantum_plan(0.0, true), {0.25 * pi, truth}, noisy, 700 + i);
    FitConfig cfg;
    cfg.model = FitModel::senarmont;
    const FitResult res = fit_retardance(ds, cfg);
    REQUIRE(res.status == FitStatus::converged);
    fits.push_back(res);
  }
  const AggregateSummary s = aggregate(fits, truth);
  CHECK(std::abs(s.mean_delta - truth) <= 3.0 * s.std_delta / std::sqrt(100.0));
}

TEST_CASE("compensator shrinks the monte carlo spread near delta = pi") {
  // Frozen regression bound: with these pinned seeds and 120 repetitions per
  // point, the ratio std(compensator) / std(no compensator) measured
  // 0.041-0.046 for true delta in {pi-0.05, pi-0.02, pi}; asserted at 0.1
  // to leave margin for platform rounding.
  DetectionModel noisy = exact_model(2e4);
  noisy.shot_noise = true;
  noisy.integration_time_s = 10.0;
  const int reps = 120;
  for (double truth : {pi - 0.05, pi - 0.02, pi}) {
    std::vector<FitResult> with, without;
    for (int i = 0; i < reps; ++i) {
      {
        const SweepDataset ds =
            run_sweep(quantum_plan(0.0, true), {0.25 * pi, truth}, noisy, 800 + i);
        FitConfig cfg;
        cfg.model = FitModel::compensator;
        cfg.theta_rad = 0.25 * pi;
        const FitResult r = fit_retardance(ds, cfg);
        if (r.status == FitStatus::converged) with.push_back(r);
      }
      {
        const SweepDataset ds =
            run_sweep(quantum_plan(0.0, false), {0.125 * pi, truth}, noisy, 900 + i);
        FitConfig cfg;
        cfg.model = FitModel::no_compensator;
        cfg.theta_rad = 0.125 * pi;
        const FitResult r = fit_retardance(ds, cfg);
        if (r.status == FitStatus::converged) without.push_back(r);
      }
    }
    REQUIRE(with.size() >= 100);
    REQUIRE(without.size() >= 100);
    const double std_with = aggregate(with, truth).std_delta;
    const double std_without = aggregate(without, truth).std_delta;
    CHECK(std_with < std_without);
    CHECK(std_with / std_without < 0.1);
  }
}
