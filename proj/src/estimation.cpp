#include "qell/estimation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qell {

void FitConfig::validate() const {
  if (!(convergence_tol > 0.0)) throw std::invalid_argument("FitConfig: tolerance must be > 0");
  if (max_iterations < 1) throw std::invalid_argument("FitConfig: max_iterations must be >= 1");
  if (!(scale_perturbation >= 0.0)) {
    throw std::invalid_argument("FitConfig: scale_perturbation must be >= 0");
  }
  if (scale_grid < 2) throw std::invalid_argument("FitConfig: scale_grid must be >= 2");
  if (initial_scale && !(*initial_scale > 0.0)) {
    throw std::invalid_argument("FitConfig: initial_scale must be > 0");
  }
}

std::pair<double, double> fit_model_eval(const FitConfig& cfg, double angle_rad, double delta) {
  switch (cfg.model) {
    case FitModel::no_compensator:
      return model_no_compensator(cfg.signal_hwp_rad, angle_rad, cfg.theta_rad, delta);
    case FitModel::compensator:
      return model_compensator(cfg.signal_hwp_rad, angle_rad, cfg.theta_rad, delta);
    case FitModel::senarmont:
      return model_senarmont(angle_rad, delta);
    case FitModel::classical_psa: {
      PsaConfig psa;
      psa.polarizer_rad = cfg.polarizer_rad;
      psa.theta_rad = cfg.theta_rad;
      psa.delta_rad = delta;
      psa.compensator_present = cfg.classical_compensator;
      return psa_intensity_d(psa, angle_rad);
    }
  }
  throw std::logic_error("fit_model_eval: unknown model");
}

namespace {

// Models that depend on delta only through cos(delta) cannot distinguish
// delta from 2pi - delta; their fits report the representative in [0, pi].
bool even_in_delta(const FitConfig& cfg) {
  return cfg.model == FitModel::no_compensator ||
         (cfg.model == FitModel::classical_psa && !cfg.classical_compensator);
}

double canonical_delta(double delta, bool even) {
  double d = wrap_angle(delta, two_pi);
  if (even && d > pi) d = two_pi - d;
  return d;
}

struct Workspace {
  std::vector<double> angles;
  std::vector<double> counts;
  std::vector<double> weights;
};

Workspace make_workspace(const SweepDataset& data, const FitConfig& cfg) {
  Workspace w;
  w.angles.reserve(data.records.size());
  w.counts.reserve(data.records.size());
  w.weights.reserve(data.records.size());
  for (const auto& r : data.records) {
    if (!std::isfinite(r.counts)) {
      throw std::invalid_argument("fit_retardance: counts must be finite");
    }
    w.angles.push_back(r.angle_rad);
    w.counts.push_back(r.counts);
    w.weights.push_back(cfg.poisson_weighting ? 1.0 / std::max(r.counts, 1.0) : 1.0);
  }
  return w;
}

// A sweep is degenerate when the model's delta derivative vanishes at every
// sweep angle for every delta (a retardance-blind angle combination): the
// delta column of the Jacobian is identically zero.
bool degenerate_sweep(const FitConfig& cfg, const std::vector<double>& angles) {
  double max_f = 0.0;
  double max_df = 0.0;
  for (int g = 0; g < 8; ++g) {
    const double delta = (2.0 * g + 1.0) * pi / 8.0;
    for (double a : angles) {
      const auto [f, df] = fit_model_eval(cfg, a, delta);
      max_f = std::max(max_f, std::abs(f));
      max_df = std::max(max_df, std::abs(df));
    }
  }
  return max_df <= 1e-9 * std::max(max_f, 1e-12) || max_f <= 1e-12;
}

double sse_at(const Workspace& w, const FitConfig& cfg, double delta, double scale) {
  double sse = 0.0;
  for (std::size_t k = 0; k < w.angles.size(); ++k) {
    const double f = fit_model_eval(cfg, w.angles[k], delta).first;
    const double r = w.counts[k] - scale * f;
    sse += w.weights[k] * r * r;
  }
  return sse;
}

// Every model here is linear in (1, cos delta, sin delta) at fixed angles,
// so a linear regression on that basis gives a cheap global seed:
//   counts_k = s A_k + (s cos d) B_k + (s sin d) C_k
struct LinearSeed {
  bool valid = false;
  double delta = 0.0;
  double scale = 0.0;
};

LinearSeed linear_seed(const Workspace& w, const FitConfig& cfg) {
  const std::size_t n = w.angles.size();
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double f0 = fit_model_eval(cfg, w.angles[k], 0.0).first;
    const double f1 = fit_model_eval(cfg, w.angles[k], 0.5 * pi).first;
    const double f2 = fit_model_eval(cfg, w.angles[k], pi).first;
    const double f3 = fit_model_eval(cfg, w.angles[k], 1.5 * pi).first;
    const double sw = std::sqrt(w.weights[k]);
    x(k, 0) = sw * 0.5 * (f0 + f2);
    x(k, 1) = sw * 0.5 * (f0 - f2);
    x(k, 2) = sw * 0.5 * (f1 - f3);
    y(k) = sw * w.counts[k];
  }
  Eigen::Matrix3d xtx = x.transpose() * x;
  xtx.diagonal().array() += 1e-12 * (1.0 + xtx.trace());
  const Eigen::Vector3d sol = xtx.ldlt().solve(x.transpose() * y);
  LinearSeed seed;
  if (!(sol(0) > 0.0) || !std::isfinite(sol(0))) return seed;
  seed.valid = true;
  seed.scale = sol(0);
  if (x.col(2).norm() <= 1e-9 * (x.col(1).norm() + 1e-300)) {
    // Even model: the sin(delta) basis column vanishes and only
    // cos(delta) = sol(1)/sol(0) is observable.
    seed.delta = std::acos(std::clamp(sol(1) / sol(0), -1.0, 1.0));
  } else {
    // The regression can land outside the physical cone; atan2 projects the
    // direction, which is all a seed needs.
    seed.delta = wrap_angle(std::atan2(sol(2), sol(1)), two_pi);
  }
  return seed;
}

struct LmOutcome {
  double delta = 0.0;
  double scale = 0.0;
  double sse = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

// Damped Gauss-Newton over (delta, scale); with fixed_scale the scale column
// is frozen and only delta moves.
LmOutcome run_lm(const Workspace& w, const FitConfig& cfg, double delta0, double scale0,
                 bool fixed_scale = false) {
  LmOutcome out;
  double delta = delta0;
  double scale = scale0;
  double sse = sse_at(w, cfg, delta, scale);
  double lambda = 1e-3;
  const std::size_t n = w.angles.size();
  int iter = 0;
  for (; iter < cfg.max_iterations; ++iter) {
    double a11 = 0.0, a12 = 0.0, a22 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const auto [f, df] = fit_model_eval(cfg, w.angles[k], delta);
      const double r = w.counts[k] - scale * f;
      const double j1 = scale * df;
      const double j2 = f;
      const double wk = w.weights[k];
      a11 += wk * j1 * j1;
      a12 += wk * j1 * j2;
      a22 += wk * j2 * j2;
      g1 += wk * j1 * r;
      g2 += wk * j2 * r;
    }
    bool accepted = false;
    while (lambda <= 1e13) {
      const double b11 = a11 * (1.0 + lambda) + 1e-300;
      const double b22 = a22 * (1.0 + lambda) + 1e-300;
      double step_d = 0.0;
      double step_s = 0.0;
      if (fixed_scale) {
        step_d = g1 / b11;
      } else {
        const double det = b11 * b22 - a12 * a12;
        if (std::abs(det) < 1e-300) {
          lambda *= 10.0;
          continue;
        }
        step_d = (g1 * b22 - g2 * a12) / det;
        step_s = (g2 * b11 - g1 * a12) / det;
      }
      const double trial_delta = delta + step_d;
      const double trial_scale = scale + step_s;
      const double trial_sse = trial_scale > 0.0
                                   ? sse_at(w, cfg, trial_delta, trial_scale)
                                   : std::numeric_limits<double>::infinity();
      if (trial_sse < sse) {
        const double improvement = (sse - trial_sse) / std::max(sse, 1e-300);
        const double lambda_at_accept = lambda;
        delta = trial_delta;
        scale = trial_scale;
        sse = trial_sse;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        // A tiny improvement only signals convergence when the step was
        // essentially undamped; heavily damped steps are small by
        // construction right after a rejection.
        if ((improvement < cfg.convergence_tol && lambda_at_accept <= 1e-4) ||
            (std::abs(step_d) < 1e-13 && std::abs(step_s) < 1e-13 * std::max(1.0, scale))) {
          out.converged = true;
        }
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No descent direction left at this scale: numerical minimum.
      out.converged = true;
      ++iter;
      break;
    }
    if (out.converged) {
      ++iter;
      break;
    }
  }
  out.delta = delta;
  out.scale = scale;
  out.sse = sse;
  out.iterations = iter;
  return out;
}

void fill_errors(const Workspace& w, const FitConfig& cfg, FitResult& res) {
  const std::size_t n = w.angles.size();
  double a11 = 0.0, a12 = 0.0, a22 = 0.0, sse = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto [f, df] = fit_model_eval(cfg, w.angles[k], res.delta_hat_rad);
    const double r = w.counts[k] - res.scale_hat * f;
    const double j1 = res.scale_hat * df;
    const double j2 = f;
    const double wk = w.weights[k];
    a11 += wk * j1 * j1;
    a12 += wk * j1 * j2;
    a22 += wk * j2 * j2;
    sse += wk * r * r;
  }
  res.residual_norm = std::sqrt(sse);
  const double dof = static_cast<double>(n) - 2.0;
  const double sigma2 = dof > 0.0 ? sse / dof : 0.0;
  const double det = a11 * a22 - a12 * a12;
  if (det > 0.0 && std::isfinite(det)) {
    res.std_error_delta = std::sqrt(std::max(sigma2 * a22 / det, 0.0));
    res.std_error_scale = std::sqrt(std::max(sigma2 * a11 / det, 0.0));
  } else {
    res.std_error_delta = std::numeric_limits<double>::infinity();
    res.std_error_scale = std::numeric_limits<double>::infinity();
  }
}

}  // namespace

FitResult fit_retardance(const SweepDataset& data, const FitConfig& config) {
  config.validate();
  if (data.records.size() < 4) {
    throw std::invalid_argument("fit_retardance: need at least 4 records");
  }
  const Workspace w = make_workspace(data, config);

  FitResult res;
  if (degenerate_sweep(config, w.angles)) {
    res.status = FitStatus::degenerate_sweep;
    return res;
  }

  const double default_scale =
      std::max(*std::max_element(w.counts.begin(), w.counts.end()), 1.0);

  std::vector<std::pair<double, double>> starts;  // (delta0, scale0)
  if (config.initial_delta_rad) {
    starts.emplace_back(*config.initial_delta_rad,
                        config.initial_scale.value_or(default_scale));
  } else {
    const LinearSeed seed = linear_seed(w, config);
    if (seed.valid) starts.emplace_back(seed.delta, seed.scale);
    for (int k = 0; k < 8; ++k) {
      const double d0 = (2.0 * k + 1.0) * pi / 8.0;
      starts.emplace_back(d0, config.initial_scale.value_or(default_scale));
    }
  }

  LmOutcome best;
  for (const auto& [d0, s0] : starts) {
    const LmOutcome o = run_lm(w, config, d0, s0);
    if (o.sse < best.sse) best = o;
  }

  res.delta_hat_rad = canonical_delta(best.delta, even_in_delta(config));
  res.scale_hat = best.scale;
  res.iterations = best.iterations;
  res.converged = best.converged;
  res.status = best.converged ? FitStatus::converged : FitStatus::non_convergence;
  fill_errors(w, config, res);
  return res;
}

Sinusoid4Fit fit_sinusoid4(const std::vector<double>& angles_rad,
                           const std::vector<double>& values) {
  if (angles_rad.size() != values.size() || angles_rad.size() < 3) {
    throw std::invalid_argument("fit_sinusoid4: need >= 3 matched points");
  }
  const std::size_t n = angles_rad.size();
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (std::size_t k = 0; k < n; ++k) {
    x(k, 0) = 1.0;
    x(k, 1) = std::cos(4.0 * angles_rad[k]);
    x(k, 2) = std::sin(4.0 * angles_rad[k]);
    y(k) = values[k];
  }
  const Eigen::Matrix3d xtx = x.transpose() * x;
  const Eigen::LDLT<Eigen::Matrix3d> ldlt(xtx);
  const Eigen::Vector3d sol = ldlt.solve(x.transpose() * y);
  Sinusoid4Fit fit;
  fit.c0 = sol(0);
  fit.c1 = sol(1);
  fit.c2 = sol(2);
  const Eigen::VectorXd r = y - x * sol;
  fit.sse = r.squaredNorm();
  const double dof = static_cast<double>(n) - 3.0;
  const double sigma2 = dof > 0.0 ? fit.sse / dof : 0.0;
  fit.covariance = sigma2 * xtx.inverse();
  return fit;
}

FitResult senarmont_estimate(const SweepDataset& data) {
  if (data.records.size() < 4) {
    throw std::invalid_argument("senarmont_estimate: need at least 4 records");
  }
  std::vector<double> angles, counts;
  for (const auto& r : data.records) {
    angles.push_back(r.angle_rad);
    counts.push_back(r.counts);
  }
  const auto [mn, mx] = std::minmax_element(angles.begin(), angles.end());
  if (*mx - *mn < 0.25 * pi - 1e-9) {
    throw std::invalid_argument(
        "senarmont_estimate: sweep must span at least half a fringe period (pi/4)");
  }

  // counts = c0 + c1 cos(4h) + c2 sin(4h) with c1 = -(s/4) cos d,
  // c2 = -(s/4) sin d; the minimum sits at h = d/4.
  const Sinusoid4Fit fit = fit_sinusoid4(angles, counts);
  const double amp = std::hypot(fit.c1, fit.c2);

  FitResult res;
  res.iterations = 1;
  const double var_amp =
      amp > 0.0 ? (fit.c1 * fit.c1 * fit.covariance(1, 1) +
                   fit.c2 * fit.c2 * fit.covariance(2, 2) +
                   2.0 * fit.c1 * fit.c2 * fit.covariance(1, 2)) /
                      (amp * amp)
                : std::max(fit.covariance(1, 1), fit.covariance(2, 2));
  if (amp <= 2.0 * std::sqrt(std::max(var_amp, 0.0)) ||
      amp <= 1e-9 * std::max(std::abs(fit.c0), 1e-300)) {
    res.status = FitStatus::degenerate_sweep;
    return res;
  }

  res.delta_hat_rad = wrap_angle(std::atan2(-fit.c2, -fit.c1), two_pi);
  res.scale_hat = 4.0 * fit.c0;
  res.residual_norm = std::sqrt(fit.sse);
  // Propagate the linear-fit covariance through atan2(-c2, -c1).
  const double a2 = amp * amp;
  const double dd_dc1 = fit.c2 / a2;
  const double dd_dc2 = -fit.c1 / a2;
  res.std_error_delta = std::sqrt(std::max(
      dd_dc1 * dd_dc1 * fit.covariance(1, 1) + dd_dc2 * dd_dc2 * fit.covariance(2, 2) +
          2.0 * dd_dc1 * dd_dc2 * fit.covariance(1, 2),
      0.0));
  res.std_error_scale = 4.0 * std::sqrt(std::max(fit.covariance(0, 0), 0.0));
  res.converged = true;
  res.status = FitStatus::converged;
  return res;
}

SensitivityReport sensitivity_scan(const SweepDataset& data, const FitConfig& config) {
  config.validate();
  FitConfig central_cfg = config;
  const FitResult central = fit_retardance(data, central_cfg);

  SensitivityReport rep;
  rep.sigma_delta_central = central.std_error_delta;
  if (central.status == FitStatus::degenerate_sweep) {
    rep.failures = config.scale_grid;
    return rep;
  }

  const double d0 = config.initial_delta_rad.value_or(central.delta_hat_rad);
  const double s0 = config.initial_scale.value_or(central.scale_hat);

  // Each grid point refits delta with the count scale held at the perturbed
  // value: this measures how much the estimate leans on the assumed photon
  // number. A free refit of both parameters is start-independent for these
  // quasi-linear models and could not expose the effect. The pinned fits
  // polish to step tolerance so the reported spread is not an optimizer
  // artifact.
  const Workspace w = make_workspace(data, config);
  FitConfig pinned_cfg = config;
  // Relative-improvement stopping would leave the pinned optimum fuzzy at
  // the 1e-9 level; step-based stopping polishes to machine precision.
  pinned_cfg.convergence_tol = 0.0;
  pinned_cfg.max_iterations = std::max(config.max_iterations, 200);
  for (int g = 0; g < config.scale_grid; ++g) {
    const double frac =
        config.scale_grid == 1
            ? 0.0
            : -1.0 + 2.0 * static_cast<double>(g) / (config.scale_grid - 1.0);
    const double pinned_scale = s0 * (1.0 + config.scale_perturbation * frac);
    try {
      const LmOutcome o = run_lm(w, pinned_cfg, d0, pinned_scale, /*fixed_scale=*/true);
      if (!o.converged) {
        ++rep.failures;
        continue;
      }
      rep.delta_hats.push_back(canonical_delta(o.delta, even_in_delta(config)));
    } catch (const std::exception&) {
      ++rep.failures;
    }
  }

  for (std::size_t i = 0; i < rep.delta_hats.size(); ++i) {
    for (std::size_t j = i + 1; j < rep.delta_hats.size(); ++j) {
      rep.spread = std::max(
          rep.spread, wrapped_distance(rep.delta_hats[i], rep.delta_hats[j], two_pi));
    }
  }
  // A multiple-of-sigma_delta threshold fails in both regimes this flag must
  // separate: in flat fits sigma_delta inflates together with the spread,
  // and on near-exact data it collapses to zero. The relative floor is the
  // one comparator that tracks the quantity the flag is about: whether the
  // assumed count scale moves the estimate by a meaningful fraction.
  rep.threshold =
      config.dependence_relative_floor * std::max(std::abs(central.delta_hat_rad), 0.1);
  rep.dependent = rep.spread > rep.threshold;
  return rep;
}

double relative_error(double delta_hat_rad, double delta_std_rad) {
  if (!(delta_std_rad > 0.0)) {
    throw std::invalid_argument("relative_error: delta_std must be > 0");
  }
  return wrapped_distance(delta_hat_rad, delta_std_rad, two_pi) / delta_std_rad;
}

AggregateSummary aggregate(const std::vector<FitResult>& results, double delta_std_rad) {
  if (results.size() < 2) throw std::invalid_argument("aggregate: need at least 2 results");
  AggregateSummary s;
  s.n = static_cast<int>(results.size());
  double sum_d = 0.0, sum_e = 0.0;
  std::vector<double> errs;
  errs.reserve(results.size());
  for (const auto& r : results) {
    sum_d += r.delta_hat_rad;
    errs.push_back(relative_error(r.delta_hat_rad, delta_std_rad));
    sum_e += errs.back();
  }
  s.mean_delta = sum_d / s.n;
  s.mean_rel_error = sum_e / s.n;
  double var_d = 0.0, var_e = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    var_d += (results[i].delta_hat_rad - s.mean_delta) * (results[i].delta_hat_rad - s.mean_delta);
    var_e += (errs[i] - s.mean_rel_error) * (errs[i] - s.mean_rel_error);
  }
  s.std_delta = std::sqrt(var_d / (s.n - 1));
  s.std_rel_error = std::sqrt(var_e / (s.n - 1));
  return s;
}

}  // namespace qell
