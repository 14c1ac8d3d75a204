#include "qell/characterization.hpp"

#include "qell/rng.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace qell {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t block) {
  return splitmix64(splitmix64(seed + 0x51ED2701u) ^ (block * 0x9E3779B97F4A7C15ull));
}

}  // namespace

VisibilityResult visibility(const SweepDataset& curve, const std::string& basis_label) {
  if (curve.records.size() < 8) {
    throw std::invalid_argument("visibility: need at least 8 points");
  }
  std::vector<double> angles, counts;
  for (const auto& r : curve.records) {
    angles.push_back(r.angle_rad);
    counts.push_back(r.counts);
  }
  const auto [mn, mx] = std::minmax_element(angles.begin(), angles.end());
  if (*mx - *mn < 0.5 * pi - 1e-9) {
    throw std::invalid_argument("visibility: sweep must span a full fringe period (pi/2)");
  }

  const Sinusoid4Fit fit = fit_sinusoid4(angles, counts);
  const double amp = std::hypot(fit.c1, fit.c2);
  const double var_amp =
      amp > 0.0 ? (fit.c1 * fit.c1 * fit.covariance(1, 1) +
                   fit.c2 * fit.c2 * fit.covariance(2, 2) +
                   2.0 * fit.c1 * fit.c2 * fit.covariance(1, 2)) /
                      (amp * amp)
                : std::max(fit.covariance(1, 1), fit.covariance(2, 2));
  if (!(fit.c0 > 0.0) || amp <= 2.0 * std::sqrt(std::max(var_amp, 0.0))) {
    throw DegenerateSweepError("visibility: fitted fringe amplitude is consistent with zero");
  }

  VisibilityResult res;
  res.basis_label = basis_label;
  res.c_max = fit.c0 + amp;
  res.c_min = fit.c0 - amp;
  res.visibility = amp / fit.c0;
  const double dv_damp = 1.0 / fit.c0;
  const double dv_dc0 = -amp / (fit.c0 * fit.c0);
  res.sigma_visibility = std::sqrt(std::max(
      dv_damp * dv_damp * var_amp + dv_dc0 * dv_dc0 * fit.covariance(0, 0), 0.0));
  return res;
}

ChshSettings canonical_chsh_settings() {
  return {0.0, 0.25 * pi, 0.125 * pi, 0.375 * pi};
}

namespace {

// Coincidence counts (or exact probabilities) for the four port pairs of one
// analyzer-angle pair; sign[i] is the CHSH parity of pair i.
struct SettingCounts {
  std::array<double, 4> n{};       // tt, tr, rt, rr
  static constexpr std::array<double, 4> sign{1.0, -1.0, -1.0, 1.0};
};

SettingCounts measure_setting(const BiphotonDensity& rho, double alpha_pol, double beta_pol,
                              double counts_per_setting, CounterRng* rng) {
  SettingCounts out;
  const std::array<Port, 2> ports{Port::transmitted, Port::reflected};
  int idx = 0;
  for (Port ps : ports) {
    for (Port pi : ports) {
      AnalyzerConfig cfg;
      cfg.signal = {0.5 * alpha_pol, ps};
      cfg.idler = {0.5 * beta_pol, pi};
      const double p = coincidence_probability(rho, cfg);
      out.n[idx] = rng ? static_cast<double>(rng->poisson(counts_per_setting * p)) : p;
      ++idx;
    }
  }
  return out;
}

}  // namespace

ChshResult chsh(const BiphotonDensity& rho, const ChshSettings& settings,
                double counts_per_setting, std::uint64_t seed) {
  ChshResult res;
  res.settings = settings;
  const std::array<std::pair<double, double>, 4> pairs{
      std::pair{settings.a1, settings.b1}, std::pair{settings.a1, settings.b2},
      std::pair{settings.a2, settings.b1}, std::pair{settings.a2, settings.b2}};

  const bool sampled = counts_per_setting > 0.0;
  double var_sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    CounterRng rng(derive_seed(seed, 100 + i), 0);
    SettingCounts sc = measure_setting(rho, pairs[i].first, pairs[i].second,
                                       counts_per_setting, sampled ? &rng : nullptr);
    const double total = sc.n[0] + sc.n[1] + sc.n[2] + sc.n[3];
    if (!(total > 0.0)) {
      throw std::invalid_argument("chsh: zero total counts in a setting");
    }
    double e = 0.0;
    for (int j = 0; j < 4; ++j) e += SettingCounts::sign[j] * sc.n[j];
    e /= total;
    res.correlations[i] = e;
    res.setting_counts[i] = sc.n;
    if (sampled) {
      // First-order Poisson propagation through E = sum s_j n_j / sum n_j.
      double v = 0.0;
      for (int j = 0; j < 4; ++j) {
        const double d = (SettingCounts::sign[j] - e) / total;
        v += d * d * sc.n[j];
      }
      var_sum += v;
    }
  }

  // The CHSH combination is defined up to which term carries the minus sign;
  // report the variant that maximizes |S|.
  double best = 0.0;
  int best_variant = 0;
  for (int v = 0; v < 4; ++v) {
    double s = 0.0;
    for (int i = 0; i < 4; ++i) s += (i == v ? -1.0 : 1.0) * res.correlations[i];
    if (std::abs(s) > std::abs(best)) {
      best = s;
      best_variant = v;
    }
  }
  res.s_value = std::abs(best);
  res.variant = best_variant;
  res.s_std = std::sqrt(var_sum);
  return res;
}

double fidelity(const BiphotonDensity& rho, const BiphotonState& target) {
  const BiphotonState t = normalized_state(target);
  const Complex v = t.adjoint() * rho * t;
  return std::clamp(v.real(), 0.0, 1.0);
}

double fidelity(const BiphotonDensity& rho, const BiphotonDensity& sigma) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(rho);
  Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0);
  const Mat4 sqrt_rho = es.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
                        es.eigenvectors().adjoint();
  Eigen::SelfAdjointEigenSolver<Mat4> em(sqrt_rho * sigma * sqrt_rho);
  const double tr = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return std::clamp(tr * tr, 0.0, 1.0);
}

const char* basis_name(Basis1 b) {
  switch (b) {
    case Basis1::H: return "H";
    case Basis1::V: return "V";
    case Basis1::D: return "D";
    case Basis1::A: return "A";
    case Basis1::R: return "R";
    case Basis1::L: return "L";
  }
  return "?";
}

Basis1 basis_from_name(const std::string& name) {
  for (Basis1 b : tomography_bases) {
    if (name == basis_name(b)) return b;
  }
  throw std::invalid_argument("unknown basis label: " + name);
}

Vec2 basis_ket(Basis1 b) {
  const double r = 1.0 / std::sqrt(2.0);
  switch (b) {
    case Basis1::H: return Vec2(Complex(1, 0), Complex(0, 0));
    case Basis1::V: return Vec2(Complex(0, 0), Complex(1, 0));
    case Basis1::D: return Vec2(Complex(r, 0), Complex(r, 0));
    case Basis1::A: return Vec2(Complex(r, 0), Complex(-r, 0));
    case Basis1::R: return Vec2(Complex(r, 0), Complex(0, -r));
    case Basis1::L: return Vec2(Complex(r, 0), Complex(0, r));
  }
  throw std::logic_error("basis_ket: unknown basis");
}

namespace {

Mat4 joint_basis_projector(Basis1 s, Basis1 i) {
  const Vec2 ks = basis_ket(s);
  const Vec2 ki = basis_ket(i);
  const Mat2 ps = ks * ks.adjoint();
  const Mat2 pi_ = ki * ki.adjoint();
  return kron2(ps, pi_);
}

double trace_with(const Mat4& op, const Mat4& rho) {
  return (op * rho).trace().real();
}

// Hermitian operator basis used by the linear-inversion seed.
std::array<Mat4, 16> hermitian_basis() {
  std::array<Mat4, 16> basis;
  int m = 0;
  for (int i = 0; i < 4; ++i) {
    Mat4 b = Mat4::Zero();
    b(i, i) = Complex(1, 0);
    basis[m++] = b;
  }
  const double r = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) {
      Mat4 b = Mat4::Zero();
      b(i, j) = Complex(r, 0);
      b(j, i) = Complex(r, 0);
      basis[m++] = b;
      Mat4 c = Mat4::Zero();
      c(i, j) = Complex(0, -r);
      c(j, i) = Complex(0, r);
      basis[m++] = c;
    }
  }
  return basis;
}

Mat4 project_to_physical(const Mat4& x) {
  const Mat4 h = 0.5 * (x + x.adjoint());
  Eigen::SelfAdjointEigenSolver<Mat4> es(h);
  Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0);
  if (ev.sum() <= 0.0) return 0.25 * Mat4::Identity();
  ev /= ev.sum();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

TomographyCounts simulate_tomography_counts(const BiphotonDensity& rho,
                                            const DetectionModel& model, std::uint64_t seed) {
  TomographyCounts out;
  int idx = 0;
  for (int s = 0; s < 6; ++s) {
    for (int i = 0; i < 6; ++i) {
      const double p = std::clamp(
          trace_with(joint_basis_projector(tomography_bases[s], tomography_bases[i]), rho), 0.0,
          1.0);
      const double mean = expected_coincidences(p, model);
      out.counts(s, i) =
          model.shot_noise
              ? static_cast<double>(sample_counts(mean, derive_seed(seed, 200), idx))
              : mean;
      ++idx;
    }
  }
  return out;
}

TomographyResult tomography(const TomographyCounts& table, const BiphotonState& target) {
  // Settings with negative or non-finite counts are treated as missing.
  std::vector<Mat4> projectors;
  std::vector<double> n;
  for (int s = 0; s < 6; ++s) {
    for (int i = 0; i < 6; ++i) {
      const double c = table.counts(s, i);
      if (!std::isfinite(c) || c < 0.0) continue;
      projectors.push_back(joint_basis_projector(tomography_bases[s], tomography_bases[i]));
      n.push_back(c);
    }
  }
  const std::size_t m = projectors.size();
  if (m < 16) throw IllConditionedError("tomography: too few settings");
  const double total = std::accumulate(n.begin(), n.end(), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("tomography: counts must be positive");

  // Flux scale: within one basis pair the four projector probabilities sum
  // to one, so the sum of all 36 settings sums to 9 for complete tables.
  double p_unit = 0.0;
  for (const auto& pr : projectors) p_unit += trace_with(pr, 0.25 * Mat4::Identity());
  const double flux0 = total / std::max(p_unit, 1e-12);

  // Linear-inversion seed.
  const auto basis = hermitian_basis();
  Eigen::MatrixXd a(m, 16);
  Eigen::VectorXd y(m);
  for (std::size_t k = 0; k < m; ++k) {
    for (int j = 0; j < 16; ++j) a(k, j) = trace_with(projectors[k], basis[j]);
    y(k) = n[k] / flux0;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-8);
  if (qr.rank() < 16) {
    throw IllConditionedError("tomography: settings do not span the state space");
  }
  const Eigen::VectorXd x = qr.solve(y);
  Mat4 rho_lin = Mat4::Zero();
  for (int j = 0; j < 16; ++j) rho_lin += x(j) * basis[j];
  // A whisper of the maximally mixed state keeps rank-deficient seeds from
  // pinning the iteration to a subspace without costing visible fidelity.
  Mat4 rho = (1.0 - 2e-7) * project_to_physical(rho_lin) + 2e-7 * 0.25 * Mat4::Identity();

  // Iterative MLE (R rho R with the flux profiled out), kept monotone by
  // mixing the update with the current iterate when needed.
  auto log_likelihood = [&](const Mat4& r, double* flux_out) {
    double sum_p = 0.0;
    std::vector<double> p(m);
    for (std::size_t k = 0; k < m; ++k) {
      p[k] = std::max(trace_with(projectors[k], r), 1e-14);
      sum_p += p[k];
    }
    const double flux = total / sum_p;
    double ll = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double mu = flux * p[k];
      ll += n[k] * std::log(mu) - mu;
    }
    if (flux_out) *flux_out = flux;
    return ll;
  };

  double ll = log_likelihood(rho, nullptr);
  int iter = 0;
  const int max_iter = 5000;
  for (; iter < max_iter; ++iter) {
    double flux = 0.0;
    log_likelihood(rho, &flux);
    Mat4 r_op = Mat4::Zero();
    for (std::size_t k = 0; k < m; ++k) {
      const double p = std::max(trace_with(projectors[k], rho), 1e-14);
      r_op += (n[k] / (flux * p)) * projectors[k];
    }
    Mat4 updated = r_op * rho * r_op;
    const double tr = updated.trace().real();
    if (!(tr > 0.0)) break;
    updated /= tr;

    double gamma = 1.0;
    Mat4 accepted = updated;
    double ll_new = log_likelihood(accepted, nullptr);
    while (ll_new < ll - 1e-15 && gamma > 1e-6) {
      gamma *= 0.5;
      accepted = ((1.0 - gamma) * rho + gamma * updated).eval();
      accepted = 0.5 * (accepted + accepted.adjoint());
      accepted /= accepted.trace().real();
      ll_new = log_likelihood(accepted, nullptr);
    }
    rho = accepted;
    const double improvement = ll_new - ll;
    ll = ll_new;
    if (std::abs(improvement) < 1e-10) {
      ++iter;
      break;
    }
  }

  TomographyResult res;
  res.rho = project_to_physical(rho);
  res.iterations = iter;
  double ll_final = log_likelihood(res.rho, nullptr);
  for (std::size_t k = 0; k < m; ++k) ll_final -= std::lgamma(n[k] + 1.0);
  res.log_likelihood = ll_final;
  res.fidelity_to_target = fidelity(res.rho, target);
  return res;
}

namespace {

SweepDataset simulate_fringe(const BiphotonDensity& rho, const DetectionModel& model,
                             double signal_hwp_rad, std::uint64_t seed) {
  SweepDataset ds;
  ds.mode = Mode::quantum;
  ds.parameter = SweptParameter::idler_hwp;
  ds.detection = model;
  ds.seed = seed;
  ds.shot_noise = model.shot_noise;
  ds.analyzer.signal = {signal_hwp_rad, Port::transmitted};
  const int points = 24;
  for (int k = 0; k < points; ++k) {
    const double h = static_cast<double>(k) * pi / points;
    AnalyzerConfig cfg = ds.analyzer;
    cfg.idler = {h, Port::transmitted};
    const double mean = expected_coincidences(coincidence_probability(rho, cfg), model);
    SweepRecord rec;
    rec.angle_rad = h;
    rec.integration_s = model.integration_time_s;
    rec.counts = model.shot_noise
                     ? static_cast<double>(sample_counts(mean, seed, static_cast<std::uint64_t>(k)))
                     : mean;
    ds.records.push_back(rec);
  }
  return ds;
}

}  // namespace

CharacterizationReport simulate_characterization(const BiphotonDensity& rho,
                                                 const DetectionModel& model,
                                                 std::uint64_t seed) {
  model.validate();
  if (!is_valid_density(rho)) {
    throw std::invalid_argument("simulate_characterization: invalid density matrix");
  }
  CharacterizationReport rep;
  rep.seed = seed;
  rep.fringe_h = simulate_fringe(rho, model, 0.0, derive_seed(seed, 1));
  rep.fringe_d = simulate_fringe(rho, model, 0.125 * pi, derive_seed(seed, 2));
  rep.vis_h = visibility(rep.fringe_h, "H");
  rep.vis_d = visibility(rep.fringe_d, "D");
  const double counts_per_setting =
      model.shot_noise ? model.pair_rate_cps * model.efficiency_signal *
                             model.efficiency_idler * model.integration_time_s
                       : 0.0;
  rep.chsh_result = chsh(rho, canonical_chsh_settings(), counts_per_setting, derive_seed(seed, 3));
  rep.tomo_counts = simulate_tomography_counts(rho, model, derive_seed(seed, 4));
  rep.tomo = tomography(rep.tomo_counts);
  return rep;
}

}  // namespace qell
