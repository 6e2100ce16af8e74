// Joint fits of emitter spectra: the two-transition fit with shared
// dephasing and phase offset, and the saturation series with a shared
// power-to-Rabi calibration.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wgphase/extrema.hpp"
#include "wgphase/interferometer.hpp"
#include "wgphase/lm.hpp"
#include "wgphase/phasor.hpp"
#include "wgphase/scattering.hpp"
#include "wgphase/spectrum.hpp"

namespace wgphase {

struct SpectrumFitOptions {
  CombinationRule rule = CombinationRule::isolated;
  double omega_r = 0.0;  // drive during the measurement; 0 = linear response
  LmOptions lm;
  std::optional<Eigen::VectorXd> init;
  std::optional<Bounds> bounds;
};

struct SpectrumFit {
  FitResult fit;
  std::vector<EmitterParams> emitters;
};

/// Parameter names for an n-transition fit:
/// beta1, gamma1, f0_1, beta2, gamma2, f0_2, ..., gamma_dp, phi0.
inline std::vector<std::string> dipole_parameter_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 1; i <= n; ++i) {
    const auto s = std::to_string(i);
    names.push_back("beta" + s);
    names.push_back("gamma" + s);
    names.push_back("f0_" + s);
  }
  names.push_back("gamma_dp");
  names.push_back("phi0");
  return names;
}

inline std::vector<EmitterParams> emitters_from_vector(const Eigen::VectorXd& x, std::size_t n) {
  std::vector<EmitterParams> out;
  const auto shared = static_cast<Eigen::Index>(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto o = static_cast<Eigen::Index>(3 * i);
    out.push_back(EmitterParams::isotropic(x[o], x[o + 1], x[shared], x[o + 2], x[shared + 1]));
  }
  return out;
}

inline Eigen::VectorXd vector_from_emitters(std::span<const EmitterParams> emitters) {
  const auto n = emitters.size();
  Eigen::VectorXd x(static_cast<Eigen::Index>(3 * n + 2));
  for (std::size_t i = 0; i < n; ++i) {
    const auto o = static_cast<Eigen::Index>(3 * i);
    x[o] = emitters[i].beta;
    x[o + 1] = emitters[i].gamma;
    x[o + 2] = emitters[i].f0;
  }
  x[static_cast<Eigen::Index>(3 * n)] = emitters.front().gamma_dp;
  x[static_cast<Eigen::Index>(3 * n + 1)] = emitters.front().phi0;
  return x;
}

namespace detail {

inline std::size_t residual_count(std::span<const DipoleSpectrum> spectra) {
  std::size_t m = 0;
  for (const auto& s : spectra) m += s.phase.size() + s.intensity.size();
  return m;
}

/// Append weighted residuals of one spectrum for a given response function.
template <class Response>
void append_residuals(const DipoleSpectrum& s, IntensityChannel channel, double phi0, Response&& response,
                      Eigen::VectorXd& r, Eigen::Index& k) {
  for (std::size_t i = 0; i < s.freq.size(); ++i) {
    const ScatterResponse resp = response(s.freq[i]);
    if (s.has_phase()) r[k++] = wrap_phase(s.phase[i] - (std::arg(resp.t) + phi0)) / s.phase_err[i];
    if (s.has_intensity()) r[k++] = (s.intensity[i] - channel_value(resp, channel)) / s.intensity_err[i];
  }
}

inline double circular_mean(std::span<const double> angles) {
  double c = 0.0, s = 0.0;
  for (double a : angles) {
    c += std::cos(a);
    s += std::sin(a);
  }
  return std::atan2(s, c);
}

}  // namespace detail

/// Deterministic starting point from one spectrum: f0 and the width from the
/// intensity dip, the phase offset from the far-detuned phase, the coupling
/// strength from the largest phase excursion, and beta from the dip depth.
inline EmitterParams initial_guess(const DipoleSpectrum& s, IntensityChannel channel) {
  s.validate();
  const std::size_t n = s.freq.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return s.freq[a] < s.freq[b]; });
  const double span = s.freq[order.back()] - s.freq[order.front()];

  // Far-detuned phase: outer 10% on each side.
  double phi0 = 0.0;
  std::vector<double> sorted_phase;
  if (s.has_phase()) {
    for (auto i : order) sorted_phase.push_back(s.phase[i]);
    sorted_phase = unwrap_nearest_branch(sorted_phase);
    const std::size_t edge = std::max<std::size_t>(1, n / 10);
    std::vector<double> outer(sorted_phase.begin(), sorted_phase.begin() + static_cast<std::ptrdiff_t>(edge));
    outer.insert(outer.end(), sorted_phase.end() - static_cast<std::ptrdiff_t>(edge), sorted_phase.end());
    phi0 = detail::circular_mean(outer);
  }

  double f0 = 0.5 * (s.freq[order.front()] + s.freq[order.back()]);
  double gamma2 = kPi * span / 10.0;
  std::optional<double> depth;
  if (s.has_intensity()) {
    std::size_t imin = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (s.intensity[order[j]] < s.intensity[order[imin]]) imin = j;
    f0 = s.freq[order[imin]];
    const double base = 1.0;
    const double floor = s.intensity[order[imin]];
    depth = std::clamp(base - floor, 1e-3, 1.0);
    const double half = base - 0.5 * *depth;
    auto crossing = [&](int dir) -> std::optional<double> {
      for (long j = static_cast<long>(imin); j >= 0 && j < static_cast<long>(n); j += dir) {
        const long prev = j - dir;
        if (s.intensity[order[static_cast<std::size_t>(j)]] >= half && prev >= 0 && prev < static_cast<long>(n)) {
          const double y0 = s.intensity[order[static_cast<std::size_t>(prev)]];
          const double y1 = s.intensity[order[static_cast<std::size_t>(j)]];
          const double x0 = s.freq[order[static_cast<std::size_t>(prev)]];
          const double x1 = s.freq[order[static_cast<std::size_t>(j)]];
          return x0 + (half - y0) * (x1 - x0) / (y1 - y0);
        }
      }
      return std::nullopt;
    };
    const auto left = crossing(-1), right = crossing(+1);
    if (left && right) gamma2 = kPi * (*right - *left);
    else if (left) gamma2 = kTwoPi * (f0 - *left);
    else if (right) gamma2 = kTwoPi * (*right - f0);
  } else if (s.has_phase()) {
    std::size_t jmax = 0, jmin = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (sorted_phase[j] > sorted_phase[jmax]) jmax = j;
      if (sorted_phase[j] < sorted_phase[jmin]) jmin = j;
    }
    const double fa = s.freq[order[jmax]], fb = s.freq[order[jmin]];
    f0 = 0.5 * (fa + fb);
    gamma2 = std::max(kPi * std::abs(fa - fb), 1e-3);
  }
  gamma2 = std::max(gamma2, 1e-3);

  // Coupling strength a = beta gamma / 2 from the largest phase excursion:
  // tan|phi|_max = a / (2 sqrt(gamma2^2 - a gamma2)).
  double a = 0.5 * gamma2;
  if (s.has_phase()) {
    double excursion = 0.0;
    for (double v : sorted_phase) excursion = std::max(excursion, std::abs(v - phi0));
    const double tmax = std::tan(std::min(excursion, 1.5));
    a = 2.0 * gamma2 * tmax * (std::sqrt(tmax * tmax + 1.0) - tmax);
  } else if (depth && channel == IntensityChannel::coherent) {
    a = gamma2 * *depth;
  }
  a = std::clamp(a, 1e-3 * gamma2, 0.999 * gamma2);

  double beta = 0.9;
  if (depth && channel == IntensityChannel::transmitted) beta = std::clamp(2.0 - *depth * gamma2 / a, 0.05, 1.0);
  double gamma = 2.0 * a / beta;
  if (0.5 * gamma > gamma2) {
    gamma = 1.8 * gamma2;
    beta = std::clamp(2.0 * a / gamma, 0.05, 1.0);
  }
  const double gamma_dp = std::max(gamma2 - 0.5 * gamma, 0.0);
  return EmitterParams::isotropic(beta, gamma, gamma_dp, f0, phi0);
}

inline Bounds default_dipole_bounds(std::span<const DipoleSpectrum> spectra) {
  const std::size_t n = spectra.size();
  const auto dim = static_cast<Eigen::Index>(3 * n + 2);
  Bounds b{Eigen::VectorXd(dim), Eigen::VectorXd(dim)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto [lo, hi] = std::minmax_element(spectra[i].freq.begin(), spectra[i].freq.end());
    const double span = *hi - *lo;
    const auto o = static_cast<Eigen::Index>(3 * i);
    b.lower[o] = 0.0;
    b.upper[o] = 1.0;
    b.lower[o + 1] = 1e-2;
    b.upper[o + 1] = 500.0;
    b.lower[o + 2] = *lo - span;
    b.upper[o + 2] = *hi + span;
  }
  b.lower[dim - 2] = 0.0;
  b.upper[dim - 2] = 500.0;
  b.lower[dim - 1] = -kPi;
  b.upper[dim - 1] = kPi;
  return b;
}

/// Mark a fit as failed when the normal matrix has a flat direction.
inline void check_identifiability(FitResult& fit, const LmOptions& opts) {
  if (fit.conditioning < opts.flat_ratio) {
    fit.converged = false;
    fit.diagnostic = "non-identifiable: " + describe_flat_direction(fit);
    fit.warnings.push_back(fit.diagnostic);
  }
}

/// Joint weighted least squares over phase and intensity of one or two
/// transitions with shared gamma_dp and phi0, in linear response unless
/// opts.omega_r is set.
inline SpectrumFit fit_two_dipole_spectra(const SpectrumDataset& data, const SpectrumFitOptions& opts = {}) {
  detail::require(!data.dipoles.empty() && data.dipoles.size() <= 2,
                  "fit_two_dipole_spectra: need one or two transitions");
  for (const auto& d : data.dipoles) d.validate();
  const std::size_t nd = data.dipoles.size();
  const std::span<const DipoleSpectrum> spectra(data.dipoles);

  Eigen::VectorXd init;
  if (opts.init) {
    init = *opts.init;
  } else {
    std::vector<EmitterParams> guesses;
    for (const auto& d : data.dipoles) guesses.push_back(initial_guess(d, data.channel));
    init = vector_from_emitters(guesses);
    double dp = 0.0;
    std::vector<double> offsets;
    for (const auto& g : guesses) {
      dp += g.gamma_dp / static_cast<double>(nd);
      offsets.push_back(g.phi0);
    }
    init[static_cast<Eigen::Index>(3 * nd)] = dp;
    init[static_cast<Eigen::Index>(3 * nd + 1)] = detail::circular_mean(offsets);
  }
  const Bounds bounds = opts.bounds ? *opts.bounds : default_dipole_bounds(spectra);
  detail::require(init.size() == static_cast<Eigen::Index>(3 * nd + 2), "fit_two_dipole_spectra: init size mismatch");
  init = bounds.project(init);

  const auto m = static_cast<Eigen::Index>(detail::residual_count(spectra));
  auto model = [&](const Eigen::VectorXd& x) {
    const auto emitters = emitters_from_vector(x, nd);
    Eigen::VectorXd r(m);
    Eigen::Index k = 0;
    const double phi0 = x[static_cast<Eigen::Index>(3 * nd + 1)];
    for (std::size_t d = 0; d < nd; ++d) {
      if (opts.rule == CombinationRule::isolated) {
        detail::append_residuals(spectra[d], data.channel, phi0,
                                 [&](double f) { return scatter_at_frequency(emitters[d], f, opts.omega_r); }, r, k);
      } else {
        detail::append_residuals(spectra[d], data.channel, phi0,
                                 [&](double f) { return combined_response(emitters, f, opts.omega_r); }, r, k);
      }
    }
    return r;
  };

  SpectrumFit out;
  out.fit = lm_minimize(model, init, bounds, opts.lm, dipole_parameter_names(nd));
  check_identifiability(out.fit, opts.lm);
  out.emitters = emitters_from_vector(out.fit.params, nd);
  return out;
}

// ---------------------------------------------------------------------------
// Saturation series

struct SaturationFit {
  FitResult fit;
  EmitterParams emitter;
  double k = 0.0;  // (rad/ns)^2 per unit power
  bool k_at_bound = false;
  double n_c = 0.0;
};

inline std::vector<std::string> saturation_parameter_names() {
  return {"beta", "gamma", "f0", "gamma_dp", "phi0", "k"};
}

/// Global fit of (beta, gamma, f0, gamma_dp, phi0, k) to spectra taken at
/// several powers, with omega_r^2 = k * power for each dataset.
inline SaturationFit fit_saturation_series(std::span<const SpectrumDataset> datasets, const LmOptions& lm = {},
                                           std::optional<Eigen::VectorXd> init_override = std::nullopt) {
  if (datasets.size() == 1)
    throw InputError("fit_saturation_series: a single power level leaves the calibration k unidentifiable");
  detail::require(datasets.size() >= 3, "fit_saturation_series: need at least 3 power levels");
  const IntensityChannel channel = datasets.front().channel;
  std::vector<double> powers;
  for (const auto& d : datasets) {
    detail::require(d.dipoles.size() == 1, "fit_saturation_series: each dataset must hold exactly one transition");
    detail::require(d.power.has_value() && std::isfinite(*d.power) && *d.power >= 0.0,
                    "fit_saturation_series: every dataset needs a power >= 0");
    detail::require(d.channel == channel, "fit_saturation_series: datasets mix intensity channels");
    d.dipoles.front().validate();
    powers.push_back(*d.power);
  }
  {
    auto sorted = powers;
    std::sort(sorted.begin(), sorted.end());
    detail::require(std::unique(sorted.begin(), sorted.end()) - sorted.begin() >= 3,
                    "fit_saturation_series: need at least 3 distinct power levels");
  }

  std::size_t m_total = 0;
  for (const auto& d : datasets) m_total += detail::residual_count(d.dipoles);
  const auto m = static_cast<Eigen::Index>(m_total);

  auto model = [&](const Eigen::VectorXd& x) {
    const auto e = EmitterParams::isotropic(x[0], x[1], x[3], x[2], x[4]);
    Eigen::VectorXd r(m);
    Eigen::Index k = 0;
    for (std::size_t j = 0; j < datasets.size(); ++j) {
      const double omega = std::sqrt(std::max(x[5], 0.0) * powers[j]);
      detail::append_residuals(datasets[j].dipoles.front(), channel, x[4],
                               [&](double f) { return scatter_at_frequency(e, f, omega); }, r, k);
    }
    return r;
  };

  const std::size_t lowest =
      static_cast<std::size_t>(std::min_element(powers.begin(), powers.end()) - powers.begin());
  const auto& spec0 = datasets[lowest].dipoles.front();
  Bounds bounds{Eigen::VectorXd(6), Eigen::VectorXd(6)};
  {
    const auto [lo, hi] = std::minmax_element(spec0.freq.begin(), spec0.freq.end());
    const double span = *hi - *lo;
    bounds.lower << 0.0, 1e-2, *lo - span, 0.0, -kPi, 0.0;
    bounds.upper << 1.0, 500.0, *hi + span, 500.0, kPi, 1e12;
  }

  Eigen::VectorXd init(6);
  if (init_override) {
    init = *init_override;
  } else {
    const auto g = initial_guess(spec0, channel);
    init << g.beta, g.gamma, g.f0, g.gamma_dp, g.phi0, 0.0;
    // Calibration: log scan over k with the other parameters held.
    double p_ref = 0.0;
    for (double p : powers) p_ref = std::max(p_ref, p);
    double best_k = 0.0, best_chi2 = model(init).squaredNorm();
    if (p_ref > 0.0) {
      const double k_sat = g.gamma * g.gamma2() / (4.0 * p_ref);  // saturates the top power
      for (int i = -40; i <= 40; ++i) {
        Eigen::VectorXd trial = init;
        trial[5] = k_sat * std::pow(10.0, 0.1 * i);
        const double c = model(trial).squaredNorm();
        if (c < best_chi2) {
          best_chi2 = c;
          best_k = trial[5];
        }
      }
    }
    init[5] = best_k;
  }
  init = bounds.project(init);

  SaturationFit out;
  out.fit = lm_minimize(model, init, bounds, lm, saturation_parameter_names());
  check_identifiability(out.fit, lm);
  const auto& x = out.fit.params;
  out.emitter = EmitterParams::isotropic(x[0], x[1], x[3], x[2], x[4]);
  out.k = x[5];
  out.k_at_bound = out.fit.at_bound[5];
  if (out.k_at_bound) out.fit.warnings.push_back("calibration k pinned at a bound");
  out.n_c = x[0] > 0.0 ? critical_photon_flux(out.emitter) : std::numeric_limits<double>::infinity();
  return out;
}

struct PowerPoint {
  double power = 0.0;
  double omega_r = 0.0;
  double delta_star = 0.0;
  double phi_max = 0.0;  // signed
};

/// Largest phase shift versus drive power, omega_r = sqrt(k * power).
inline std::vector<PowerPoint> predict_phase_vs_power(const EmitterParams& p, double k, std::span<const double> powers) {
  detail::require(std::isfinite(k) && k > 0.0, "predict_phase_vs_power: k must be > 0");
  std::vector<PowerPoint> out;
  for (double power : powers) {
    detail::require(std::isfinite(power) && power >= 0.0, "predict_phase_vs_power: powers must be >= 0");
    const double omega = std::sqrt(k * power);
    const auto ext = phase_extrema_numeric(p, omega);
    out.push_back({power, omega, ext.delta_star, ext.phi_max});
  }
  return out;
}

}  // namespace wgphase
