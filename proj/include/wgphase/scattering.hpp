// Closed-form steady-state response of a driven two-level emitter coupled to
// a single-mode waveguide.
//
// Hamiltonian in the frame of the laser: H = -delta |e><e| - omega_r (|e><g| + |g><e|),
// decay gamma into |g>, pure dephasing gamma_dp on the coherence. With
// gamma2 = gamma/2 + gamma_dp and D = gamma2^2 + delta^2 + 4 (gamma2/gamma) omega_r^2:
//
//   rho_ee = 2 gamma2 omega_r^2 / (gamma D)
//   rho_ge = -omega_r (i gamma2 + delta) / D
//   t      = 1 - g (gamma2 + i delta) / D,   g = beta gamma / 2 (isotropic), beta gamma (chiral)
#pragma once

#include <cmath>
#include <complex>
#include <optional>

#include "wgphase/emitter.hpp"
#include "wgphase/units.hpp"
#include "wgphase/error.hpp"

namespace wgphase {

namespace detail {

inline double saturation_denominator(const EmitterParams& p, const DriveState& d) {
  const double g2 = p.gamma2();
  double denom = g2 * g2 + d.delta * d.delta;
  if (!d.linear_response) denom += 4.0 * (g2 / p.gamma) * d.omega_r * d.omega_r;
  return denom;
}

}  // namespace detail

/// Steady-state excited population and ground-excited coherence. The
/// linear-response flag is ignored here; only transmission uses it.
inline BlochSteadyState steady_state_bloch(const EmitterParams& p, const DriveState& d) {
  p.validate();
  d.validate();
  const double g2 = p.gamma2();
  const double denom = g2 * g2 + d.delta * d.delta + 4.0 * (g2 / p.gamma) * d.omega_r * d.omega_r;
  BlochSteadyState s;
  s.rho_ee = 2.0 * g2 * d.omega_r * d.omega_r / (p.gamma * denom);
  s.rho_ge = -d.omega_r * std::complex<double>(d.delta, g2) / denom;
  return s;
}

/// Transmission amplitude and normalised transmitted intensity.
inline ScatterResponse scatter_response(const EmitterParams& p, const DriveState& d) {
  p.validate();
  d.validate();
  const double g2 = p.gamma2();
  const double denom = detail::saturation_denominator(p, d);
  const std::complex<double> lorentz = std::complex<double>(g2, d.delta) / denom;

  ScatterResponse r;
  if (p.coupling == Coupling::isotropic) {
    r.t = 1.0 - 0.5 * p.beta * p.gamma * lorentz;
    r.i_t = 1.0 - p.beta * p.gamma * g2 * (2.0 - p.beta) / (2.0 * denom);
  } else {
    r.t = 1.0 - p.beta * p.gamma * lorentz;
    r.i_t = 1.0 + 2.0 * p.beta * p.gamma * g2 * (p.beta - 1.0) / denom;
  }
  // 1 - z leaves a -0 imaginary part on resonance; arg(t) there must be +pi.
  r.t = {r.t.real(), r.t.imag() + 0.0};
  return r;
}

/// Transmission at laser frequency `f_ghz`, detuning taken from p.f0.
inline ScatterResponse scatter_at_frequency(const EmitterParams& p, double f_ghz, double omega_r = 0.0) {
  const double delta = kTwoPi * (f_ghz - p.f0);
  return scatter_response(p, omega_r > 0.0 ? DriveState::driven(delta, omega_r) : DriveState::linear(delta));
}

/// Mean photon number per emitter lifetime at which the response saturates,
/// n_c = (1 + 2 gamma_dp/gamma) / (4 beta^2).
inline double critical_photon_flux(const EmitterParams& p) {
  p.validate();
  detail::require(p.coupling == Coupling::isotropic, "critical_photon_flux: isotropic coupling required");
  detail::require(p.beta > 0.0, "critical_photon_flux: beta must be > 0");
  return (1.0 + 2.0 * p.gamma_dp / p.gamma) / (4.0 * p.beta * p.beta);
}

/// Values at which the resonant chiral transmission crosses zero (the phase
/// jumps from pi to 0). Each threshold varies one quantity and keeps the
/// others at the values in `p`; the dephasing and coupling thresholds are
/// taken in linear response. A threshold is empty when no crossing exists.
/// For an ideal emitter (beta_dir = 1, gamma_dp = 0) these are
/// gamma/(2 sqrt 2), gamma/2 and 1/2.
struct ChiralThresholds {
  std::optional<double> omega_c;     // rad/ns
  std::optional<double> gamma_dp_c;  // rad/ns
  std::optional<double> beta_dir_c;
};

inline ChiralThresholds chiral_thresholds(const EmitterParams& p) {
  p.validate();
  detail::require(p.coupling == Coupling::chiral, "chiral_thresholds: chiral coupling required");
  // t(delta = 0) = 1 - beta gamma / (gamma2 + 4 omega^2 / gamma)
  ChiralThresholds th;
  const double excess = p.beta * p.gamma - p.gamma2();
  if (excess > 0.0) th.omega_c = std::sqrt(0.25 * p.gamma * excess);
  const double dp = p.beta * p.gamma - 0.5 * p.gamma;
  if (dp >= 0.0) th.gamma_dp_c = dp;
  const double b = p.gamma2() / p.gamma;
  if (b <= 1.0) th.beta_dir_c = b;
  return th;
}

}  // namespace wgphase
