// Emitter and drive descriptions shared by every module.
#pragma once

#include <complex>
#include <string>

#include "wgphase/error.hpp"

namespace wgphase {

/// How the emitter couples to the guided mode.
///  isotropic: equal emission into both directions, `beta` is the total
///             guided fraction.
///  chiral:    directional coupling, `beta` is the fraction emitted into the
///             transmitted (forward) mode.
enum class Coupling { isotropic, chiral };

inline const char* to_string(Coupling c) { return c == Coupling::isotropic ? "isotropic" : "chiral"; }

struct EmitterParams {
  double gamma = 1.0;     // total decay rate, rad/ns
  double gamma_dp = 0.0;  // pure dephasing, rad/ns
  Coupling coupling = Coupling::isotropic;
  double beta = 1.0;      // beta or beta_dir, see Coupling
  double f0 = 0.0;        // transition frequency, GHz
  double phi0 = 0.0;      // constant spectral phase offset, rad

  /// Coherence decay rate gamma/2 + gamma_dp.
  double gamma2() const { return 0.5 * gamma + gamma_dp; }

  void validate() const {
    detail::require_finite(gamma, "gamma");
    detail::require_finite(gamma_dp, "gamma_dp");
    detail::require_finite(beta, "beta");
    detail::require_finite(f0, "f0");
    detail::require_finite(phi0, "phi0");
    detail::require(gamma > 0.0, "gamma must be > 0");
    detail::require(gamma_dp >= 0.0, "gamma_dp must be >= 0");
    detail::require(beta >= 0.0 && beta <= 1.0, "beta must lie in [0, 1]");
  }

  static EmitterParams isotropic(double beta, double gamma, double gamma_dp = 0.0,
                                 double f0 = 0.0, double phi0 = 0.0) {
    return {gamma, gamma_dp, Coupling::isotropic, beta, f0, phi0};
  }
  static EmitterParams chiral(double beta_dir, double gamma, double gamma_dp = 0.0,
                              double f0 = 0.0, double phi0 = 0.0) {
    return {gamma, gamma_dp, Coupling::chiral, beta_dir, f0, phi0};
  }

  bool operator==(const EmitterParams&) const = default;
};

/// Laser drive at one point of a sweep. With `linear_response` set the
/// saturation term is dropped exactly, whatever `omega_r` holds.
struct DriveState {
  double delta = 0.0;    // laser minus transition, rad/ns
  double omega_r = 0.0;  // Rabi frequency, rad/ns
  bool linear_response = false;

  static DriveState linear(double delta) { return {delta, 0.0, true}; }
  static DriveState driven(double delta, double omega_r) { return {delta, omega_r, false}; }

  void validate() const {
    detail::require_finite(delta, "delta");
    detail::require_finite(omega_r, "omega_r");
    detail::require(omega_r >= 0.0, "omega_r must be >= 0");
  }
};

struct BlochSteadyState {
  double rho_ee = 0.0;
  std::complex<double> rho_ge{};
};

struct ScatterResponse {
  std::complex<double> t{1.0, 0.0};  // coherent transmission amplitude
  double i_t = 1.0;                  // normalised transmitted intensity

  /// Raw emitter phase arg(t); the Fano offset is not included.
  double phase() const { return std::arg(t); }
};

}  // namespace wgphase
