// Unit conventions and small numeric helpers.
//
// Rates and detunings are carried as rad/ns everywhere inside the library.
// Laser frequencies are GHz, so a frequency offset df [GHz] corresponds to a
// detuning of 2*pi*df rad/ns. Path lengths are metres.
#pragma once

#include <cmath>
#include <numbers>

namespace wgphase {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Speed of light in m/ns (so that c/dL is in GHz for dL in metres).
inline constexpr double kSpeedOfLightMPerNs = 0.299792458;

constexpr double ghz_to_rad_per_ns(double ghz) { return kTwoPi * ghz; }
constexpr double rad_per_ns_to_ghz(double w) { return w / kTwoPi; }

/// Fringe period in laser frequency (GHz) for a path-length imbalance in m.
inline double fringe_period_ghz(double delta_l_m) { return kSpeedOfLightMPerNs / delta_l_m; }

/// Wrap an angle to (-pi, pi].
inline double wrap_phase(double phi) {
  double w = std::remainder(phi, kTwoPi);  // [-pi, pi]
  if (w <= -kPi) w += kTwoPi;
  return w;
}

}  // namespace wgphase
