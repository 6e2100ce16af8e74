// Location and size of the largest emitter-induced phase shift.
#pragma once

#include <cmath>
#include <vector>

#include "wgphase/error.hpp"
#include "wgphase/scattering.hpp"
#include "wgphase/units.hpp"

namespace wgphase {

struct AnalyticExtremum {
  double delta_plus = 0.0;  // rad/ns; the extrema sit at +/- delta_plus
  double phi_max = 0.0;     // |phi|_max, rad
  bool limit = false;       // beta == 1: resonant limit pi/2, reached at delta -> 0
};

/// Closed form for an isotropic, lifetime-limited emitter in linear response:
/// delta_pm = +/- gamma sqrt(1 - beta) / 2, |phi|_max = atan(beta / (2 sqrt(1 - beta))).
inline AnalyticExtremum phase_extrema_analytic(const EmitterParams& p) {
  p.validate();
  detail::require(p.coupling == Coupling::isotropic,
                  "phase_extrema_analytic: closed form only holds for isotropic coupling");
  detail::require(p.gamma_dp == 0.0, "phase_extrema_analytic: closed form requires gamma_dp = 0");
  if (p.beta >= 1.0) return {0.0, kPi / 2.0, true};
  const double root = std::sqrt(1.0 - p.beta);
  return {0.5 * p.gamma * root, std::atan(p.beta / (2.0 * root)), false};
}

struct NumericExtremum {
  double delta_star = 0.0;  // rad/ns, >= 0 by convention
  double phi_max = 0.0;     // signed phase arg(t) at delta_star
  bool flat = false;        // response is identically zero over the scan
};

struct ExtremumSearch {
  int grid_points = 2001;
  double span_gamma2 = 20.0;  // scan delta in [-span*gamma2, span*gamma2]
  double rel_width = 1e-10;   // golden-section stop, relative to bracket position
  int max_refine = 400;
};

/// Coarse scan followed by golden-section refinement of |arg t| for any
/// coupling, dephasing and drive. omega_r = 0 is linear response.
inline NumericExtremum phase_extrema_numeric(const EmitterParams& p, double omega_r,
                                             const ExtremumSearch& opts = {}) {
  p.validate();
  detail::require_finite(omega_r, "omega_r");
  detail::require(omega_r >= 0.0, "omega_r must be >= 0");
  detail::require(opts.grid_points >= 3, "phase_extrema_numeric: grid too small");

  auto abs_phase = [&](double delta) {
    return std::abs(scatter_response(p, DriveState::driven(delta, omega_r)).phase());
  };

  const double half = opts.span_gamma2 * p.gamma2();
  const int n = opts.grid_points;
  const double step = 2.0 * half / (n - 1);
  int best = 0;
  double best_val = -1.0;
  // ">=" while scanning upward: the response is mirror-symmetric, ties go to delta >= 0.
  for (int i = 0; i < n; ++i) {
    const double delta = (i == (n - 1) / 2 && n % 2 == 1) ? 0.0 : -half + i * step;
    const double v = abs_phase(delta);
    if (v >= best_val) {
      best_val = v;
      best = i;
    }
  }
  if (best_val <= 0.0) return {0.0, 0.0, true};

  auto grid_delta = [&](int i) { return (i == (n - 1) / 2 && n % 2 == 1) ? 0.0 : -half + i * step; };
  double a = grid_delta(std::max(best - 1, 0));
  double b = grid_delta(std::min(best + 1, n - 1));
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = abs_phase(c);
  double fd = abs_phase(d);
  const double floor_width = 1e-12 * p.gamma2();
  for (int it = 0; it < opts.max_refine; ++it) {
    if (b - a <= opts.rel_width * (std::abs(a) + std::abs(b)) + floor_width) break;
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = abs_phase(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = abs_phase(d);
    }
  }
  double delta_star = 0.5 * (a + b);
  if (abs_phase(delta_star) < best_val) delta_star = grid_delta(best);
  const double phase = scatter_response(p, DriveState::driven(delta_star, omega_r)).phase();
  // Report the non-negative-detuning member of the mirror pair.
  if (delta_star < 0.0) return {-delta_star, -phase, false};
  return {delta_star, phase, false};
}

}  // namespace wgphase
