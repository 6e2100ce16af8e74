// Time-domain reference for the steady state: integrates the Lindblad master
// equation of the driven two-level system with fixed-step RK4 until the
// density matrix stops moving. Shares no algebra with steady_state_bloch.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "wgphase/emitter.hpp"
#include "wgphase/error.hpp"

namespace wgphase {

struct OracleSettings {
  double dt = 1e-3;        // ns
  double horizon = 200.0;  // ns
  double rel_tol = 1e-12;  // relative Frobenius change per step
};

/// Step and horizon scaled to the fastest and slowest rates of the problem.
inline OracleSettings recommended_oracle_settings(const EmitterParams& p, const DriveState& d) {
  const double fastest = p.gamma + p.gamma2() + std::abs(d.delta) + 2.0 * d.omega_r;
  OracleSettings s;
  s.dt = 0.5 / fastest;
  s.horizon = 200.0 / p.gamma;
  return s;
}

inline BlochSteadyState bloch_oracle_integrate(const EmitterParams& p, const DriveState& d,
                                               const OracleSettings& s) {
  p.validate();
  d.validate();
  detail::require(s.dt > 0.0 && s.horizon > s.dt, "bloch_oracle_integrate: need 0 < dt < horizon");

  using Mat = Eigen::Matrix2cd;
  using cd = std::complex<double>;
  // basis: 0 = |g>, 1 = |e>
  Mat sigma_ge = Mat::Zero();  // |g><e|
  sigma_ge(0, 1) = 1.0;
  Mat sigma_ee = Mat::Zero();
  sigma_ee(1, 1) = 1.0;
  const Mat h = -d.delta * sigma_ee - d.omega_r * (sigma_ge + sigma_ge.adjoint());

  const Mat l_decay = std::sqrt(p.gamma) * sigma_ge;
  const Mat l_dephase = std::sqrt(2.0 * p.gamma_dp) * sigma_ee;
  const Mat ld_dag_ld = l_decay.adjoint() * l_decay;
  const Mat lp_dag_lp = l_dephase.adjoint() * l_dephase;
  const cd minus_i(0.0, -1.0);

  auto rhs = [&](const Mat& rho) -> Mat {
    Mat out = minus_i * (h * rho - rho * h);
    out += l_decay * rho * l_decay.adjoint() - 0.5 * (ld_dag_ld * rho + rho * ld_dag_ld);
    out += l_dephase * rho * l_dephase.adjoint() - 0.5 * (lp_dag_lp * rho + rho * lp_dag_lp);
    return out;
  };

  Mat rho = Mat::Zero();
  rho(0, 0) = 1.0;
  const double dt = s.dt;
  const long max_steps = static_cast<long>(std::ceil(s.horizon / dt));
  // The change must stay below tolerance for a full coherence time, so a
  // momentary stall of an oscillating approach does not count.
  const long settle = std::max<long>(16, static_cast<long>(std::ceil(1.0 / (p.gamma2() * dt))));
  long quiet = 0;
  double residual = 0.0;
  for (long n = 0; n < max_steps; ++n) {
    const Mat k1 = rhs(rho);
    const Mat k2 = rhs(rho + 0.5 * dt * k1);
    const Mat k3 = rhs(rho + 0.5 * dt * k2);
    const Mat k4 = rhs(rho + dt * k3);
    const Mat delta_rho = (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    rho += delta_rho;
    residual = delta_rho.norm() / rho.norm();
    if (!std::isfinite(residual)) throw ConvergenceError("bloch_oracle_integrate: state became non-finite", residual);
    quiet = residual < s.rel_tol ? quiet + 1 : 0;
    if (quiet >= settle) {
      return {rho(1, 1).real(), rho(0, 1)};
    }
  }
  throw ConvergenceError("bloch_oracle_integrate: no steady state within horizon", residual);
}

inline BlochSteadyState bloch_oracle_integrate(const EmitterParams& p, const DriveState& d) {
  return bloch_oracle_integrate(p, d, recommended_oracle_settings(p, d));
}

}  // namespace wgphase
