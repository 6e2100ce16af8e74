// Discrete-time PID lock of the interferometer phase.
//
// Each step the controller sees the residual (drift minus actuator position),
// and the actuator is moved to the PID output before the next sample. The
// returned series is the residual phase left on the interferometer.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "wgphase/error.hpp"

namespace wgphase {

struct PidGains {
  double kp = 0.4;
  double ki = 4.0;   // 1/s
  double kd = 0.0;   // s
  bool operator==(const PidGains&) const = default;
};

inline std::vector<double> lock_loop_residual(std::span<const double> drift, const PidGains& gains, double dt) {
  detail::require(std::isfinite(dt) && dt > 0.0, "lock_loop_residual: dt must be > 0");
  detail::require(std::isfinite(gains.kp) && std::isfinite(gains.ki) && std::isfinite(gains.kd),
                  "lock_loop_residual: gains must be finite");
  double amplitude = 0.0;
  for (double v : drift) {
    detail::require(std::isfinite(v), "lock_loop_residual: drift must be finite");
    amplitude = std::max(amplitude, std::abs(v));
  }

  std::vector<double> residual(drift.size());
  double correction = 0.0;
  double integral = 0.0;
  double previous = 0.0;
  for (std::size_t n = 0; n < drift.size(); ++n) {
    const double error = drift[n] - correction;
    residual[n] = error;
    if (amplitude > 0.0 && std::abs(error) > 10.0 * amplitude)
      throw UnstableGainError("lock_loop_residual: residual exceeded 10x drift amplitude at step " +
                              std::to_string(n) + "; gains are unstable");
    integral += error * dt;
    const double derivative = n == 0 ? 0.0 : (error - previous) / dt;
    previous = error;
    correction = gains.kp * error + gains.ki * integral + gains.kd * derivative;
  }
  return residual;
}

}  // namespace wgphase
