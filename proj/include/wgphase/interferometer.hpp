// Mach-Zehnder fringe synthesis.
//
// The signal arm carries the emitter; the local oscillator bypasses it. The
// expected detector rate at laser frequency f is
//
//   p_lo + p_sig I_t + 2 v sqrt(p_lo p_sig) |t| cos(2 pi f dL / c + phi_env + phi0 + arg t) + dark
//
// so the fringe amplitude follows the coherent amplitude |t| while the mean
// level picks up the full transmitted intensity I_t.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "wgphase/emitter.hpp"
#include "wgphase/error.hpp"
#include "wgphase/lock_loop.hpp"
#include "wgphase/random.hpp"
#include "wgphase/scattering.hpp"
#include "wgphase/units.hpp"

namespace wgphase {

struct ConstantPhase {
  double value = 0.0;
  bool operator==(const ConstantPhase&) const = default;
};

/// Gaussian random-walk drift (sigma rad per sample), optionally suppressed
/// by the PID lock; the locked residual is what reaches the fringes.
struct RandomWalkPhase {
  double sigma = 0.002;
  std::uint64_t seed = 1;
  std::optional<PidGains> lock = PidGains{};
  bool operator==(const RandomWalkPhase&) const = default;
};

/// amplitude * sin(2 pi frequency_hz * t), t = sample index * integration time.
struct SinusoidPhase {
  double amplitude = 0.0;
  double frequency_hz = 0.0;
  bool operator==(const SinusoidPhase&) const = default;
};

using EnvPhaseModel = std::variant<ConstantPhase, RandomWalkPhase, SinusoidPhase>;

struct InterferometerConfig {
  double delta_l = 2.78;          // m
  double visibility = 0.65;
  double p_lo = 1e6;              // counts/s
  double p_sig = 1e4;             // counts/s
  EnvPhaseModel phi_env = RandomWalkPhase{};
  double integration_time = 0.1;  // s per sample
  double dark_count_rate = 0.0;   // counts/s

  void validate() const {
    for (double v : {delta_l, visibility, p_lo, p_sig, integration_time, dark_count_rate})
      detail::require(std::isfinite(v), "interferometer config values must be finite");
    detail::require(delta_l >= 0.0, "delta_l must be >= 0");
    detail::require(visibility >= 0.0 && visibility <= 1.0, "visibility must lie in [0, 1]");
    detail::require(p_lo >= 0.0 && p_sig >= 0.0 && dark_count_rate >= 0.0, "rates must be >= 0");
    detail::require(integration_time > 0.0, "integration_time must be > 0");
  }
  bool operator==(const InterferometerConfig&) const = default;
};

struct FringeMeta {
  InterferometerConfig config;
  std::vector<EmitterParams> emitters;  // empty when not known
  bool qd_on = false;
  double omega_r = 0.0;                 // 0 = linear response
  std::optional<std::uint64_t> noise_seed;  // set once shot noise is applied
  bool operator==(const FringeMeta&) const = default;
};

/// Counts per sample versus laser frequency.
struct FringeTrace {
  std::vector<double> freq;    // GHz, strictly increasing
  std::vector<double> counts;  // expected or sampled counts per bin
  FringeMeta meta;

  void validate() const {
    detail::require(!freq.empty(), "trace is empty");
    detail::require(freq.size() == counts.size(), "trace columns differ in length");
    for (std::size_t i = 0; i < freq.size(); ++i) {
      detail::require(std::isfinite(freq[i]) && std::isfinite(counts[i]), "trace contains non-finite values");
      detail::require(counts[i] >= 0.0, "trace counts must be >= 0");
      if (i > 0) detail::require(freq[i] > freq[i - 1], "trace frequency must be strictly increasing");
    }
  }
};

/// Environmental phase for each of `n` samples, in acquisition order.
inline std::vector<double> environment_phase(const EnvPhaseModel& model, std::size_t n, double integration_time) {
  std::vector<double> out(n, 0.0);
  if (const auto* c = std::get_if<ConstantPhase>(&model)) {
    std::fill(out.begin(), out.end(), c->value);
  } else if (const auto* s = std::get_if<SinusoidPhase>(&model)) {
    for (std::size_t i = 0; i < n; ++i)
      out[i] = s->amplitude * std::sin(kTwoPi * s->frequency_hz * static_cast<double>(i) * integration_time);
  } else {
    const auto& w = std::get<RandomWalkPhase>(model);
    detail::require(std::isfinite(w.sigma) && w.sigma >= 0.0, "random-walk sigma must be >= 0");
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto eng = counter_engine(w.seed, /*stream=*/0x656e76, i);
      acc += w.sigma * std::normal_distribution<double>(0.0, 1.0)(eng);
      out[i] = acc;
    }
    if (w.lock) out = lock_loop_residual(out, *w.lock, integration_time);
  }
  return out;
}

/// Combined response of one or more emitters in series: product of the
/// coherent amplitudes, product of the transmitted intensities.
inline ScatterResponse combined_response(std::span<const EmitterParams> emitters, double f_ghz, double omega_r) {
  ScatterResponse total;
  for (const auto& e : emitters) {
    const auto r = scatter_at_frequency(e, f_ghz, omega_r);
    total.t *= r.t;
    total.i_t *= r.i_t;
  }
  return total;
}

/// Expected counts per bin over `sweep` (GHz). With qd_on false the emitters
/// are detuned away (t = 1, no phase offset) but still recorded in meta.
/// Several emitters combine as in combined_response; the phase offset of
/// the first one is applied.
inline FringeTrace fringe_trace(const InterferometerConfig& cfg, std::span<const EmitterParams> emitters,
                                std::span<const double> sweep, bool qd_on, double omega_r = 0.0) {
  cfg.validate();
  for (const auto& e : emitters) e.validate();
  detail::require(!sweep.empty(), "fringe_trace: sweep is empty");
  detail::require(std::isfinite(omega_r) && omega_r >= 0.0, "fringe_trace: omega_r must be >= 0");
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    detail::require(std::isfinite(sweep[i]), "fringe_trace: sweep contains NaN/inf");
    if (i > 0) detail::require(sweep[i] > sweep[i - 1], "fringe_trace: sweep must be strictly increasing");
  }

  const auto env = environment_phase(cfg.phi_env, sweep.size(), cfg.integration_time);
  const double coherent = 2.0 * cfg.visibility * std::sqrt(cfg.p_lo * cfg.p_sig);
  // The Fano offset belongs to the device, not to a transition: applied once.
  const double phi0 = qd_on && !emitters.empty() ? emitters.front().phi0 : 0.0;

  FringeTrace trace;
  trace.freq.assign(sweep.begin(), sweep.end());
  trace.counts.resize(sweep.size());
  trace.meta = {cfg, std::vector<EmitterParams>(emitters.begin(), emitters.end()), qd_on, omega_r, std::nullopt};
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    const double f = sweep[i];
    const ScatterResponse r = qd_on ? combined_response(emitters, f, omega_r) : ScatterResponse{};
    const double geometric = kTwoPi * f * cfg.delta_l / kSpeedOfLightMPerNs;
    const double rate = cfg.p_lo + cfg.p_sig * r.i_t +
                        coherent * std::abs(r.t) * std::cos(geometric + env[i] + phi0 + std::arg(r.t)) +
                        cfg.dark_count_rate;
    trace.counts[i] = std::max(0.0, rate) * cfg.integration_time;
  }
  return trace;
}

inline FringeTrace fringe_trace(const InterferometerConfig& cfg, const EmitterParams& p,
                                std::span<const double> sweep, bool qd_on, double omega_r = 0.0) {
  return fringe_trace(cfg, std::span<const EmitterParams>(&p, 1), sweep, qd_on, omega_r);
}

/// Replace every bin by a Poisson draw with the bin's expected count as mean.
/// Bin i always uses the engine for (seed, i).
inline FringeTrace apply_shot_noise(const FringeTrace& trace, std::uint64_t seed) {
  FringeTrace out = trace;
  for (std::size_t i = 0; i < trace.counts.size(); ++i) {
    const double mean = trace.counts[i];
    detail::require(std::isfinite(mean) && mean >= 0.0, "apply_shot_noise: expected counts must be finite and >= 0");
    if (mean == 0.0) {
      out.counts[i] = 0.0;
      continue;
    }
    auto eng = counter_engine(seed, /*stream=*/0x73686f74, i);
    out.counts[i] = static_cast<double>(std::poisson_distribution<long long>(mean)(eng));
  }
  out.meta.noise_seed = seed;
  return out;
}

/// Evenly spaced grid including both ends.
inline std::vector<double> linspace(double start, double stop, std::size_t n) {
  detail::require(n >= 2, "linspace: need at least two points");
  std::vector<double> v(n);
  const double step = (stop - start) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) v[i] = start + step * static_cast<double>(i);
  v.back() = stop;
  return v;
}

}  // namespace wgphase
