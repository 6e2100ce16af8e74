// Phase and intensity spectra of one or two emitter transitions, and the
// synthetic-data generator used to exercise the fits.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "wgphase/emitter.hpp"
#include "wgphase/error.hpp"
#include "wgphase/phasor.hpp"
#include "wgphase/random.hpp"
#include "wgphase/scattering.hpp"

namespace wgphase {

/// Which fringe quantity the intensity channel carries.
enum class IntensityChannel {
  transmitted,  // I_t, from the fringe offset (or a direct transmission measurement)
  coherent,     // |t|, from the fringe amplitude ratio
};

/// How several transitions combine on one frequency axis.
enum class CombinationRule {
  isolated,  // each spectrum sees only its own transition
  product,   // every spectrum sees t_1 t_2 ... and I_1 I_2 ...
};

/// One transition's spectrum. Either channel may be empty.
struct DipoleSpectrum {
  std::vector<double> freq;  // GHz
  std::vector<double> phase, phase_err;
  std::vector<double> intensity, intensity_err;

  bool has_phase() const { return !phase.empty(); }
  bool has_intensity() const { return !intensity.empty(); }

  void validate() const {
    const std::size_t n = freq.size();
    detail::require(has_phase() || has_intensity(), "spectrum has neither phase nor intensity data");
    if (has_phase()) detail::require(phase.size() == n && phase_err.size() == n, "phase channel length mismatch");
    if (has_intensity())
      detail::require(intensity.size() == n && intensity_err.size() == n, "intensity channel length mismatch");
    detail::require(n >= 5, "spectrum needs at least 5 points per channel");
    auto check = [](const std::vector<double>& v, const std::vector<double>& e) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        detail::require(std::isfinite(v[i]) && std::isfinite(e[i]), "spectrum contains non-finite values");
        detail::require(e[i] > 0.0, "spectrum uncertainties must be > 0");
      }
    };
    for (double f : freq) detail::require(std::isfinite(f), "spectrum frequency must be finite");
    check(phase, phase_err);
    check(intensity, intensity_err);
  }
};

struct SpectrumDataset {
  std::vector<DipoleSpectrum> dipoles;
  std::optional<double> power;  // drive power for saturation series (arbitrary units)
  IntensityChannel channel = IntensityChannel::transmitted;
};

/// Build a spectrum from extracted phasors. Uncertainties are floored at
/// `min_err` so noiseless traces still give usable weights.
inline DipoleSpectrum spectrum_from_phasors(std::span<const PhasorPoint> pts, IntensityChannel channel,
                                            double min_err = 1e-9) {
  DipoleSpectrum s;
  for (const auto& p : pts) {
    s.freq.push_back(p.freq);
    s.phase.push_back(p.phase_shift);
    s.phase_err.push_back(std::max(p.phase_err, min_err));
    if (channel == IntensityChannel::transmitted) {
      s.intensity.push_back(p.offset_ratio);
      s.intensity_err.push_back(std::max(p.offset_err, min_err));
    } else {
      s.intensity.push_back(p.amp_ratio);
      s.intensity_err.push_back(std::max(p.amp_err, min_err));
    }
  }
  return s;
}

/// Model value of the intensity channel.
inline double channel_value(const ScatterResponse& r, IntensityChannel channel) {
  return channel == IntensityChannel::transmitted ? r.i_t : std::abs(r.t);
}

struct SpectrumNoise {
  double phase_sigma = 0.0;
  double intensity_sigma = 0.0;
};

/// Spectrum of `p` (phase = arg t + phi0) on `freqs`, with optional Gaussian
/// noise. Point i draws from the engine for (seed, i).
inline DipoleSpectrum synthesize_spectrum(const EmitterParams& p, std::span<const double> freqs, double omega_r,
                                          IntensityChannel channel, const SpectrumNoise& noise, std::uint64_t seed,
                                          std::uint64_t stream = 0) {
  DipoleSpectrum s;
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    const auto r = scatter_at_frequency(p, freqs[i], omega_r);
    double ph = r.phase() + p.phi0;
    double in = channel_value(r, channel);
    if (noise.phase_sigma > 0.0 || noise.intensity_sigma > 0.0) {
      auto eng = counter_engine(seed, 0x737065630000ULL + stream, i);
      std::normal_distribution<double> g(0.0, 1.0);
      ph += noise.phase_sigma * g(eng);
      in += noise.intensity_sigma * g(eng);
    }
    s.freq.push_back(freqs[i]);
    s.phase.push_back(wrap_phase(ph));
    s.phase_err.push_back(noise.phase_sigma > 0.0 ? noise.phase_sigma : 1.0);
    s.intensity.push_back(in);
    s.intensity_err.push_back(noise.intensity_sigma > 0.0 ? noise.intensity_sigma : 1.0);
  }
  return s;
}

}  // namespace wgphase
