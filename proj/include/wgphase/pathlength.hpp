// Path-length imbalance from the dominant fringe frequency of a sweep.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <fftw3.h>

#include "wgphase/error.hpp"
#include "wgphase/interferometer.hpp"
#include "wgphase/units.hpp"

namespace wgphase {

struct PathLengthOptions {
  int zero_pad = 8;
  double min_peak_over_median = 5.0;
  double tie_fraction = 0.01;  // peaks within 1% of the maximum count as tied
  double min_periods = 8.0;
  double uniform_rtol = 1e-6;
};

struct PathLengthEstimate {
  double delta_l = 0.0;       // m
  double peak_delay_ns = 0.0; // conjugate variable at the refined peak
  double peak_over_median = 0.0;
  std::vector<std::string> warnings;
};

namespace detail {

// FFTW planning touches global planner state.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// |FFT| of a real sequence, bins 0..n/2.
inline std::vector<double> real_fft_magnitude(const std::vector<double>& input) {
  const int n = static_cast<int>(input.size());
  struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
  };
  std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * input.size())));
  std::unique_ptr<fftw_complex, FftwFree> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (input.size() / 2 + 1))));
  if (!in || !out) throw Error("fftw_malloc failed");
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(n, in.get(), out.get(), FFTW_ESTIMATE);
  }
  std::copy(input.begin(), input.end(), in.get());
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  std::vector<double> mag(input.size() / 2 + 1);
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::hypot(out.get()[k][0], out.get()[k][1]);
  return mag;
}

}  // namespace detail

/// Detrend, Hann window, zero-pad, take the strongest non-DC peak and refine
/// it with a parabola through the log magnitudes. dL = c * delay.
inline PathLengthEstimate estimate_path_length_fft(const FringeTrace& trace, const PathLengthOptions& opts = {}) {
  trace.validate();
  const std::size_t n = trace.freq.size();
  detail::require(n >= 16, "estimate_path_length_fft: need at least 16 samples");
  const double df = (trace.freq.back() - trace.freq.front()) / static_cast<double>(n - 1);
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs((trace.freq[i] - trace.freq[i - 1]) - df) > opts.uniform_rtol * df)
      throw InputError("estimate_path_length_fft: frequency grid is not uniform");

  double mean = 0.0;
  for (double c : trace.counts) mean += c;
  mean /= static_cast<double>(n);
  const std::size_t padded = n * static_cast<std::size_t>(opts.zero_pad);
  std::vector<double> buf(padded, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double hann = 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(i) / static_cast<double>(n - 1)));
    buf[i] = (trace.counts[i] - mean) * hann;
  }
  const auto mag = detail::real_fft_magnitude(buf);

  // Skip the DC main lobe (Hann: two original bins).
  const std::size_t k_min = 2 * static_cast<std::size_t>(opts.zero_pad) + 1;
  detail::require(mag.size() > k_min + 2, "estimate_path_length_fft: sweep too short");
  std::vector<double> tail(mag.begin() + static_cast<std::ptrdiff_t>(k_min), mag.end());
  std::nth_element(tail.begin(), tail.begin() + static_cast<std::ptrdiff_t>(tail.size() / 2), tail.end());
  const double median = tail[tail.size() / 2];

  double peak = 0.0;
  for (std::size_t k = k_min; k < mag.size(); ++k) peak = std::max(peak, mag[k]);
  if (!(peak > 0.0) || peak < opts.min_peak_over_median * median)
    throw NoFringeError("no fringe detected: strongest non-DC component is not above " +
                        std::to_string(opts.min_peak_over_median) + "x the median magnitude");

  PathLengthEstimate est;
  // Lowest-delay local maximum within the tie band.
  std::size_t k_star = 0;
  int tied = 0;
  for (std::size_t k = k_min; k + 1 < mag.size(); ++k) {
    if (mag[k] >= mag[k - 1] && mag[k] > mag[k + 1] && mag[k] >= (1.0 - opts.tie_fraction) * peak) {
      if (tied == 0) k_star = k;
      ++tied;
    }
  }
  if (tied == 0) {
    k_star = static_cast<std::size_t>(std::max_element(mag.begin() + static_cast<std::ptrdiff_t>(k_min), mag.end()) -
                                      mag.begin());
  }
  if (tied > 1) est.warnings.push_back("multiple fringe peaks within 1% of the maximum; chose the shortest path length");

  double refined = static_cast<double>(k_star);
  if (k_star + 1 < mag.size() && mag[k_star - 1] > 0.0 && mag[k_star + 1] > 0.0) {
    const double la = std::log(mag[k_star - 1]), lb = std::log(mag[k_star]), lc = std::log(mag[k_star + 1]);
    const double curvature = la - 2.0 * lb + lc;
    if (curvature < 0.0) refined += 0.5 * (la - lc) / curvature;
  }
  est.peak_delay_ns = refined / (static_cast<double>(padded) * df);
  est.delta_l = kSpeedOfLightMPerNs * est.peak_delay_ns;
  est.peak_over_median = median > 0.0 ? peak / median : std::numeric_limits<double>::infinity();
  const double periods = est.peak_delay_ns * (trace.freq.back() - trace.freq.front());
  if (periods < opts.min_periods)
    throw InputError("estimate_path_length_fft: sweep spans only " + std::to_string(periods) +
                     " fringe periods (need >= " + std::to_string(opts.min_periods) + ")");
  return est;
}

}  // namespace wgphase
