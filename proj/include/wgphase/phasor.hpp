// Fringe phasors from paired emitter-on / emitter-off sweeps.
//
// Each window of the sweep is fitted with
//   counts(f) = A(u) + Re[ C(u) exp(i 2 pi f dL / c) ],   u = (f - f_c) / W,
// where A and C are low-order polynomials in the normalised window
// coordinate. The value at the window centre, A(0) and C(0) = b exp(i psi),
// is the local offset and fringe phasor. The polynomial terms absorb the
// variation of the emitter response across the window.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wgphase/error.hpp"
#include "wgphase/interferometer.hpp"
#include "wgphase/pathlength.hpp"
#include "wgphase/units.hpp"

namespace wgphase {

struct PhasorPoint {
  double freq = 0.0;          // window centre, GHz
  double phase_shift = 0.0;   // psi_on - psi_off, wrapped to (-pi, pi]
  double phase_err = 0.0;
  double amp_ratio = 0.0;     // b_on / b_off  (-> |t|)
  double amp_err = 0.0;
  double offset_ratio = 0.0;  // (a_on - lo) / (a_off - lo)
  double offset_err = 0.0;
  bool low_contrast = false;  // on-fringe amplitude below the noise floor
};

enum class WindowWeights {
  poisson,   // variance = expected counts; uncertainties from shot noise
  residual,  // unit weights, covariance scaled by the window's reduced chi2
};

struct ExtractOptions {
  double window_periods = 3.0;
  double step_periods = 0.0;                 // 0: same as the window (no overlap)
  std::optional<double> delta_l;             // m; estimated from the off trace when empty
  std::optional<double> lo_counts;           // LO counts per bin; taken from trace meta when empty
  int poly_degree = 2;
  WindowWeights weights = WindowWeights::poisson;
  double low_contrast_snr = 3.0;
};

/// Local fit of one window of one trace.
struct WindowFit {
  double offset = 0.0;
  std::complex<double> phasor{};
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();  // (offset, Re C, Im C)
};

namespace detail {

inline WindowFit fit_window(std::span<const double> freq, std::span<const double> counts, double center,
                            double width, double k_geo, int degree, WindowWeights weights) {
  const auto m = static_cast<Eigen::Index>(freq.size());
  const int terms = degree + 1;
  Eigen::MatrixXd x(m, 3 * terms);
  Eigen::VectorXd y(m);
  Eigen::VectorXd w(m);
  std::array<double, 5> legendre{};
  for (Eigen::Index i = 0; i < m; ++i) {
    const double f = freq[static_cast<std::size_t>(i)];
    // Legendre polynomials on v in [-1, 1]; P_k(0) = 0 for odd k, so only
    // the even terms contribute at the centre.
    const double v = 2.0 * (f - center) / width;
    legendre[0] = 1.0;
    if (terms > 1) legendre[1] = v;
    for (int k = 2; k < terms; ++k)
      legendre[static_cast<std::size_t>(k)] =
          ((2.0 * k - 1.0) * v * legendre[static_cast<std::size_t>(k - 1)] -
           (k - 1.0) * legendre[static_cast<std::size_t>(k - 2)]) / k;
    const double theta = k_geo * (f - center);
    const double c = std::cos(theta), s = std::sin(theta);
    for (int k = 0; k < terms; ++k) {
      const double pk = legendre[static_cast<std::size_t>(k)];
      x(i, k) = pk;
      x(i, terms + k) = pk * c;       // Re C
      x(i, 2 * terms + k) = -pk * s;  // Im C
    }
    y[i] = counts[static_cast<std::size_t>(i)];
    w[i] = weights == WindowWeights::poisson ? 1.0 / std::max(y[i], 1.0) : 1.0;
  }
  const Eigen::VectorXd sw = w.cwiseSqrt();
  const Eigen::MatrixXd xw = sw.asDiagonal() * x;
  const Eigen::VectorXd yw = sw.asDiagonal() * y;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
  if (qr.rank() < 3 * terms) throw InputError("extract_phasor_series: window design matrix is singular");
  const Eigen::VectorXd coef = qr.solve(yw);
  const Eigen::MatrixXd normal = xw.transpose() * xw;
  Eigen::MatrixXd cov = normal.ldlt().solve(Eigen::MatrixXd::Identity(3 * terms, 3 * terms));
  if (weights == WindowWeights::residual) {
    const double dof = std::max<double>(static_cast<double>(m - 3 * terms), 1.0);
    cov *= (yw - xw * coef).squaredNorm() / dof;
  }

  // Value at the centre: sum of the even Legendre terms at v = 0.
  Eigen::VectorXd at_center = Eigen::VectorXd::Zero(terms);
  for (int k = 0; k < terms; k += 2) {
    double p0 = 1.0;  // P_k(0) = (-1)^(k/2) (k-1)!! / k!!
    for (int j = 1; j <= k / 2; ++j) p0 *= -(2.0 * j - 1.0) / (2.0 * j);
    at_center[k] = p0;
  }
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3, 3 * terms);
  g.block(0, 0, 1, terms) = at_center.transpose();
  g.block(1, terms, 1, terms) = at_center.transpose();
  g.block(2, 2 * terms, 1, terms) = at_center.transpose();
  const Eigen::Vector3d centre = g * coef;

  WindowFit fit;
  fit.offset = centre[0];
  // Undo the centre reference so the phase refers to exp(i k_geo f).
  const std::complex<double> rot = std::polar(1.0, -k_geo * center);
  fit.phasor = std::complex<double>(centre[1], centre[2]) * rot;
  Eigen::Matrix3d cov3 = g * cov * g.transpose();
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  r(1, 1) = rot.real();
  r(1, 2) = -rot.imag();
  r(2, 1) = rot.imag();
  r(2, 2) = rot.real();
  fit.cov = r * cov3 * r.transpose();
  return fit;
}

struct PolarError {
  double amp_var;
  double phase_var;
};

inline PolarError polar_variance(const WindowFit& f) {
  const double re = f.phasor.real(), im = f.phasor.imag();
  const double b2 = std::max(std::norm(f.phasor), 1e-300);
  const double b = std::sqrt(b2);
  const Eigen::Vector2d g_amp(re / b, im / b);
  const Eigen::Vector2d g_phase(-im / b2, re / b2);
  const Eigen::Matrix2d c = f.cov.bottomRightCorner<2, 2>();
  return {g_amp.dot(c * g_amp), g_phase.dot(c * g_phase)};
}

}  // namespace detail

/// Slide a window across the common grid of `on` and `off` and emit one
/// phasor point per window.
inline std::vector<PhasorPoint> extract_phasor_series(const FringeTrace& on, const FringeTrace& off,
                                                      const ExtractOptions& opts = {}) {
  on.validate();
  off.validate();
  if (on.freq != off.freq)
    throw InputError("extract_phasor_series: on/off frequency grids differ (on: " + std::to_string(on.freq.size()) +
                     " points " + std::to_string(on.freq.front()) + ".." + std::to_string(on.freq.back()) +
                     " GHz; off: " + std::to_string(off.freq.size()) + " points " + std::to_string(off.freq.front()) +
                     ".." + std::to_string(off.freq.back()) + " GHz)");
  detail::require(opts.window_periods >= 1.0, "extract_phasor_series: window must cover >= 1 fringe period");
  detail::require(opts.step_periods >= 0.0, "extract_phasor_series: step must be >= 0");
  detail::require(opts.poly_degree >= 0 && opts.poly_degree <= 4, "extract_phasor_series: poly_degree in [0, 4]");

  const double delta_l = opts.delta_l ? *opts.delta_l : estimate_path_length_fft(off).delta_l;
  detail::require(std::isfinite(delta_l) && delta_l > 0.0, "extract_phasor_series: delta_l must be > 0");
  const double lo = opts.lo_counts ? *opts.lo_counts
                                   : (off.meta.config.p_lo + off.meta.config.dark_count_rate) *
                                         off.meta.config.integration_time;

  const double period = fringe_period_ghz(delta_l);
  const double width = opts.window_periods * period;
  const double step = (opts.step_periods > 0.0 ? opts.step_periods : opts.window_periods) * period;
  const double k_geo = kTwoPi * delta_l / kSpeedOfLightMPerNs;
  const int unknowns = 3 * (opts.poly_degree + 1);

  std::vector<PhasorPoint> out;
  const auto& f = on.freq;
  std::size_t lo_idx = 0;
  for (double start = f.front(); start + width <= f.back() + 1e-12 * std::abs(f.back()) + 1e-15; start += step) {
    const double stop = start + width;
    while (lo_idx < f.size() && f[lo_idx] < start) ++lo_idx;
    std::size_t hi_idx = lo_idx;
    while (hi_idx < f.size() && f[hi_idx] <= stop) ++hi_idx;
    const std::size_t count = hi_idx - lo_idx;
    if (static_cast<int>(count) < unknowns + 2) continue;
    const double center = 0.5 * (start + stop);
    const std::span<const double> fw(f.data() + lo_idx, count);
    const auto w_on = detail::fit_window(fw, std::span(on.counts.data() + lo_idx, count), center, width, k_geo,
                                         opts.poly_degree, opts.weights);
    const auto w_off = detail::fit_window(fw, std::span(off.counts.data() + lo_idx, count), center, width, k_geo,
                                          opts.poly_degree, opts.weights);
    const auto e_on = detail::polar_variance(w_on);
    const auto e_off = detail::polar_variance(w_off);

    PhasorPoint p;
    p.freq = center;
    const double b_on = std::abs(w_on.phasor), b_off = std::abs(w_off.phasor);
    p.phase_shift = wrap_phase(std::arg(w_on.phasor) - std::arg(w_off.phasor));
    p.phase_err = std::sqrt(e_on.phase_var + e_off.phase_var);
    p.amp_ratio = b_off > 0.0 ? b_on / b_off : 0.0;
    p.amp_err = b_off > 0.0 ? std::sqrt(e_on.amp_var + p.amp_ratio * p.amp_ratio * e_off.amp_var) / b_off : 0.0;
    const double num = w_on.offset - lo, den = w_off.offset - lo;
    p.offset_ratio = den != 0.0 ? num / den : 0.0;
    p.offset_err = den != 0.0 ? std::sqrt(w_on.cov(0, 0) + p.offset_ratio * p.offset_ratio * w_off.cov(0, 0)) /
                                    std::abs(den)
                              : 0.0;
    p.low_contrast = b_on < opts.low_contrast_snr * std::sqrt(e_on.amp_var);
    out.push_back(p);
  }
  detail::require(!out.empty(), "extract_phasor_series: sweep shorter than one window");
  return out;
}

/// Nearest-branch continuation of a wrapped phase sequence.
inline std::vector<double> unwrap_nearest_branch(std::span<const double> wrapped) {
  std::vector<double> out(wrapped.begin(), wrapped.end());
  for (std::size_t i = 1; i < out.size(); ++i)
    out[i] += kTwoPi * std::round((out[i - 1] - out[i]) / kTwoPi);
  return out;
}

}  // namespace wgphase
