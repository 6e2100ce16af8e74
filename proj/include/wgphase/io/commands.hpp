// Command drivers behind the wgphase executable. Each takes a JSON config
// (strictly checked), resolves defaults, runs the library and returns an
// in-memory bundle; the caller decides where to write it.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wgphase/wgphase.hpp"
#include "wgphase/io/bundle.hpp"
#include "wgphase/io/datafiles.hpp"
#include "wgphase/io/json_io.hpp"

namespace wgphase::io {

inline constexpr const char* kFitSchema = "wgphase-fit/1";
inline constexpr const char* kTableSchema = "wgphase-table/1";
inline constexpr const char* kConfigSchema = "wgphase-config/1";
inline constexpr const char* kPathLengthSchema = "wgphase-pathlength/1";
inline constexpr const char* kThresholdsSchema = "wgphase-thresholds/1";

struct CommandInput {
  json config = json::object();
  std::filesystem::path base_dir;              // relative input paths resolve here
  std::optional<std::uint64_t> seed;           // --seed overrides config "seed"
  std::vector<std::string> positional;         // input files given on the command line
  DataFormat format = DataFormat::csv;
};

struct CommandResult {
  Bundle bundle;
  int exit_code = 0;                  // 0 ok, 3 fit did not converge
  std::vector<std::string> messages;  // warnings for the log
};

/// Numeric table written as CSV or JSON.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::string text(DataFormat f) const {
    if (f == DataFormat::json) return json{{"schema", kTableSchema}, {"columns", columns}, {"rows", rows}}.dump(2) + "\n";
    std::string out = std::string("# ") + kTableSchema + "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + columns[i];
    out += '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + format_number(r[i]);
      out += '\n';
    }
    return out;
  }
};

namespace detail {

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline std::filesystem::path resolve(const CommandInput& in, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || in.base_dir.empty() ? path : in.base_dir / path;
}

inline json input_record(const std::filesystem::path& path, const std::string& as_given) {
  return {{"path", as_given}, {"sha256", sha256_hex(read_text_file(path))}};
}

inline void add_trace(Bundle& b, const std::string& stem, const FringeTrace& t, DataFormat f) {
  if (f == DataFormat::json) {
    b.add(stem + ".json", trace_to_json_text(t));
  } else {
    b.add(stem + ".csv", trace_to_csv(t));
    b.add(stem + ".meta.json", meta_to_text(t.meta));
  }
}

inline void add_phasors(Bundle& b, const std::string& stem, std::span<const PhasorPoint> pts, DataFormat f) {
  b.add(stem + extension(f), f == DataFormat::json ? phasors_to_json_text(pts) : phasors_to_csv(pts));
}

inline IntensityChannel channel_from(StrictObject& o) {
  const std::string c = o.string("channel", "transmitted");
  if (c == "transmitted") return IntensityChannel::transmitted;
  if (c == "coherent") return IntensityChannel::coherent;
  throw ConfigError(o.path_of("channel"), "expected \"transmitted\" or \"coherent\"");
}

inline const char* to_string(IntensityChannel c) {
  return c == IntensityChannel::transmitted ? "transmitted" : "coherent";
}

inline LmOptions lm_from(StrictObject& o) {
  LmOptions lm;
  const auto iters = o.unsigned_integer("max_iter", static_cast<std::uint64_t>(lm.max_iter));
  if (iters == 0 || iters > 100000) throw ConfigError(o.path_of("max_iter"), "must lie in [1, 100000]");
  lm.max_iter = static_cast<int>(iters);
  return lm;
}

inline std::vector<double> sweep_from(StrictObject& o, const std::string& key, double start, double stop,
                                      std::uint64_t points) {
  if (const json* s = o.child(key)) {
    StrictObject q(*s, o.path_of(key));
    start = q.number("start_ghz", start);
    stop = q.number("stop_ghz", stop);
    points = q.unsigned_integer("points", points);
    q.finish();
  }
  if (!(stop > start) || points < 2 || points > 50'000'000)
    throw ConfigError(o.path_of(key), "need start_ghz < stop_ghz and 2 <= points <= 5e7");
  return linspace(start, stop, points);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k) { return splitmix64(seed ^ splitmix64(k)); }

inline json emitter_summary(const EmitterParams& e) {
  json j = to_json(e);
  if (e.coupling == Coupling::isotropic && e.beta > 0.0) j["n_c"] = critical_photon_flux(e);
  const auto ext = phase_extrema_numeric(e, 0.0);
  j["phi_max_linear"] = ext.phi_max;
  j["delta_star_linear"] = ext.delta_star;
  return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// simulate

/// Fringe traces with the emitters on and off, model curves per emitter and,
/// on request, a synthetic phasor spectrum per emitter.
inline CommandResult cmd_simulate(const CommandInput& in) {
  StrictObject o(in.config, "$");
  std::vector<EmitterParams> emitters{EmitterParams::isotropic(1.0, 12.3, 3.9, 0.0, -0.25)};
  if (const json* e = o.child("emitters")) emitters = emitters_from_json(*e, o.path_of("emitters"));
  if (emitters.empty()) throw ConfigError(o.path_of("emitters"), "need at least one emitter");
  InterferometerConfig cfg;
  if (const json* c = o.child("interferometer")) cfg = interferometer_from_json(*c, o.path_of("interferometer"));
  const auto sweep = detail::sweep_from(o, "sweep", -8.0, 8.0, 3201);
  const double omega_r = o.number("omega_r", 0.0);
  if (!(omega_r >= 0.0)) throw ConfigError(o.path_of("omega_r"), "must be >= 0");
  const bool traces = o.boolean("traces", true);
  const bool shot_noise = o.boolean("shot_noise", true);
  const std::uint64_t config_seed = o.unsigned_integer("seed", 1);
  const std::uint64_t seed = in.seed.value_or(config_seed);
  const std::uint64_t model_points = o.unsigned_integer("model_points", 801);
  std::optional<SpectrumNoise> spectrum;
  std::uint64_t spectrum_points = 121;
  if (const json* s = o.child("spectrum")) {
    StrictObject q(*s, o.path_of("spectrum"));
    SpectrumNoise n;
    n.phase_sigma = q.number("phase_sigma", 0.0);
    n.intensity_sigma = q.number("intensity_sigma", 0.0);
    spectrum_points = q.unsigned_integer("points", spectrum_points);
    q.finish();
    if (!(n.phase_sigma >= 0.0) || !(n.intensity_sigma >= 0.0))
      throw ConfigError(o.path_of("spectrum"), "noise sigmas must be >= 0");
    if (spectrum_points < 5) throw ConfigError(o.path_of("spectrum") + ".points", "must be >= 5");
    spectrum = n;
  }
  o.finish();

  CommandResult res;
  res.bundle.command = "simulate";
  Bundle& b = res.bundle;
  json resolved = {{"schema", kConfigSchema}, {"command", "simulate"}, {"seed", seed}, {"omega_r", omega_r},
                   {"interferometer", to_json(cfg)}, {"traces", traces}, {"shot_noise", shot_noise},
                   {"model_points", model_points},
                   {"sweep", {{"start_ghz", sweep.front()}, {"stop_ghz", sweep.back()}, {"points", sweep.size()}}}};
  resolved["emitters"] = json::array();
  for (const auto& e : emitters) resolved["emitters"].push_back(to_json(e));
  resolved["spectrum"] = spectrum ? json{{"phase_sigma", spectrum->phase_sigma},
                                         {"intensity_sigma", spectrum->intensity_sigma},
                                         {"points", spectrum_points}}
                                  : json(nullptr);

  if (traces) {
    // On and off are separate acquisitions: each gets its own drift
    // realisation and its own shot-noise stream, all derived from `seed`.
    auto trace_config = [&](std::uint64_t k) {
      InterferometerConfig c = cfg;
      if (auto* w = std::get_if<RandomWalkPhase>(&c.phi_env)) w->seed = detail::derive_seed(seed ^ w->seed, k);
      return c;
    };
    auto on = fringe_trace(trace_config(0), emitters, sweep, true, omega_r);
    auto off = fringe_trace(trace_config(1), emitters, sweep, false, omega_r);
    if (shot_noise) {
      on = apply_shot_noise(on, detail::derive_seed(seed, 2));
      off = apply_shot_noise(off, detail::derive_seed(seed, 3));
    }
    detail::add_trace(b, "trace_on", on, in.format);
    detail::add_trace(b, "trace_off", off, in.format);
  }

  if (model_points >= 2) {
    const auto grid = linspace(sweep.front(), sweep.back(), model_points);
    for (std::size_t k = 0; k < emitters.size(); ++k) {
      const auto& e = emitters[k];
      Table t{{"freq_ghz", "detuning_rad_per_ns", "arg_t", "phase_rad", "abs_t", "i_t", "re_t", "im_t"}, {}};
      for (double f : grid) {
        const auto r = scatter_at_frequency(e, f, omega_r);
        t.rows.push_back({f, kTwoPi * (f - e.f0), r.phase(), wrap_phase(r.phase() + e.phi0), std::abs(r.t), r.i_t,
                          r.t.real(), r.t.imag()});
      }
      b.add("model_" + std::to_string(k) + extension(in.format), t.text(in.format));
    }
  }

  if (spectrum) {
    for (std::size_t k = 0; k < emitters.size(); ++k) {
      const auto& e = emitters[k];
      const auto freqs = linspace(sweep.front(), sweep.back(), spectrum_points);
      const auto tr = synthesize_spectrum(e, freqs, omega_r, IntensityChannel::transmitted, *spectrum, seed, 2 * k);
      const auto co = synthesize_spectrum(e, freqs, omega_r, IntensityChannel::coherent, *spectrum, seed, 2 * k + 1);
      std::vector<PhasorPoint> pts;
      for (std::size_t i = 0; i < freqs.size(); ++i)
        pts.push_back({freqs[i], tr.phase[i], tr.phase_err[i], std::max(co.intensity[i], 0.0), co.intensity_err[i],
                       tr.intensity[i], tr.intensity_err[i], false});
      detail::add_phasors(b, "spectrum_" + std::to_string(k), pts, in.format);
    }
  }
  b.add("config.resolved.json", detail::dump(resolved));
  return res;
}

// ---------------------------------------------------------------------------
// extract

inline CommandResult cmd_extract(const CommandInput& in) {
  StrictObject o(in.config, "$");
  std::string on_path = o.string("on", ""), off_path = o.string("off", "");
  if (in.positional.size() >= 1) on_path = in.positional[0];
  if (in.positional.size() >= 2) off_path = in.positional[1];
  if (in.positional.size() > 2) throw InputError("extract: expected at most two input files (on, off)");
  ExtractOptions opts;
  opts.delta_l = o.number_opt("delta_l_m");
  opts.lo_counts = o.number_opt("lo_counts");
  if (const json* w = o.child("window")) {
    StrictObject q(*w, o.path_of("window"));
    opts.window_periods = q.number("periods", opts.window_periods);
    opts.step_periods = q.number("step_periods", opts.step_periods);
    const auto deg = q.unsigned_integer("poly_degree", static_cast<std::uint64_t>(opts.poly_degree));
    if (deg > 4) throw ConfigError(q.path_of("poly_degree"), "must lie in [0, 4]");
    opts.poly_degree = static_cast<int>(deg);
    const std::string weights = q.string("weights", "poisson");
    if (weights == "poisson") opts.weights = WindowWeights::poisson;
    else if (weights == "residual") opts.weights = WindowWeights::residual;
    else throw ConfigError(q.path_of("weights"), "expected \"poisson\" or \"residual\"");
    opts.low_contrast_snr = q.number("low_contrast_snr", opts.low_contrast_snr);
    q.finish();
  }
  o.finish();
  if (on_path.empty() || off_path.empty()) throw InputError("extract: need both an on and an off trace");

  const auto on_file = detail::resolve(in, on_path), off_file = detail::resolve(in, off_path);
  const FringeTrace on = read_trace_file(on_file);
  const FringeTrace off = read_trace_file(off_file);

  CommandResult res;
  res.bundle.command = "extract";
  json length = json::object();
  if (!opts.delta_l) {
    const auto est = estimate_path_length_fft(off);
    opts.delta_l = est.delta_l;
    length = {{"schema", kPathLengthSchema}, {"delta_l_m", est.delta_l}, {"source", "fft"}, {"peak_over_median", est.peak_over_median},
              {"warnings", est.warnings}};
    for (const auto& w : est.warnings) res.messages.push_back(w);
  } else {
    length = {{"schema", kPathLengthSchema}, {"delta_l_m", *opts.delta_l}, {"source", "config"}};
  }
  length["fringe_period_ghz"] = fringe_period_ghz(*opts.delta_l);

  const auto pts = extract_phasor_series(on, off, opts);
  std::size_t flagged = 0;
  for (const auto& p : pts) flagged += p.low_contrast ? 1 : 0;
  if (flagged > 0) res.messages.push_back(std::to_string(flagged) + " window(s) flagged low-contrast");

  Bundle& b = res.bundle;
  detail::add_phasors(b, "phasors", pts, in.format);
  Table diagram{{"freq_ghz", "re", "im"}, {}};
  for (const auto& p : pts)
    diagram.rows.push_back({p.freq, p.amp_ratio * std::cos(p.phase_shift), p.amp_ratio * std::sin(p.phase_shift)});
  b.add(std::string("phasor_diagram") + extension(in.format), diagram.text(in.format));
  b.add("pathlength.json", detail::dump(length));
  json resolved = {{"schema", kConfigSchema},
                   {"command", "extract"},
                   {"inputs", {detail::input_record(on_file, on_path), detail::input_record(off_file, off_path)}},
                   {"delta_l_m", *opts.delta_l},
                   {"lo_counts", opts.lo_counts ? json(*opts.lo_counts) : json(nullptr)},
                   {"window",
                    {{"periods", opts.window_periods},
                     {"step_periods", opts.step_periods},
                     {"poly_degree", opts.poly_degree},
                     {"weights", opts.weights == WindowWeights::poisson ? "poisson" : "residual"},
                     {"low_contrast_snr", opts.low_contrast_snr}}}};
  b.add("config.resolved.json", detail::dump(resolved));
  return res;
}

// ---------------------------------------------------------------------------
// pathlength

inline CommandResult cmd_pathlength(const CommandInput& in) {
  StrictObject o(in.config, "$");
  std::string path = o.string("trace", "");
  if (!in.positional.empty()) path = in.positional.front();
  if (in.positional.size() > 1) throw InputError("pathlength: expected one input file");
  PathLengthOptions opts;
  const auto pad = o.unsigned_integer("zero_pad", static_cast<std::uint64_t>(opts.zero_pad));
  if (pad < 1 || pad > 64) throw ConfigError(o.path_of("zero_pad"), "must lie in [1, 64]");
  opts.zero_pad = static_cast<int>(pad);
  opts.min_peak_over_median = o.number("min_peak_over_median", opts.min_peak_over_median);
  o.finish();
  if (path.empty()) throw InputError("pathlength: no input trace");
  const auto file = detail::resolve(in, path);
  const auto est = estimate_path_length_fft(read_trace_file(file), opts);

  CommandResult res;
  res.bundle.command = "pathlength";
  res.messages = est.warnings;
  res.bundle.add("pathlength.json", detail::dump({{"schema", kPathLengthSchema},
                                                  {"delta_l_m", est.delta_l},
                                                  {"peak_delay_ns", est.peak_delay_ns},
                                                  {"peak_over_median", est.peak_over_median},
                                                  {"fringe_period_ghz", fringe_period_ghz(est.delta_l)},
                                                  {"warnings", est.warnings}}));
  res.bundle.add("config.resolved.json",
                 detail::dump({{"schema", kConfigSchema},
                               {"command", "pathlength"},
                               {"inputs", {detail::input_record(file, path)}},
                               {"zero_pad", opts.zero_pad},
                               {"min_peak_over_median", opts.min_peak_over_median}}));
  return res;
}

// ---------------------------------------------------------------------------
// fit

inline CommandResult cmd_fit(const CommandInput& in) {
  StrictObject o(in.config, "$");
  std::vector<std::string> files;
  if (const json* d = o.child("dipoles")) {
    if (!d->is_array()) throw ConfigError(o.path_of("dipoles"), "expected an array of phasor file names");
    for (std::size_t i = 0; i < d->size(); ++i) {
      if (!(*d)[i].is_string())
        throw ConfigError(o.path_of("dipoles") + "[" + std::to_string(i) + "]", "expected a file name");
      files.push_back((*d)[i].get<std::string>());
    }
  }
  if (!in.positional.empty()) files = in.positional;
  const IntensityChannel channel = detail::channel_from(o);
  SpectrumFitOptions opts;
  const std::string rule = o.string("rule", "isolated");
  if (rule == "isolated") opts.rule = CombinationRule::isolated;
  else if (rule == "product") opts.rule = CombinationRule::product;
  else throw ConfigError(o.path_of("rule"), "expected \"isolated\" or \"product\"");
  opts.omega_r = o.number("omega_r", 0.0);
  if (!(opts.omega_r >= 0.0)) throw ConfigError(o.path_of("omega_r"), "must be >= 0");
  opts.lm = detail::lm_from(o);
  const double min_err = o.number("min_err", 1e-9);
  if (!(min_err > 0.0)) throw ConfigError(o.path_of("min_err"), "must be > 0");
  const json* init = o.child("init");
  const std::string init_path = o.path_of("init");
  o.finish();
  if (files.empty()) throw InputError("fit: no phasor datasets given");
  if (files.size() > 2) throw InputError("fit: at most two dipole datasets are supported");

  SpectrumDataset data;
  data.channel = channel;
  json inputs = json::array();
  for (const auto& f : files) {
    const auto file = detail::resolve(in, f);
    const auto pts = read_phasor_file(file);
    if (pts.empty()) throw InputError(f + ": empty dataset");
    data.dipoles.push_back(spectrum_from_phasors(pts, channel, min_err));
    at_path(f, [&] {
      data.dipoles.back().validate();
      return 0;
    });
    inputs.push_back(detail::input_record(file, f));
  }
  const auto names = dipole_parameter_names(data.dipoles.size());
  if (init != nullptr) {
    StrictObject q(*init, init_path);
    std::vector<EmitterParams> guesses;
    for (const auto& d : data.dipoles) guesses.push_back(initial_guess(d, channel));
    Eigen::VectorXd x = vector_from_emitters(guesses);
    for (std::size_t i = 0; i < names.size(); ++i)
      if (const auto v = q.number_opt(names[i])) x[static_cast<Eigen::Index>(i)] = *v;
    q.finish();
    opts.init = x;
  }

  const auto out = fit_two_dipole_spectra(data, opts);
  CommandResult res;
  res.bundle.command = "fit";
  res.messages = out.fit.warnings;
  json summary = {{"schema", kFitSchema}, {"model", "two_dipole"}, {"fit", to_json(out.fit)}};
  summary["emitters"] = json::array();
  for (const auto& e : out.emitters) summary["emitters"].push_back(detail::emitter_summary(e));

  Table resid{{"dipole", "freq_ghz", "phase_data", "phase_err", "phase_model", "intensity_data", "intensity_err",
               "intensity_model"},
              {}};
  Table curve{{"dipole", "freq_ghz", "phase_model", "intensity_model"}, {}};
  const double phi0 = out.emitters.front().phi0;
  for (std::size_t d = 0; d < data.dipoles.size(); ++d) {
    const auto& s = data.dipoles[d];
    auto model = [&](double f) {
      return opts.rule == CombinationRule::isolated ? scatter_at_frequency(out.emitters[d], f, opts.omega_r)
                                                    : combined_response(out.emitters, f, opts.omega_r);
    };
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < s.freq.size(); ++i) {
      const auto r = model(s.freq[i]);
      resid.rows.push_back({static_cast<double>(d), s.freq[i], s.has_phase() ? s.phase[i] : nan,
                            s.has_phase() ? s.phase_err[i] : nan, wrap_phase(r.phase() + phi0),
                            s.has_intensity() ? s.intensity[i] : nan, s.has_intensity() ? s.intensity_err[i] : nan,
                            channel_value(r, channel)});
    }
    const auto [lo, hi] = std::minmax_element(s.freq.begin(), s.freq.end());
    for (double f : linspace(*lo, *hi, 801)) {
      const auto r = model(f);
      curve.rows.push_back({static_cast<double>(d), f, wrap_phase(r.phase() + phi0), channel_value(r, channel)});
    }
  }
  Bundle& b = res.bundle;
  b.add("fit.json", detail::dump(summary));
  b.add(std::string("residuals") + extension(in.format), resid.text(in.format));
  b.add(std::string("model_curve") + extension(in.format), curve.text(in.format));
  json resolved = {{"schema", kConfigSchema}, {"command", "fit"},      {"inputs", inputs},
                   {"channel", detail::to_string(channel)}, {"rule", rule}, {"omega_r", opts.omega_r},
                   {"max_iter", opts.lm.max_iter},          {"min_err", min_err}};
  resolved["init"] = opts.init ? json(std::vector<double>(opts.init->begin(), opts.init->end())) : json(nullptr);
  b.add("config.resolved.json", detail::dump(resolved));
  if (!out.fit.converged) res.exit_code = 3;
  return res;
}

// ---------------------------------------------------------------------------
// fit-saturation

inline CommandResult cmd_fit_saturation(const CommandInput& in) {
  StrictObject o(in.config, "$");
  const json* sets = o.child("datasets");
  const std::string sets_path = o.path_of("datasets");
  const IntensityChannel channel = detail::channel_from(o);
  const LmOptions lm = detail::lm_from(o);
  const double min_err = o.number("min_err", 1e-9);
  if (!(min_err > 0.0)) throw ConfigError(o.path_of("min_err"), "must be > 0");
  const std::uint64_t curve_points = o.unsigned_integer("curve_points", 60);
  o.finish();
  if (!in.positional.empty())
    throw InputError("fit-saturation: datasets and powers come from the config file, not the command line");
  if (sets == nullptr || !sets->is_array() || sets->empty()) throw ConfigError(sets_path, "need a non-empty array");

  std::vector<SpectrumDataset> data;
  json inputs = json::array();
  std::vector<double> powers;
  for (std::size_t i = 0; i < sets->size(); ++i) {
    const std::string path = sets_path + "[" + std::to_string(i) + "]";
    StrictObject q((*sets)[i], path);
    const auto file_name = q.string_opt("phasors");
    const double power = q.required_number("power");
    q.finish();
    if (!file_name) throw ConfigError(path + ".phasors", "required file name is missing");
    if (!(power >= 0.0)) throw ConfigError(path + ".power", "must be >= 0");
    const auto file = detail::resolve(in, *file_name);
    const auto pts = read_phasor_file(file);
    SpectrumDataset d;
    d.channel = channel;
    d.power = power;
    d.dipoles.push_back(spectrum_from_phasors(pts, channel, min_err));
    data.push_back(std::move(d));
    powers.push_back(power);
    auto rec = detail::input_record(file, *file_name);
    rec["power"] = power;
    inputs.push_back(rec);
  }

  const auto out = fit_saturation_series(data, lm);
  CommandResult res;
  res.bundle.command = "fit-saturation";
  res.messages = out.fit.warnings;
  json summary = {{"schema", kFitSchema}, {"model", "saturation"}, {"fit", to_json(out.fit)},
                  {"emitter", detail::emitter_summary(out.emitter)}, {"k", out.k},
                  {"k_sigma", out.fit.sigma("k")}, {"k_at_bound", out.k_at_bound}, {"n_c", out.n_c}};
  Bundle& b = res.bundle;
  b.add("fit.json", detail::dump(summary));
  if (out.k > 0.0 && curve_points >= 2) {
    const auto [lo, hi] = std::minmax_element(powers.begin(), powers.end());
    const double p_lo = *lo > 0.0 ? *lo : *hi * 1e-3;
    std::vector<double> grid;
    for (std::uint64_t i = 0; i < curve_points; ++i)
      grid.push_back(p_lo * std::pow(*hi / p_lo, static_cast<double>(i) / static_cast<double>(curve_points - 1)));
    Table t{{"power", "omega_r", "delta_star", "phi_max"}, {}};
    for (const auto& p : predict_phase_vs_power(out.emitter, out.k, grid))
      t.rows.push_back({p.power, p.omega_r, p.delta_star, p.phi_max});
    b.add(std::string("phase_vs_power") + extension(in.format), t.text(in.format));
  } else {
    res.messages.push_back("calibration k is zero; no phase-versus-power curve");
  }
  b.add("config.resolved.json",
        detail::dump({{"schema", kConfigSchema}, {"command", "fit-saturation"}, {"inputs", inputs},
                      {"channel", detail::to_string(channel)}, {"max_iter", lm.max_iter}, {"min_err", min_err},
                      {"curve_points", curve_points}}));
  if (!out.fit.converged) res.exit_code = 3;
  return res;
}

// ---------------------------------------------------------------------------
// predict-chiral

/// Chiral thresholds plus the resonant transmission versus drive and versus
/// dephasing, and detuning curves next to the isotropic emitter of equal
/// beta.
inline CommandResult cmd_predict_chiral(const CommandInput& in) {
  StrictObject o(in.config, "$");
  EmitterParams e = EmitterParams::chiral(1.0, 1.0);
  if (const json* j = o.child("emitter")) e = emitter_from_json(*j, o.path_of("emitter"));
  if (e.coupling != Coupling::chiral) throw ConfigError(o.path_of("emitter.coupling"), "must be \"chiral\"");
  const double span = o.number("detuning_span", 5.0 * e.gamma);
  const std::uint64_t points = o.unsigned_integer("points", 401);
  std::vector<double> drives = o.numbers("omega_r");
  if (drives.empty()) drives = {0.0};
  const double omega_max = o.number("omega_max", e.gamma);
  const double gamma_dp_max = o.number("gamma_dp_max", e.gamma);
  o.finish();
  if (!(span > 0.0) || points < 2 || !(omega_max > 0.0) || !(gamma_dp_max > 0.0))
    throw InputError("predict-chiral: spans must be > 0 and points >= 2");
  for (double w : drives)
    if (!(w >= 0.0)) throw ConfigError("$.omega_r", "drive values must be >= 0");

  const auto th = chiral_thresholds(e);
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  CommandResult res;
  res.bundle.command = "predict-chiral";
  Bundle& b = res.bundle;
  b.add("thresholds.json", detail::dump({{"schema", kThresholdsSchema},
                                         {"emitter", to_json(e)},
                                         {"omega_c", opt(th.omega_c)},
                                         {"gamma_dp_c", opt(th.gamma_dp_c)},
                                         {"beta_dir_c", opt(th.beta_dir_c)}}));

  const auto deltas = linspace(-span, span, points);
  EmitterParams iso = e;
  iso.coupling = Coupling::isotropic;
  for (const auto& [label, em] : {std::pair{"chiral", e}, std::pair{"isotropic", iso}}) {
    Table t{{"omega_r", "detuning_rad_per_ns", "phase_rad", "re_t", "im_t", "abs_t", "i_t"}, {}};
    for (double w : drives)
      for (double d : deltas) {
        const auto r = scatter_response(em, w > 0.0 ? DriveState::driven(d, w) : DriveState::linear(d));
        t.rows.push_back({w, d, r.phase(), r.t.real(), r.t.imag(), std::abs(r.t), r.i_t});
      }
    b.add(std::string("detuning_") + label + extension(in.format), t.text(in.format));
  }

  Table vs_drive{{"omega_r", "re_t", "phase_rad", "i_t"}, {}};
  for (double w : linspace(0.0, omega_max, points)) {
    const auto r = scatter_response(e, DriveState::driven(0.0, w));
    vs_drive.rows.push_back({w, r.t.real(), r.phase(), r.i_t});
  }
  b.add(std::string("resonance_vs_omega") + extension(in.format), vs_drive.text(in.format));
  Table vs_dp{{"gamma_dp", "re_t", "phase_rad", "i_t"}, {}};
  for (double g : linspace(0.0, gamma_dp_max, points)) {
    EmitterParams q = e;
    q.gamma_dp = g;
    const auto r = scatter_response(q, DriveState::linear(0.0));
    vs_dp.rows.push_back({g, r.t.real(), r.phase(), r.i_t});
  }
  b.add(std::string("resonance_vs_gamma_dp") + extension(in.format), vs_dp.text(in.format));
  b.add("config.resolved.json",
        detail::dump({{"schema", kConfigSchema}, {"command", "predict-chiral"}, {"emitter", to_json(e)},
                      {"detuning_span", span}, {"points", points}, {"omega_r", drives},
                      {"omega_max", omega_max}, {"gamma_dp_max", gamma_dp_max}}));
  return res;
}

}  // namespace wgphase::io
