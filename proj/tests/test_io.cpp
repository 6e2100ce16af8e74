#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "wgphase/io/commands.hpp"

using namespace wgphase;
using namespace wgphase::io;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  const auto dir = fs::temp_directory_path() / "wgphase_test_io" / (std::string(info->test_suite_name()) + "." + info->name());
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

FringeTrace small_trace() {
  InterferometerConfig cfg;
  cfg.phi_env = ConstantPhase{0.3};
  return fringe_trace(cfg, EmitterParams::isotropic(1.0, 12.3, 3.9, 0.0, -0.25), linspace(-1.0, 1.0, 201), true);
}

template <class Fn>
std::size_t parse_error_line(Fn&& fn) {
  try {
    fn();
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

json table_json(const Bundle& b, const std::string& name) { return json::parse(b.files.at(name)); }

// Column `col` at the row whose first column is closest to x.
double json_table_at(const json& t, std::size_t col, double x) {
  double best = 1e300, out = 0.0;
  for (const auto& r : t.at("rows")) {
    const double d = std::abs(r[0].get<double>() - x);
    if (d < best) best = d, out = r[col].get<double>();
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Number text

TEST(NumberText, SeventeenDigitsRoundTrip) {
  for (double v : {0.1, -1.0 / 3.0, 6.02214076e23, 5e-324, 1.7976931348623157e308, 0.0, -0.0})
    EXPECT_TRUE(same_bits(*parse_number(format_number(v)), v)) << format_number(v);
}

TEST(NumberText, StrictParse) {
  EXPECT_EQ(parse_number("1.5"), 1.5);
  EXPECT_EQ(parse_number("-2e-3"), -2e-3);
  for (const char* bad : {"", "1,5", "1.5 ", " 1.5", "+1", "nan", "inf", "1.5x", "0x10"})
    EXPECT_FALSE(parse_number(bad).has_value()) << '"' << bad << '"';
}

// ---------------------------------------------------------------------------
// Trace files

TEST(TraceFile, WriteReadIsBitwiseEqual) {
  FringeTrace t = apply_shot_noise(small_trace(), 5);
  t.freq[3] += 1e-13;  // a value that needs all 17 digits
  const auto back = parse_trace_csv(trace_to_csv(t), "t.csv");
  ASSERT_EQ(back.freq.size(), t.freq.size());
  for (std::size_t i = 0; i < t.freq.size(); ++i) {
    EXPECT_TRUE(same_bits(back.freq[i], t.freq[i]));
    EXPECT_TRUE(same_bits(back.counts[i], t.counts[i]));
  }
  const auto from_json = parse_trace_json(trace_to_json_text(t), "t.json");
  EXPECT_EQ(from_json.freq, t.freq);
  EXPECT_EQ(from_json.counts, t.counts);
  EXPECT_EQ(from_json.meta.config.delta_l, t.meta.config.delta_l);
}

TEST(TraceFile, SidecarCarriesMetadata) {
  const auto dir = scratch_dir();
  const FringeTrace t = apply_shot_noise(small_trace(), 9);
  write_file(dir / "on.csv", trace_to_csv(t));
  write_file(dir / "on.meta.json", meta_to_text(t.meta));
  const auto back = read_trace_file(dir / "on.csv");
  EXPECT_TRUE(back.meta.qd_on);
  EXPECT_EQ(back.meta.noise_seed, std::optional<std::uint64_t>(9));
  ASSERT_EQ(back.meta.emitters.size(), 1u);
  EXPECT_EQ(back.meta.emitters[0].gamma, 12.3);
  EXPECT_EQ(back.meta.config.phi_env, t.meta.config.phi_env);
  EXPECT_EQ(back.meta.config.p_lo, t.meta.config.p_lo);
}

TEST(TraceFile, TruncatedFileReportsLine) {
  std::string doc = trace_to_csv(small_trace());
  doc.resize(doc.size() / 2);  // cut mid-record
  const auto line = parse_error_line([&] { parse_trace_csv(doc, "cut.csv"); });
  EXPECT_GT(line, 2u);
  const std::string short_row = "freq_ghz,counts\n0,10\n1\n2,30\n";
  EXPECT_EQ(parse_error_line([&] { parse_trace_csv(short_row, "s.csv"); }), 3u);
  EXPECT_EQ(parse_error_line([&] { parse_trace_csv("freq_ghz,counts\n", "h.csv"); }), 1u);
  EXPECT_EQ(parse_error_line([&] { parse_trace_csv("", "e.csv"); }), 1u);
  EXPECT_EQ(parse_error_line([&] { parse_trace_csv("freq_ghz,counts\n0,10\n1,2", "u.csv"); }), 3u);
}

TEST(TraceFile, RejectsDecreasingFrequency) {
  const std::string doc = "# wgphase-trace/1\nfreq_ghz,counts\n0,10\n1,20\n0.5,30\n";
  try {
    parse_trace_csv(doc, "d.csv");
    FAIL() << "decreasing frequency accepted";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 5u);
    EXPECT_NE(std::string(e.what()).find("strictly increasing"), std::string::npos);
  }
}

TEST(TraceFile, DecimalCommaIsAnError) {
  EXPECT_EQ(parse_error_line([&] { parse_trace_csv("freq_ghz,counts\n0,5,100\n", "c.csv"); }), 2u);
  EXPECT_EQ(parse_error_line([&] { parse_trace_csv("freq_ghz;counts\n0,5;100\n", "c.csv"); }), 1u);
  EXPECT_EQ(parse_error_line([&] { parse_trace_csv("freq_ghz,counts\n0,1e5\n1,1.2.3\n", "c.csv"); }), 3u);
}

TEST(TraceFile, RejectsNonFiniteAndNegativeCounts) {
  EXPECT_EQ(parse_error_line([&] { parse_trace_csv("freq_ghz,counts\n0,nan\n", "n.csv"); }), 2u);
  EXPECT_EQ(parse_error_line([&] { parse_trace_csv("freq_ghz,counts\n0,1\n1,-1\n", "n.csv"); }), 3u);
}

TEST(TraceFile, CrlfAndCommentsAccepted) {
  const auto t = parse_trace_csv("# note\r\nfreq_ghz,counts\r\n0,1\r\n# mid\r\n1,2\r\n", "w.csv");
  EXPECT_EQ(t.freq, (std::vector<double>{0.0, 1.0}));
}

// ---------------------------------------------------------------------------
// Phasor files

TEST(PhasorFile, RoundTripsBothFormats) {
  std::vector<PhasorPoint> pts{{-1.0, 0.1, 0.01, 0.9, 0.02, 0.8, 0.03, false},
                               {1.0 / 3.0, -3.0, 0.011, 0.0, 0.021, 1.2, 0.031, true}};
  for (const auto& back : {parse_phasor_csv(phasors_to_csv(pts), "p.csv"),
                           parse_phasor_json(phasors_to_json_text(pts), "p.json")}) {
    ASSERT_EQ(back.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
      EXPECT_TRUE(same_bits(back[i].freq, pts[i].freq));
      EXPECT_TRUE(same_bits(back[i].phase_shift, pts[i].phase_shift));
      EXPECT_TRUE(same_bits(back[i].offset_err, pts[i].offset_err));
      EXPECT_EQ(back[i].low_contrast, pts[i].low_contrast);
    }
  }
}

TEST(PhasorFile, SevenColumnFormAccepted) {
  const auto pts = parse_phasor_csv(std::string(kPhasorHeader) + "\n0,0.1,0.01,1,0.01,1,0.01\n", "p.csv");
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_FALSE(pts[0].low_contrast);
}

TEST(PhasorFile, RejectsBadFlagAndNegativeErrors) {
  const std::string h = std::string(kPhasorHeader) + ",low_contrast\n";
  EXPECT_EQ(parse_error_line([&] { parse_phasor_csv(h + "0,0,1,1,1,1,1,2\n", "p.csv"); }), 2u);
  EXPECT_EQ(parse_error_line([&] { parse_phasor_csv(h + "0,0,1,1,1,1,1,0\n1,0,-1,1,1,1,1,0\n", "p.csv"); }), 3u);
}

// ---------------------------------------------------------------------------
// Config schema

TEST(ConfigSchema, UnknownKeyReportedWithPath) {
  CommandInput in;
  in.config = json::parse(R"({"interferometer": {"phi_env": {"model": "random_walk", "sigmaa": 0.1}}})");
  try {
    cmd_simulate(in);
    FAIL() << "unknown key accepted";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "$.interferometer.phi_env.sigmaa");
  }
  in.config = json::parse(R"({"emitters": [{"beta": 0.5}, {"betta": 0.5}]})");
  try {
    cmd_simulate(in);
    FAIL() << "unknown key accepted";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "$.emitters[1].betta");
  }
}

TEST(ConfigSchema, TypeAndRangeErrorsCarryPath) {
  CommandInput in;
  in.config = json::parse(R"({"sweep": {"points": -3}})");
  EXPECT_THROW(cmd_simulate(in), ConfigError);
  in.config = json::parse(R"({"emitters": [{"beta": 1.5}]})");
  try {
    cmd_simulate(in);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "$.emitters[0]");
  }
  in.config = json::parse(R"({"interferometer": {"visibility": "high"}})");
  try {
    cmd_simulate(in);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "$.interferometer.visibility");
  }
}

TEST(ConfigSchema, ResolvedConfigRecordsDefaults) {
  CommandInput in;
  in.config = json::parse(R"({"traces": false, "model_points": 11})");
  const auto res = cmd_simulate(in);
  const auto r = json::parse(res.bundle.files.at("config.resolved.json"));
  EXPECT_EQ(r.at("schema"), kConfigSchema);
  EXPECT_EQ(r.at("seed"), 1u);
  EXPECT_EQ(r.at("interferometer").at("delta_l_m"), 2.78);
  EXPECT_EQ(r.at("emitters")[0].at("gamma"), 12.3);
  EXPECT_EQ(r.at("sweep").at("points"), 3201u);
}

TEST(ConfigSchema, ConfigRoundTripsThroughJson) {
  InterferometerConfig c;
  c.visibility = 0.4;
  RandomWalkPhase w;
  w.sigma = 0.01;
  w.lock.reset();
  c.phi_env = w;
  const auto back = interferometer_from_json(to_json(c), "$");
  EXPECT_EQ(back.visibility, 0.4);
  EXPECT_EQ(back.phi_env, c.phi_env);
}

// ---------------------------------------------------------------------------
// Bundles

TEST(Bundle, ManifestHashesMatchWrittenFiles) {
  const auto dir = scratch_dir();
  CommandInput in;
  in.config = json::parse(R"({"sweep": {"points": 401}})");
  const auto res = cmd_simulate(in);
  write_bundle(res.bundle, dir / "b");
  EXPECT_TRUE(verify_bundle(dir / "b").empty());
  const auto m = json::parse(read_text_file(dir / "b" / "manifest.json"));
  EXPECT_EQ(m.at("schema"), kBundleSchema);
  EXPECT_EQ(m.at("files").size(), res.bundle.files.size());
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");

  write_file(dir / "b" / "trace_on.csv", "tampered\n");
  EXPECT_EQ(verify_bundle(dir / "b"), std::vector<std::string>{"trace_on.csv"});
}

TEST(Bundle, FixedSeedRerunIsByteIdentical) {
  CommandInput in;
  in.config = json::parse(R"({"sweep": {"points": 801}, "spectrum": {"phase_sigma": 0.02, "intensity_sigma": 0.01}})");
  in.seed = 77;
  const auto a = cmd_simulate(in);
  const auto b = cmd_simulate(in);
  EXPECT_EQ(a.bundle.files, b.bundle.files);
  EXPECT_EQ(a.bundle.manifest(), b.bundle.manifest());
  in.seed = 78;
  const auto c = cmd_simulate(in);
  EXPECT_NE(a.bundle.files.at("trace_on.csv"), c.bundle.files.at("trace_on.csv"));
  EXPECT_NE(a.bundle.files.at("spectrum_0.csv"), c.bundle.files.at("spectrum_0.csv"));
}

TEST(Bundle, CommandLineSeedOverridesConfig) {
  CommandInput in;
  in.config = json::parse(R"({"sweep": {"points": 401}, "seed": 5})");
  const auto from_config = cmd_simulate(in);
  in.config.erase("seed");
  in.seed = 5;
  const auto from_flag = cmd_simulate(in);
  EXPECT_EQ(from_config.bundle.files.at("trace_on.csv"), from_flag.bundle.files.at("trace_on.csv"));
}

// ---------------------------------------------------------------------------
// simulate

TEST(Simulate, DefaultConfigGivesTracepair) {
  const auto res = cmd_simulate({});
  const auto& f = res.bundle.files;
  for (const char* name : {"trace_on.csv", "trace_off.csv", "trace_on.meta.json", "trace_off.meta.json",
                           "model_0.csv", "config.resolved.json"})
    EXPECT_TRUE(f.contains(name)) << name;
  const auto on = parse_trace_csv(f.at("trace_on.csv"), "on");
  const auto off = parse_trace_csv(f.at("trace_off.csv"), "off");
  EXPECT_EQ(on.freq, off.freq);
  EXPECT_EQ(on.freq.size(), 3201u);
  EXPECT_EQ(f.at("trace_on.csv").rfind("# wgphase-trace/1\n", 0), 0u);
}

TEST(Simulate, IsotropicAndChiralIdealCurves) {
  CommandInput in;
  in.format = DataFormat::json;
  in.config = json::parse(R"({
    "emitters": [{"coupling": "isotropic", "beta": 1, "gamma": 1, "gamma_dp": 0},
                 {"coupling": "chiral", "beta": 1, "gamma": 1, "gamma_dp": 0}],
    "traces": false,
    "sweep": {"start_ghz": -1, "stop_ghz": 1, "points": 101},
    "model_points": 201})");
  const auto res = cmd_simulate(in);
  const auto iso = table_json(res.bundle, "model_0.json");
  const auto chi = table_json(res.bundle, "model_1.json");
  EXPECT_EQ(iso.at("schema"), kTableSchema);
  EXPECT_NEAR(json_table_at(iso, 5, 0.0), 0.0, 1e-15);               // i_t
  EXPECT_NEAR(std::abs(json_table_at(chi, 2, 0.0)), kPi, 1e-12);     // |arg t|
  EXPECT_NEAR(json_table_at(chi, 4, 0.0), 1.0, 1e-12);               // |t|: no loss
  EXPECT_FALSE(res.bundle.files.contains("trace_on.json"));
}

TEST(Simulate, SpectrumFilesParseAsPhasors) {
  CommandInput in;
  in.config = json::parse(R"({"traces": false, "spectrum": {"phase_sigma": 0.01, "intensity_sigma": 0.01, "points": 41}})");
  const auto res = cmd_simulate(in);
  const auto pts = parse_phasor_csv(res.bundle.files.at("spectrum_0.csv"), "s");
  ASSERT_EQ(pts.size(), 41u);
  EXPECT_EQ(pts[0].phase_err, 0.01);
}

// ---------------------------------------------------------------------------
// extract and pathlength

namespace {

fs::path write_default_traces(const fs::path& dir, const std::string& extra = "{}") {
  CommandInput in;
  in.config = json::parse(extra);
  write_bundle(cmd_simulate(in).bundle, dir / "sim");
  return dir / "sim";
}

}  // namespace

TEST(Extract, OffAgainstOffIsNeutral) {
  const auto sim = write_default_traces(scratch_dir());
  CommandInput in;
  in.positional = {(sim / "trace_off.csv").string(), (sim / "trace_off.csv").string()};
  const auto res = cmd_extract(in);
  const auto pts = parse_phasor_csv(res.bundle.files.at("phasors.csv"), "p");
  ASSERT_GT(pts.size(), 40u);
  for (const auto& p : pts) {
    EXPECT_EQ(p.phase_shift, 0.0);
    EXPECT_EQ(p.amp_ratio, 1.0);
    EXPECT_EQ(p.offset_ratio, 1.0);
  }
  const auto len = json::parse(res.bundle.files.at("pathlength.json"));
  EXPECT_EQ(len.at("source"), "fft");
  EXPECT_NEAR(len.at("delta_l_m").get<double>(), 2.78, 0.01);
  EXPECT_TRUE(res.bundle.files.contains("phasor_diagram.csv"));
}

TEST(Extract, ConfigPathsResolveAgainstConfigDir) {
  const auto dir = scratch_dir();
  write_default_traces(dir);
  CommandInput in;
  in.base_dir = dir;
  in.config = json::parse(R"({"on": "sim/trace_on.csv", "off": "sim/trace_off.csv", "delta_l_m": 2.78,
                              "window": {"periods": 4, "poly_degree": 2}})");
  const auto res = cmd_extract(in);
  const auto r = json::parse(res.bundle.files.at("config.resolved.json"));
  EXPECT_EQ(r.at("inputs")[0].at("path"), "sim/trace_on.csv");
  EXPECT_EQ(r.at("inputs")[0].at("sha256").get<std::string>().size(), 64u);
  EXPECT_EQ(r.at("window").at("periods"), 4.0);
  EXPECT_EQ(json::parse(res.bundle.files.at("pathlength.json")).at("source"), "config");
}

TEST(Extract, MismatchedGridsNamed) {
  const auto dir = scratch_dir();
  const auto a = write_default_traces(dir / "a");
  const auto b = write_default_traces(dir / "b", R"({"sweep": {"start_ghz": -7, "stop_ghz": 8, "points": 3001}})");
  CommandInput in;
  in.positional = {(a / "trace_on.csv").string(), (b / "trace_off.csv").string()};
  try {
    cmd_extract(in);
    FAIL() << "mismatched grids accepted";
  } catch (const InputError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("on: 3201 points"), std::string::npos) << msg;
    EXPECT_NE(msg.find("off: 3001 points"), std::string::npos) << msg;
  }
}

TEST(Extract, MissingInputsAreBadInput) {
  CommandInput in;
  EXPECT_THROW(cmd_extract(in), InputError);
  in.positional = {"/nonexistent/on.csv", "/nonexistent/off.csv"};
  EXPECT_THROW(cmd_extract(in), InputError);
}

TEST(PathLengthCommand, ReportsLength) {
  const auto sim = write_default_traces(scratch_dir());
  CommandInput in;
  in.positional = {(sim / "trace_off.csv").string()};
  const auto j = json::parse(cmd_pathlength(in).bundle.files.at("pathlength.json"));
  EXPECT_EQ(j.at("schema"), kPathLengthSchema);
  EXPECT_NEAR(j.at("delta_l_m").get<double>(), 2.78, 2.78 * 0.005);
}

// ---------------------------------------------------------------------------
// fit and fit-saturation

TEST(FitCommand, EmptyDatasetIsBadInput) {
  const auto dir = scratch_dir();
  write_file(dir / "empty.csv", std::string("# wgphase-phasor/1\n") + kPhasorHeader + "\n");
  CommandInput in;
  in.positional = {(dir / "empty.csv").string()};
  EXPECT_THROW(cmd_fit(in), InputError);
  in.positional.clear();
  in.config = json::parse(R"({"dipoles": []})");
  EXPECT_THROW(cmd_fit(in), InputError);
}

TEST(FitCommand, RecoversDipoleTwo) {
  const auto dir = scratch_dir();
  CommandInput sim;
  sim.config = json::parse(R"({
    "emitters": [{"beta": 1, "gamma": 12.3, "gamma_dp": 3.9, "phi0": -0.25}],
    "traces": false, "model_points": 0,
    "spectrum": {"phase_sigma": 0.005, "intensity_sigma": 0.005, "points": 161}})");
  write_bundle(cmd_simulate(sim).bundle, dir);
  CommandInput in;
  in.positional = {(dir / "spectrum_0.csv").string()};
  const auto res = cmd_fit(in);
  EXPECT_EQ(res.exit_code, 0);
  const auto j = json::parse(res.bundle.files.at("fit.json"));
  EXPECT_EQ(j.at("schema"), kFitSchema);
  const auto& p = j.at("fit").at("parameters");
  EXPECT_NEAR(p.at("beta1").at("value").get<double>(), 1.0, 0.03);
  EXPECT_NEAR(p.at("gamma1").at("value").get<double>(), 12.3, 0.2);
  EXPECT_NEAR(p.at("gamma_dp").at("value").get<double>(), 3.9, 0.1);
  EXPECT_NEAR(p.at("phi0").at("value").get<double>(), -0.25, 0.01);
  EXPECT_GT(p.at("gamma1").at("sigma").get<double>(), 0.0);
  EXPECT_TRUE(j.at("fit").at("converged").get<bool>());
  EXPECT_TRUE(res.bundle.files.contains("residuals.csv"));
  EXPECT_TRUE(res.bundle.files.contains("model_curve.csv"));
}

TEST(FitCommand, IterationLimitGivesFailedFitCode) {
  const auto dir = scratch_dir();
  CommandInput sim;
  sim.config = json::parse(R"({"traces": false, "spectrum": {"phase_sigma": 0.01, "intensity_sigma": 0.01}})");
  write_bundle(cmd_simulate(sim).bundle, dir);
  CommandInput in;
  in.positional = {(dir / "spectrum_0.csv").string()};
  in.config = json::parse(R"({"max_iter": 1})");
  const auto res = cmd_fit(in);
  EXPECT_EQ(res.exit_code, 3);
  EXPECT_FALSE(json::parse(res.bundle.files.at("fit.json")).at("fit").at("converged").get<bool>());
}

TEST(FitCommand, InitKeysAreChecked) {
  const auto dir = scratch_dir();
  CommandInput sim;
  sim.config = json::parse(R"({"traces": false, "spectrum": {"phase_sigma": 0.01, "intensity_sigma": 0.01}})");
  write_bundle(cmd_simulate(sim).bundle, dir);
  CommandInput in;
  in.positional = {(dir / "spectrum_0.csv").string()};
  in.config = json::parse(R"({"init": {"gamma2": 10}})");
  try {
    cmd_fit(in);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "$.init.gamma2");
  }
}

TEST(FitSaturationCommand, SummaryHasCalibrationAndFlux) {
  const auto dir = scratch_dir();
  const double k = 2.5;
  json sets = json::array();
  int i = 0;
  for (double power : {1.0, 5.0, 20.0, 80.0, 300.0}) {
    CommandInput sim;
    sim.config = {{"emitters", json::array({{{"beta", 0.99}, {"gamma", 12.6}, {"gamma_dp", 3.4}, {"phi0", -0.26}}})},
                  {"traces", false},
                  {"model_points", 0},
                  {"omega_r", std::sqrt(k * power)},
                  {"spectrum", {{"phase_sigma", 1e-4}, {"intensity_sigma", 1e-4}, {"points", 81}}},
                  {"seed", 100u + static_cast<unsigned>(i)}};
    const auto sub = "p" + std::to_string(i++);
    write_bundle(cmd_simulate(sim).bundle, dir / sub);
    sets.push_back({{"phasors", sub + "/spectrum_0.csv"}, {"power", power}});
  }
  CommandInput in;
  in.base_dir = dir;
  in.config = {{"datasets", sets}};
  const auto res = cmd_fit_saturation(in);
  EXPECT_EQ(res.exit_code, 0);
  const auto j = json::parse(res.bundle.files.at("fit.json"));
  EXPECT_NEAR(j.at("k").get<double>(), k, 0.01);
  EXPECT_NEAR(j.at("n_c").get<double>(), (1.0 + 2.0 * 3.4 / 12.6) / (4.0 * 0.99 * 0.99), 1e-3);
  EXPECT_FALSE(j.at("k_at_bound").get<bool>());
  EXPECT_NE(res.bundle.files.at("phase_vs_power.csv").find("power,omega_r,delta_star,phi_max"), std::string::npos);
}

TEST(FitSaturationCommand, MissingPowerIsReportedWithPath) {
  CommandInput in;
  in.config = json::parse(R"({"datasets": [{"phasors": "a.csv"}]})");
  try {
    cmd_fit_saturation(in);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.path(), "$.datasets[0].power");
  }
}

// ---------------------------------------------------------------------------
// predict-chiral

TEST(PredictChiral, ThresholdsAndCurves) {
  CommandInput in;
  in.format = DataFormat::json;
  const auto res = cmd_predict_chiral(in);
  const auto th = json::parse(res.bundle.files.at("thresholds.json"));
  EXPECT_NEAR(th.at("omega_c").get<double>(), 1.0 / (2.0 * std::sqrt(2.0)), 1e-12);
  EXPECT_NEAR(th.at("gamma_dp_c").get<double>(), 0.5, 1e-12);
  EXPECT_NEAR(th.at("beta_dir_c").get<double>(), 0.5, 1e-12);
  const auto vs_omega = table_json(res.bundle, "resonance_vs_omega.json");
  EXPECT_LT(json_table_at(vs_omega, 1, 0.2), 0.0);
  EXPECT_GT(json_table_at(vs_omega, 1, 0.5), 0.0);
  const auto iso = table_json(res.bundle, "detuning_isotropic.json");
  EXPECT_NEAR(iso.at("rows")[200][6].get<double>(), 0.0, 1e-15);  // centre row: i_t of the isotropic emitter
}

TEST(PredictChiral, RejectsIsotropicEmitter) {
  CommandInput in;
  in.config = json::parse(R"({"emitter": {"coupling": "isotropic"}})");
  EXPECT_THROW(cmd_predict_chiral(in), ConfigError);
}

// ---------------------------------------------------------------------------
// simulate | extract | fit

TEST(Pipeline, SimulateExtractFitRecoversEmitter) {
  const auto dir = scratch_dir();
  CommandInput sim;
  sim.config = json::parse(R"({
    "emitters": [{"beta": 0.94, "gamma": 9.4, "gamma_dp": 3.9, "f0_ghz": 0.2, "phi0": -0.25}]})");
  sim.seed = 2024;
  write_bundle(cmd_simulate(sim).bundle, dir / "sim");

  CommandInput ex;
  ex.positional = {(dir / "sim/trace_on.csv").string(), (dir / "sim/trace_off.csv").string()};
  write_bundle(cmd_extract(ex).bundle, dir / "ext");

  CommandInput fit;
  fit.positional = {(dir / "ext/phasors.csv").string()};
  const auto res = cmd_fit(fit);
  ASSERT_EQ(res.exit_code, 0);
  const auto p = json::parse(res.bundle.files.at("fit.json")).at("fit").at("parameters");
  auto within = [&](const char* name, double truth) {
    const double v = p.at(name).at("value").get<double>(), s = p.at(name).at("sigma").get<double>();
    EXPECT_LT(std::abs(v - truth), 4.0 * s) << name << " = " << v << " +- " << s;
  };
  within("beta1", 0.94);
  within("gamma1", 9.4);
  within("gamma_dp", 3.9);
  within("f0_1", 0.2);
  within("phi0", -0.25);
}
