// JSON mapping of the library types, with a strict reader that rejects
// unknown keys and reports the offending key by its path.
#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "wgphase/emitter.hpp"
#include "wgphase/error.hpp"
#include "wgphase/interferometer.hpp"
#include "wgphase/lm.hpp"

namespace wgphase::io {

using nlohmann::json;

/// Schema violation in a configuration or sidecar document.
class ConfigError : public InputError {
 public:
  ConfigError(const std::string& path, const std::string& what) : InputError(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Read-once view of a JSON object. Every accessor marks its key as known;
/// finish() throws on any key nobody asked for.
class StrictObject {
 public:
  StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string path_of(const std::string& key) const { return path_ + "." + key; }

  bool has(const std::string& key) {
    known_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json* child(const std::string& key) {
    if (!has(key)) return nullptr;
    return &j_.at(key);
  }

  std::optional<double> number_opt(const std::string& key) {
    const json* v = child(key);
    if (v == nullptr) return std::nullopt;
    if (!v->is_number()) throw ConfigError(path_of(key), "expected a number");
    return v->get<double>();
  }
  double number(const std::string& key, double fallback) { return number_opt(key).value_or(fallback); }
  double required_number(const std::string& key) {
    const auto v = number_opt(key);
    if (!v) throw ConfigError(path_of(key), "required number is missing");
    return *v;
  }

  std::optional<std::uint64_t> unsigned_opt(const std::string& key) {
    const json* v = child(key);
    if (v == nullptr) return std::nullopt;
    if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<std::int64_t>() < 0))
      throw ConfigError(path_of(key), "expected a non-negative integer");
    return v->get<std::uint64_t>();
  }
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    return unsigned_opt(key).value_or(fallback);
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = child(key);
    if (v == nullptr) return fallback;
    if (!v->is_boolean()) throw ConfigError(path_of(key), "expected true or false");
    return v->get<bool>();
  }

  std::optional<std::string> string_opt(const std::string& key) {
    const json* v = child(key);
    if (v == nullptr) return std::nullopt;
    if (!v->is_string()) throw ConfigError(path_of(key), "expected a string");
    return v->get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    return string_opt(key).value_or(fallback);
  }

  std::vector<double> numbers(const std::string& key) {
    const json* v = child(key);
    if (v == nullptr) return {};
    if (!v->is_array()) throw ConfigError(path_of(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number()) throw ConfigError(path_of(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back((*v)[i].get<double>());
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!known_.contains(key)) throw ConfigError(path_of(key), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> known_;
};

/// Run `fn` and re-throw library validation errors with the JSON path.
template <class Fn>
auto at_path(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const InputError& e) {
    throw ConfigError(path, e.what());
  }
}

// ---------------------------------------------------------------------------
// Emitters

inline json to_json(const EmitterParams& p) {
  return {{"coupling", to_string(p.coupling)}, {"beta", p.beta},   {"gamma", p.gamma},
          {"gamma_dp", p.gamma_dp},            {"f0_ghz", p.f0},   {"phi0", p.phi0}};
}

inline EmitterParams emitter_from_json(const json& j, const std::string& path) {
  StrictObject o(j, path);
  EmitterParams p;
  const std::string coupling = o.string("coupling", "isotropic");
  if (coupling == "isotropic") p.coupling = Coupling::isotropic;
  else if (coupling == "chiral") p.coupling = Coupling::chiral;
  else throw ConfigError(o.path_of("coupling"), "expected \"isotropic\" or \"chiral\"");
  p.beta = o.number("beta", p.beta);
  p.gamma = o.number("gamma", p.gamma);
  p.gamma_dp = o.number("gamma_dp", p.gamma_dp);
  p.f0 = o.number("f0_ghz", p.f0);
  p.phi0 = o.number("phi0", p.phi0);
  o.finish();
  at_path(path, [&] {
    p.validate();
    return 0;
  });
  return p;
}

inline std::vector<EmitterParams> emitters_from_json(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of emitters");
  std::vector<EmitterParams> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(emitter_from_json(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

// ---------------------------------------------------------------------------
// Interferometer

inline json to_json(const PidGains& g) { return {{"kp", g.kp}, {"ki", g.ki}, {"kd", g.kd}}; }

inline PidGains pid_from_json(const json& j, const std::string& path) {
  StrictObject o(j, path);
  PidGains g;
  g.kp = o.number("kp", g.kp);
  g.ki = o.number("ki", g.ki);
  g.kd = o.number("kd", g.kd);
  o.finish();
  return g;
}

inline json to_json(const EnvPhaseModel& m) {
  if (const auto* c = std::get_if<ConstantPhase>(&m)) return {{"model", "constant"}, {"value", c->value}};
  if (const auto* s = std::get_if<SinusoidPhase>(&m))
    return {{"model", "sinusoid"}, {"amplitude", s->amplitude}, {"frequency_hz", s->frequency_hz}};
  const auto& w = std::get<RandomWalkPhase>(m);
  return {{"model", "random_walk"},
          {"sigma", w.sigma},
          {"seed", w.seed},
          {"lock", w.lock ? to_json(*w.lock) : json(nullptr)}};
}

inline EnvPhaseModel env_from_json(const json& j, const std::string& path) {
  StrictObject o(j, path);
  const std::string model = o.string("model", "random_walk");
  EnvPhaseModel out;
  if (model == "constant") {
    out = ConstantPhase{o.number("value", 0.0)};
  } else if (model == "sinusoid") {
    SinusoidPhase s;
    s.amplitude = o.number("amplitude", 0.0);
    s.frequency_hz = o.number("frequency_hz", 0.0);
    out = s;
  } else if (model == "random_walk") {
    RandomWalkPhase w;
    w.sigma = o.number("sigma", w.sigma);
    w.seed = o.unsigned_integer("seed", w.seed);
    // An explicit null switches the lock off; a missing key keeps the default.
    const bool lock_given = j.contains("lock");
    if (const json* lock = o.child("lock")) w.lock = pid_from_json(*lock, o.path_of("lock"));
    else if (lock_given) w.lock.reset();
    out = w;
  } else {
    throw ConfigError(o.path_of("model"), "expected \"constant\", \"random_walk\" or \"sinusoid\"");
  }
  o.finish();
  return out;
}

inline json to_json(const InterferometerConfig& c) {
  return {{"delta_l_m", c.delta_l},
          {"visibility", c.visibility},
          {"p_lo", c.p_lo},
          {"p_sig", c.p_sig},
          {"integration_time_s", c.integration_time},
          {"dark_count_rate", c.dark_count_rate},
          {"phi_env", to_json(c.phi_env)}};
}

inline InterferometerConfig interferometer_from_json(const json& j, const std::string& path) {
  StrictObject o(j, path);
  InterferometerConfig c;
  c.delta_l = o.number("delta_l_m", c.delta_l);
  c.visibility = o.number("visibility", c.visibility);
  c.p_lo = o.number("p_lo", c.p_lo);
  c.p_sig = o.number("p_sig", c.p_sig);
  c.integration_time = o.number("integration_time_s", c.integration_time);
  c.dark_count_rate = o.number("dark_count_rate", c.dark_count_rate);
  if (const json* env = o.child("phi_env")) c.phi_env = env_from_json(*env, o.path_of("phi_env"));
  o.finish();
  at_path(path, [&] {
    c.validate();
    return 0;
  });
  return c;
}

// ---------------------------------------------------------------------------
// Trace metadata sidecar

inline constexpr const char* kTraceMetaSchema = "wgphase-trace-meta/1";

inline json to_json(const FringeMeta& m) {
  json emitters = json::array();
  for (const auto& e : m.emitters) emitters.push_back(to_json(e));
  return {{"schema", kTraceMetaSchema},
          {"interferometer", to_json(m.config)},
          {"emitters", emitters},
          {"qd_on", m.qd_on},
          {"omega_r", m.omega_r},
          {"noise_seed", m.noise_seed ? json(*m.noise_seed) : json(nullptr)}};
}

inline FringeMeta meta_from_json(const json& j, const std::string& path) {
  StrictObject o(j, path);
  const auto schema = o.string_opt("schema");
  if (!schema || *schema != kTraceMetaSchema)
    throw ConfigError(o.path_of("schema"), std::string("expected \"") + kTraceMetaSchema + "\"");
  FringeMeta m;
  if (const json* c = o.child("interferometer")) m.config = interferometer_from_json(*c, o.path_of("interferometer"));
  if (const json* e = o.child("emitters")) m.emitters = emitters_from_json(*e, o.path_of("emitters"));
  m.qd_on = o.boolean("qd_on", false);
  m.omega_r = o.number("omega_r", 0.0);
  m.noise_seed = o.unsigned_opt("noise_seed");
  o.finish();
  return m;
}

// ---------------------------------------------------------------------------
// Fit summaries

inline json to_json(const FitResult& f) {
  json params = json::object();
  for (std::size_t i = 0; i < f.names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    params[f.names[i]] = {{"value", f.params[k]},
                          {"sigma", std::sqrt(std::max(f.covariance(k, k), 0.0))},
                          {"at_bound", static_cast<bool>(f.at_bound[i])}};
  }
  json cov = json::array();
  for (Eigen::Index r = 0; r < f.covariance.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < f.covariance.cols(); ++c) row.push_back(f.covariance(r, c));
    cov.push_back(row);
  }
  return {{"parameter_order", f.names}, {"parameters", params},
          {"covariance", cov},          {"chi2", f.chi2},
          {"reduced_chi2", f.reduced_chi2()}, {"n_residuals", f.n_residuals},
          {"dof", f.dof()},             {"n_iter", f.n_iter},
          {"converged", f.converged},   {"conditioning", f.conditioning},
          {"warnings", f.warnings},     {"diagnostic", f.diagnostic}};
}

}  // namespace wgphase::io
