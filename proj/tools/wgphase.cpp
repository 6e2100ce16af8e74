// wgphase: simulate, extract and fit emitter phase-shift measurements.
//
//   wgphase <command> [--config FILE] [--out DIR] [--seed N] [--format csv|json] [inputs...]
//
// Exit codes: 0 success, 2 bad input, 3 fit did not converge, 4 internal error.
// WGPHASE_OUT_DIR overrides the default output directory, WGPHASE_LOG_LEVEL
// sets the stderr log level (trace, debug, info, warn, error, off).

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "wgphase/io/commands.hpp"

namespace {

using namespace wgphase;
using namespace wgphase::io;

using Driver = CommandResult (*)(const CommandInput&);

const std::map<std::string, Driver>& drivers() {
  static const std::map<std::string, Driver> m{
      {"simulate", cmd_simulate},       {"extract", cmd_extract},
      {"pathlength", cmd_pathlength},   {"fit", cmd_fit},
      {"fit-saturation", cmd_fit_saturation}, {"predict-chiral", cmd_predict_chiral}};
  return m;
}

json load_config(const std::filesystem::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("wgphase");
  logger->set_pattern("%^%l%$: %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv("WGPHASE_LOG_LEVEL")) {
    const auto level = spdlog::level::from_str(lvl);
    if (level == spdlog::level::off && std::string(lvl) != "off")
      spdlog::warn("unknown WGPHASE_LOG_LEVEL \"{}\", keeping info", lvl);
    else
      spdlog::set_level(level);
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Waveguide emitter phase-shift toolkit"};
  app.require_subcommand(1);
  std::string config_file, out_dir, format = "csv";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> inputs;
  for (const auto& [name, driver] : drivers()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_file, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output bundle directory");
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--format", format, "data product format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("inputs", inputs, "input files");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    CommandInput in;
    in.format = format == "json" ? DataFormat::json : DataFormat::csv;
    in.seed = seed;
    in.positional = inputs;
    if (!config_file.empty()) {
      in.config = load_config(config_file);
      in.base_dir = std::filesystem::path(config_file).parent_path();
    }
    if (out_dir.empty()) {
      const char* env = std::getenv("WGPHASE_OUT_DIR");
      out_dir = env != nullptr && *env != '\0' ? env : "wgphase-" + command;
    }

    const CommandResult res = drivers().at(command)(in);
    for (const auto& m : res.messages) spdlog::warn("{}", m);
    write_bundle(res.bundle, out_dir);
    spdlog::info("{}: wrote {} files to {}", command, res.bundle.files.size() + 1, out_dir);
    if (res.exit_code == 3) spdlog::error("{}: fit did not converge; see fit.json", command);
    return res.exit_code;
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const UnstableGainError& e) {
    spdlog::error("{} (check phi_env.lock against integration_time_s)", e.what());
    return 2;
  } catch (const ConvergenceError& e) {
    spdlog::error("{}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::critical("internal error: {}", e.what());
    return 4;
  }
}
