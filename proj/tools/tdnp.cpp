// tdnp - command-line front end for the triplet-DNP toolkit.
//
//   tdnp simulate  --config exp.cfg --duration 150min --mode closed_form --out run/
//   tdnp fit       curve.csv --model buildup --tr 57.1 --out run/
//   tdnp decompose 132 57.1
//   tdnp calibrate --enhanced 2.77e5 --reference 1 --field-tesla 0.64 --verbose
//   tdnp sweep     --config exp.cfg --param tr --values 57.1,96.9,132
//
// Exit codes: 0 ok, 2 usage, 3 parse/validation, 4 fit not converged, 5 I/O.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tdnp/commands.hpp"
#include "tdnp/io/format.hpp"

namespace {

using tdnp::Minutes;
using tdnp::Seconds;

/// "150", "150min" or "9000s". A bare number is minutes.
Minutes parse_duration(const std::string& text, const std::string& what) {
  std::string_view s = tdnp::io::trim(text);
  double scale = 1.0;
  if (s.size() > 3 && s.substr(s.size() - 3) == "min") {
    s.remove_suffix(3);
  } else if (s.size() > 1 && s.back() == 's') {
    s.remove_suffix(1);
    scale = 1.0 / 60.0;
  }
  const auto v = tdnp::io::parse_double(s);
  if (!v) throw tdnp::UsageError(what + ": cannot parse duration '" + text + "' (use e.g. 150min or 9000s)");
  return Minutes{*v * scale};
}

tdnp::io::ToolkitConfig load_config(const std::string& path, bool verbose) {
  auto cfg = tdnp::io::parse_config(std::filesystem::path(path));
  if (verbose) cfg.print_provenance(std::cerr);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Triplet-DNP buildup simulation and analysis toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool verbose = false;
  app.add_option("--config", config_path, "Configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory (defaults to the config output_dir or .)");
  app.add_option("--seed", seed, "Seed for synthetic noise");
  app.add_flag("-v,--verbose", verbose, "Echo applied defaults and extra diagnostics");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate a 1H polarization buildup curve");
  std::string duration = "150min";
  std::string step = "1min";
  std::string mode = "closed_form";
  bool include_pth = false;
  double noise = 0.0;
  long trace_every = 0;
  sim->add_option("--duration", duration, "Duration, e.g. 150min or 9000s")->capture_default_str();
  sim->add_option("--step", step, "Output sample spacing")->capture_default_str();
  sim->add_option("--mode", mode, "ode | closed_form | shots")->capture_default_str();
  sim->add_flag("--include-pth", include_pth, "Keep the thermal polarization term (ode/shots)");
  sim->add_option("--noise", noise, "Absolute Gaussian noise sigma added to the samples");
  sim->add_option("--trace-every", trace_every, "shots mode: write every Nth shot to shot_trace.csv");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a buildup or decay curve");
  std::string curve_path;
  std::string fit_model = "buildup";
  std::optional<double> fit_tr;
  fit->add_option("curve", curve_path, "Curve CSV (time_min,value or time_s,value)")->required();
  fit->add_option("--model", fit_model, "buildup | decay")->capture_default_str();
  fit->add_option("--tr", fit_tr, "Independently measured T_R in minutes (buildup only)");

  // decompose
  auto* dec = app.add_subcommand("decompose", "Split T_R into lattice and paramagnetic parts");
  double t1 = 0.0, tr = 0.0;
  dec->add_option("t1_minutes", t1, "Spin-lattice relaxation time T_1 (min)")->required();
  dec->add_option("tr_minutes", tr, "Relaxation time under irradiation T_R (min)")->required();

  // calibrate
  auto* calib = app.add_subcommand("calibrate", "Absolute polarization from an NMR signal ratio");
  tdnp::cli::CalibrateOptions cal_opt;
  std::optional<double> cal_field;
  std::optional<double> cal_temperature;
  calib->add_option("--enhanced", cal_opt.enhanced_signal, "Integrated enhanced signal")->required();
  calib->add_option("--reference", cal_opt.reference_signal, "Integrated thermal reference signal")
      ->required();
  calib->add_option("--spin-ratio", cal_opt.spin_count_ratio,
                    "Reference 1H count / sample 1H count")->capture_default_str();
  calib->add_option("--gain-ratio", cal_opt.gain_ratio, "Receiver gain correction")->capture_default_str();
  calib->add_option("--reference-polarization", cal_opt.reference_polarization,
                    "Thermal polarization of the reference (default: from field and temperature)");
  calib->add_option("--field-tesla", cal_field, "Field for the thermal reference polarization");
  calib->add_option("--temperature", cal_temperature, "Temperature in kelvin (default 295)");

  // sweep
  auto* swp = app.add_subcommand("sweep", "Final polarization versus one parameter");
  std::string sweep_param;
  std::string sweep_values;
  swp->add_option("--param", sweep_param, "td | tr | pe | repetition_rate | b1 | sweep_span")->required();
  swp->add_option("--values", sweep_values, "a,b,c or start:stop:count")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : tdnp::cli::exit_code::kUsage;
  }

  try {
    std::optional<tdnp::io::ToolkitConfig> cfg;
    if (!config_path.empty()) cfg = load_config(config_path, verbose);
    const std::filesystem::path out =
        !out_dir.empty() ? std::filesystem::path(out_dir) : cfg ? cfg->output_dir : ".";
    auto need_config = [&](const char* cmd) -> const tdnp::io::ToolkitConfig& {
      if (!cfg) throw tdnp::UsageError(std::string(cmd) + " requires --config");
      return *cfg;
    };

    if (*sim) {
      tdnp::cli::SimulateOptions opt;
      opt.duration = parse_duration(duration, "--duration");
      opt.step = parse_duration(step, "--step");
      opt.mode = tdnp::cli::parse_mode(mode);
      opt.include_pth = include_pth;
      opt.noise_sigma = noise;
      opt.seed = seed;
      opt.trace_every = trace_every;
      opt.out_dir = out;
      return tdnp::cli::cmd_simulate(need_config("simulate"), opt, std::cout).exit_code;
    }
    if (*fit) {
      tdnp::cli::FitOptions opt;
      opt.curve_path = curve_path;
      opt.model = tdnp::cli::parse_fit_model(fit_model);
      if (fit_tr) opt.tr = Minutes{*fit_tr};
      opt.out_dir = out;
      return tdnp::cli::cmd_fit(opt, std::cout).exit_code;
    }
    if (*dec) {
      tdnp::cli::cmd_decompose(Minutes{t1}, Minutes{tr}, out, std::cout);
      return tdnp::cli::exit_code::kOk;
    }
    if (*calib) {
      cal_opt.verbose = verbose;
      cal_opt.out_dir = out;
      if (cfg) {
        cal_opt.field_tesla = cfg->field.magnitude_tesla;
        cal_opt.temperature_kelvin = cfg->temperature_kelvin;
      }
      if (cal_field) cal_opt.field_tesla = *cal_field;
      if (cal_temperature) cal_opt.temperature_kelvin = *cal_temperature;
      tdnp::cli::cmd_calibrate(cal_opt, std::cout);
      return tdnp::cli::exit_code::kOk;
    }
    if (*swp) {
      tdnp::cli::SweepOptions opt;
      opt.parameter = sweep_param;
      opt.values = tdnp::cli::parse_sweep_values(sweep_values);
      opt.out_dir = out;
      tdnp::cli::cmd_sweep(need_config("sweep"), opt, std::cout);
      return tdnp::cli::exit_code::kOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return tdnp::cli::exit_code_for(e);
  }
  return tdnp::cli::exit_code::kUsage;
}
