// Batch runner: seeded runs with and without the stress-testing plugin, or
// a single maneuver trace for plotting.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "stresslane/runner.hpp"

namespace
{

void configure_logging()
{
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("STRESSLANE_LOG")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

}  // namespace

int main(int argc, char** argv)
{
  configure_logging();

  CLI::App app{"Stress-testing runner for multilane highway traffic"};
  stresslane::RunSpec spec;
  std::string config;
  std::vector<std::uint64_t> seeds;
  double km = 0.0;
  double dt = 0.0;
  std::string stm = "both";
  std::string out = "out";
  std::string trace;
  std::optional<double> trace_v0;
  std::optional<double> trace_vfinal;

  app.add_option("--config", config, "TOML configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seeds, "Seed list, comma separated")->delimiter(',');
  auto* km_opt = app.add_option("--km", km, "Ego distance per run [km]");
  auto* dt_opt = app.add_option("--dt", dt, "Simulation step [s]");
  app.add_option("--stm", stm, "Plugin mode")->check(CLI::IsMember({"on", "off", "both"}));
  app.add_option("--out", out, "Output directory");
  app.add_option("--trace", trace, "Write a maneuver trace instead of running")
      ->check(CLI::IsMember({"driver_brake", "acc_brake", "lane_change"}));
  app.add_option("--trace-v0", trace_v0, "Initial speed of the trace [km/h]");
  app.add_option("--trace-vfinal", trace_vfinal, "Final speed of braking traces [km/h]");
  app.add_option("--threads", spec.threads, "Worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  spec.config_path = config;
  spec.out_dir = out;
  if (!seeds.empty()) {
    spec.seeds = seeds;
  }
  if (*km_opt) {
    spec.km = km;
  }
  if (*dt_opt) {
    spec.dt = dt;
  }
  spec.stm = stm == "on" ? stresslane::StmMode::on : stm == "off" ? stresslane::StmMode::off : stresslane::StmMode::both;

  if (!trace.empty()) {
    try {
      const stresslane::Config base = config.empty() ? stresslane::Config{} : stresslane::load_config(config);
      const stresslane::Config cfg = stresslane::resolve_config(base, spec);
      auto request = stresslane::default_trace(*stresslane::parse_trace_kind(trace));
      request.v0_kmh = trace_v0.value_or(request.v0_kmh);
      request.v_final_kmh = trace_vfinal.value_or(request.v_final_kmh);
      for (const auto& path : stresslane::emit_trace(request, cfg, spec.out_dir)) {
        std::cout << path.string() << '\n';
      }
    } catch (const stresslane::ConfigError& e) {
      std::cerr << e.what() << '\n';
      return 1;
    } catch (const std::invalid_argument& e) {
      std::cerr << e.what() << '\n';
      return 1;
    } catch (const std::exception& e) {
      std::cerr << e.what() << '\n';
      return 2;
    }
    return 0;
  }

  return stresslane::run(spec);
}
