#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "recovery/errors.hpp"
#include "recovery/scenario.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace recovery;

  CLI::App app{"Stacked data-recovery loop simulator"};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "Run a scenario file and write CSV results");
  std::string scenario_file;
  std::optional<int> seeds;
  std::string out_dir = "results";
  std::string experiment;
  std::vector<std::string> overrides;
  std::optional<int> workers;
  bool dump_only = false;
  run->add_option("scenario", scenario_file, "Scenario file (INI)")->required();
  run->add_option("--seeds", seeds, "Number of seeds per sweep point");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--experiment", experiment,
                  "HARQ_VS_L1ARQ, RESIDUAL_SWEEP, DELAY_SWEEP, DEGRADATION_GRID or SINGLE_RUN");
  run->add_option("--override", overrides, "section.key=value, may repeat");
  run->add_option("--workers", workers, "Worker threads (0 = all cores)");
  run->add_flag("--dump-config", dump_only, "Print the resolved configuration and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  scenario::Scenario s;
  try {
    s = scenario::load_scenario(scenario_file);
    if (!experiment.empty()) s.experiment = scenario::parse_experiment(experiment);
    if (seeds) scenario::apply_setting(s, "scenario.seeds", std::to_string(*seeds));
    if (workers) scenario::apply_setting(s, "scenario.workers", std::to_string(*workers));
    for (const auto& kv : overrides) {
      const auto [key, value] = scenario::split_override(kv);
      scenario::apply_setting(s, key, value);
    }
    s.validate();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  if (dump_only) {
    std::cout << scenario::resolved_config(s);
    return 0;
  }

  try {
    const auto result = scenario::run_scenario(s, out_dir);
    for (const auto& f : result.files) std::cout << "wrote " << f.string() << '\n';
    if (!result.skipped.empty()) std::cout << result.skipped.size() << " sweep point(s) skipped\n";
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
