#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "recovery/analytics.hpp"
#include "recovery/metrics.hpp"
#include "recovery/stack.hpp"

namespace recovery::scenario {

enum class Experiment { kHarqVsL1Arq, kResidualSweep, kDelaySweep, kDegradationGrid, kSingleRun };

std::string to_string(Experiment e);
/// Throws ConfigError for unknown names.
Experiment parse_experiment(const std::string& name);

struct SweepConfig {
  std::vector<double> residual_targets{2e-6, 1e-5, 5e-5, 8e-5, 1e-3};
  /// DTX->ACK probability held fixed while P_na is solved for each target.
  double residual_p_da = 1e-4;
  std::vector<tcp::Variant> tcp_variants{tcp::Variant::kReno, tcp::Variant::kCubic};
  std::vector<rlc::RlcMode> rlc_modes{rlc::RlcMode::kAm, rlc::RlcMode::kUm};
  std::vector<double> delays_ms{0, 10, 20, 30, 40, 50};
  std::vector<double> delay_residuals{2e-6, 8e-5};
  std::vector<double> harq_p_e{0.1, 0.5};
  double grid_min = 1e-5;
  double grid_max = 1e-1;
  int grid_size = 7;
  double grid_level_pct = 5.0;
};

struct Scenario {
  Experiment experiment = Experiment::kSingleRun;
  int seeds = 10;
  std::uint64_t seed_base = 1;
  int workers = 0;  ///< 0: one per hardware thread
  stack::StackConfig base;
  SweepConfig sweep;
  analytics::GiveUpExponent give_up_exponent = analytics::GiveUpExponent::kRetransmissions;

  void validate() const;
};

/// Default scenario with every value filled in.
Scenario default_scenario();

/// Applies `section.key = value` pairs. Throws ConfigError for unknown keys or bad values.
void apply_setting(Scenario& s, const std::string& key, const std::string& value);

/// Reads an INI file with one section per layer on top of the defaults.
Scenario load_scenario(const std::filesystem::path& file);

/// Parses "key=value".
std::pair<std::string, std::string> split_override(const std::string& kv);

/// Every setting in INI form, fixed key order.
std::string resolved_config(const Scenario& s);

/// One configuration evaluated over all seeds.
struct Point {
  std::string series;
  std::string sweep_param;
  double value = 0.0;
  stack::StackConfig config;
};

struct Skipped {
  std::string series;
  double target = 0.0;
  std::string reason;
};

struct Plan {
  std::vector<Point> points;
  std::vector<Skipped> skipped;
};

Plan plan(const Scenario& s);

struct PointResult {
  Point point;
  std::vector<metrics::RunMetrics> runs;  ///< one per seed, in seed order
  metrics::AggregateMetrics agg;
  analytics::ResidualBreakdown analytic;
  double analytic_approx = 0.0;
};

/// Runs every (point, seed) pair on a worker pool; results are in plan order.
std::vector<PointResult> run_points(const std::vector<Point>& points, int seeds, std::uint64_t seed_base, int workers,
                                    analytics::GiveUpExponent exponent = analytics::GiveUpExponent::kRetransmissions);

/// Summary over one or more runs of the same configuration.
metrics::AggregateMetrics summarize(const std::vector<metrics::RunMetrics>& runs);

struct ScenarioResult {
  std::vector<PointResult> points;
  std::vector<Skipped> skipped;
  std::optional<analytics::DegradationGrid> grid;
  std::vector<std::filesystem::path> files;
};

/// Plans, runs and, when `out_dir` is non-empty, writes the CSVs and resolved config.
ScenarioResult run_scenario(const Scenario& s, const std::filesystem::path& out_dir);

std::string raw_csv(const std::string& experiment, const std::vector<PointResult>& points);
std::string agg_csv(const std::string& experiment, const std::vector<PointResult>& points);

}  // namespace recovery::scenario
