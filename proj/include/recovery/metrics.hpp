#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "recovery/harq.hpp"

namespace recovery::metrics {

struct CwndSummary {
  double mean_mss = 0.0;
  double max_mss = 0.0;
  std::uint64_t fast_retransmits = 0;
  std::uint64_t timeouts = 0;
  std::uint64_t loss_epochs = 0;
};

/// Per-run KPIs. Throughputs cover the post-warm-up window only.
struct RunMetrics {
  std::string config_fingerprint;
  std::uint64_t seed = 0;
  std::vector<double> user_throughput_bps;        ///< one entry per user
  std::vector<double> per_packet_throughput_bps;  ///< one entry per completed file
  harq::OutcomeLog harq_log;
  double mac_residual_rate = 0.0;
  std::uint64_t sdus_delivered = 0;
  std::uint64_t sdus_lost = 0;
  double rlc_sdu_loss_rate = 0.0;
  std::uint64_t files_completed = 0;
  std::uint64_t files_incomplete = 0;
  CwndSummary cwnd;

  double mean_user_throughput_bps() const;
  double mean_per_packet_throughput_bps() const;  ///< 0 when no file completed
};

/// delivered_bytes * 8 / window_seconds. Throws ModelError for a non-positive window.
double user_throughput(std::uint64_t delivered_bytes, double window_seconds);

struct CdfPoint {
  double value = 0.0;
  double percentile = 0.0;  ///< in [0, 1]
};

/// Step CDF: sorted samples with percentile i/n. Throws ModelError when empty.
std::vector<CdfPoint> empirical_cdf(std::vector<double> samples);

/// Linearly interpolated quantile (q in [0,1]) between order statistics.
double percentile(std::vector<double> samples, double q);

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

/// Mean and standard error stddev/sqrt(n) with the n-1 sample deviation.
Estimate mean_and_se(std::span<const double> values);

struct AggregateMetrics {
  std::size_t runs = 0;
  Estimate user_throughput_bps;   ///< over per-seed means
  Estimate per_packet_throughput_bps;  ///< pooled mean over all files; SE from per-seed means
  double pooled_residual_rate = 0.0;  ///< losses / TBs over all runs
  Estimate residual_rate;
  double pooled_sdu_loss_rate = 0.0;
  std::uint64_t sdus_lost = 0;
  std::uint64_t tbs = 0;
  std::uint64_t files_completed = 0;
};

/// Requires >= 2 runs sharing one configuration fingerprint.
AggregateMetrics aggregate_seeds(const std::vector<RunMetrics>& runs);

}  // namespace recovery::metrics
