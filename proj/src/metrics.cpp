#include "recovery/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "recovery/errors.hpp"

namespace recovery::metrics {

namespace {

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double RunMetrics::mean_user_throughput_bps() const { return mean_of(user_throughput_bps); }

double RunMetrics::mean_per_packet_throughput_bps() const { return mean_of(per_packet_throughput_bps); }

double user_throughput(std::uint64_t delivered_bytes, double window_seconds) {
  if (!(window_seconds > 0.0)) throw ModelError("throughput window must be positive");
  return static_cast<double>(delivered_bytes) * 8.0 / window_seconds;
}

std::vector<CdfPoint> empirical_cdf(std::vector<double> samples) {
  if (samples.empty()) throw ModelError("empirical CDF of an empty sample");
  std::sort(samples.begin(), samples.end());
  std::vector<CdfPoint> out;
  out.reserve(samples.size());
  const auto n = static_cast<double>(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    // Ties collapse onto the last occurrence so the CDF is a proper step function.
    if (i + 1 < samples.size() && samples[i + 1] == samples[i]) continue;
    out.push_back({samples[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

double percentile(std::vector<double> samples, double q) {
  if (samples.empty()) throw ModelError("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ModelError("percentile level must lie in [0,1]");
  std::sort(samples.begin(), samples.end());
  const double pos = q * static_cast<double>(samples.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, samples.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return samples[lo] + frac * (samples[hi] - samples[lo]);
}

Estimate mean_and_se(std::span<const double> values) {
  Estimate e;
  e.n = values.size();
  if (values.empty()) return e;
  e.mean = mean_of(values);
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - e.mean) * (v - e.mean);
    const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    e.std_error = sd / std::sqrt(static_cast<double>(values.size()));
  }
  return e;
}

AggregateMetrics aggregate_seeds(const std::vector<RunMetrics>& runs) {
  if (runs.size() < 2) throw ModelError("aggregation needs at least two runs");
  for (const auto& r : runs) {
    if (r.config_fingerprint != runs.front().config_fingerprint) {
      throw ModelError("cannot aggregate runs with different configurations");
    }
  }
  AggregateMetrics agg;
  agg.runs = runs.size();
  std::vector<double> user;
  std::vector<double> pkt_means;
  std::vector<double> residual;
  double pkt_sum = 0.0;
  std::size_t pkt_n = 0;
  harq::OutcomeLog pooled;
  std::uint64_t delivered = 0;
  for (const auto& r : runs) {
    user.push_back(r.mean_user_throughput_bps());
    if (!r.per_packet_throughput_bps.empty()) pkt_means.push_back(r.mean_per_packet_throughput_bps());
    for (double v : r.per_packet_throughput_bps) pkt_sum += v;
    pkt_n += r.per_packet_throughput_bps.size();
    residual.push_back(r.mac_residual_rate);
    pooled += r.harq_log;
    agg.sdus_lost += r.sdus_lost;
    delivered += r.sdus_delivered;
    agg.files_completed += r.files_completed;
  }
  agg.user_throughput_bps = mean_and_se(user);
  agg.per_packet_throughput_bps = mean_and_se(pkt_means);
  agg.per_packet_throughput_bps.mean = pkt_n > 0 ? pkt_sum / static_cast<double>(pkt_n) : 0.0;
  agg.residual_rate = mean_and_se(residual);
  agg.tbs = pooled.concluded();
  agg.pooled_residual_rate = pooled.concluded() > 0 ? harq::measured_residual_rate(pooled) : 0.0;
  const std::uint64_t sdus = delivered + agg.sdus_lost;
  agg.pooled_sdu_loss_rate = sdus > 0 ? static_cast<double>(agg.sdus_lost) / static_cast<double>(sdus) : 0.0;
  return agg;
}

}  // namespace recovery::metrics
