#include <doctest.h>

#include <cmath>
#include <vector>

#include "recovery/errors.hpp"
#include "recovery/metrics.hpp"

using namespace recovery;

namespace {

metrics::RunMetrics run(double user_bps, std::vector<double> pkt, std::uint64_t delivered_tbs, std::uint64_t lost,
                        std::string fp = "cfg") {
  metrics::RunMetrics m;
  m.config_fingerprint = std::move(fp);
  m.user_throughput_bps = {user_bps};
  m.per_packet_throughput_bps = std::move(pkt);
  m.harq_log.delivered = delivered_tbs;
  m.harq_log.nack_to_ack = lost;
  m.mac_residual_rate = static_cast<double>(lost) / static_cast<double>(delivered_tbs + lost);
  return m;
}

}  // namespace

TEST_CASE("user throughput over the post-warm-up window") {
  CHECK(metrics::user_throughput(70'000'000, 56.0) == doctest::Approx(10e6));
  CHECK(metrics::user_throughput(0, 56.0) == 0.0);
  CHECK_THROWS_AS(metrics::user_throughput(10, 0.0), ModelError);
}

TEST_CASE("empirical CDF and interpolated percentiles") {
  CHECK(metrics::percentile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
  CHECK(metrics::percentile({4, 1, 3, 2}, 0.0) == 1.0);
  CHECK(metrics::percentile({4, 1, 3, 2}, 1.0) == 4.0);
  CHECK_THROWS_AS(metrics::empirical_cdf({}), ModelError);
  CHECK_THROWS_AS(metrics::percentile({}, 0.5), ModelError);

  const auto c = metrics::empirical_cdf({3, 1, 2});
  REQUIRE(c.size() == 3);
  CHECK(c[0].value == 1);
  CHECK(c[2].percentile == doctest::Approx(1.0));

  const auto flat = metrics::empirical_cdf({5, 5, 5, 5});
  REQUIRE(flat.size() == 1);
  CHECK(flat[0].value == 5);
  CHECK(flat[0].percentile == 1.0);
  CHECK(metrics::percentile({5, 5, 5, 5}, 0.3) == 5);
}

TEST_CASE("fifth percentile of uniform samples") {
  sim::RngStream r(2, "cdf");
  std::vector<double> s;
  for (int i = 0; i < 10'000; ++i) s.push_back(r.uniform());
  CHECK(std::abs(metrics::percentile(s, 0.05) - 0.05) < 0.01);
}

TEST_CASE("aggregation across seeds") {
  SUBCASE("identical runs have zero variance") {
    const std::vector<metrics::RunMetrics> runs(4, run(5e6, {1e7}, 1000, 1));
    const auto a = metrics::aggregate_seeds(runs);
    CHECK(a.user_throughput_bps.mean == doctest::Approx(5e6));
    CHECK(a.user_throughput_bps.std_error == 0.0);
    CHECK(a.runs == 4);
  }
  SUBCASE("two seeds average their per-seed values") {
    const auto a = metrics::aggregate_seeds({run(4e6, {}, 10, 0), run(6e6, {}, 10, 0)});
    CHECK(a.user_throughput_bps.mean == doctest::Approx(5e6));
  }
  SUBCASE("standard error is stddev over sqrt(n)") {
    std::vector<metrics::RunMetrics> runs;
    std::vector<double> v;
    for (int i = 0; i < 10; ++i) {
      v.push_back(1e6 * (i * i % 7 + 1));
      runs.push_back(run(v.back(), {}, 10, 0));
    }
    double mean = 0.0;
    for (double x : v) mean += x / 10;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double se = std::sqrt(ss / 9.0) / std::sqrt(10.0);
    const auto a = metrics::aggregate_seeds(runs);
    CHECK(a.user_throughput_bps.mean == doctest::Approx(mean));
    CHECK(a.user_throughput_bps.std_error == doctest::Approx(se));
  }
  SUBCASE("residual rate is pooled by transport block counts") {
    const auto a = metrics::aggregate_seeds({run(1, {}, 999, 1), run(1, {}, 8, 2)});
    // Concatenated logs: 3 losses out of 1010 TBs, not the mean of 1e-3 and 0.2.
    CHECK(a.pooled_residual_rate == doctest::Approx(3.0 / 1010.0));
    CHECK(a.tbs == 1010);
  }
  SUBCASE("per-packet samples are pooled over all files") {
    const auto a = metrics::aggregate_seeds({run(1, {10, 20, 30}, 1, 0), run(1, {60}, 1, 0)});
    CHECK(a.per_packet_throughput_bps.mean == doctest::Approx(30.0));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(metrics::aggregate_seeds({run(1, {}, 1, 0)}), ModelError);
    CHECK_THROWS_AS(metrics::aggregate_seeds({run(1, {}, 1, 0, "a"), run(1, {}, 1, 0, "b")}), ModelError);
  }
}
