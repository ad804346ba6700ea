#include <doctest.h>

#include <cmath>

#include "recovery/errors.hpp"
#include "recovery/traffic.hpp"

using namespace recovery;
using sim::SimTime;

TEST_CASE("default offered load is 70 Mbps") {
  traffic::FtpConfig cfg;
  CHECK(cfg.offered_load_bps() == doctest::Approx(70e6));
}

TEST_CASE("inter-arrival gaps average 1/lambda") {
  traffic::FtpConfig cfg;
  sim::RngStream r(12, "traffic/0");
  const int n = 100'000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += traffic::next_arrival(r, cfg).seconds();
  CHECK(std::abs(sum / n - 4.0) < 3.0 * 4.0 / std::sqrt(n));
}

TEST_CASE("gaps shrink toward zero as lambda grows") {
  traffic::FtpConfig cfg;
  cfg.lambda_per_s = 1e7;
  sim::RngStream r(1, "traffic/0");
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) worst = std::max(worst, traffic::next_arrival(r, cfg).seconds());
  CHECK(worst < 1e-5);
}

TEST_CASE("arrival sequence is reproducible") {
  traffic::FtpConfig cfg;
  sim::RngStream a(5, "traffic/0");
  sim::RngStream b(5, "traffic/0");
  for (int i = 0; i < 100; ++i) REQUIRE(traffic::next_arrival(a, cfg) == traffic::next_arrival(b, cfg));
}

TEST_CASE("per-file throughput") {
  traffic::FileTransfer ft;
  ft.bytes = 35'000'000;
  ft.arrival_time = SimTime::from_seconds(10);
  ft.last_byte_delivered = SimTime::from_seconds(14);
  CHECK(traffic::on_file_complete(ft) == doctest::Approx(70e6));
  ft.last_byte_delivered = SimTime::from_seconds(12);
  CHECK(traffic::on_file_complete(ft) == doctest::Approx(140e6));
  ft.last_byte_delivered = ft.arrival_time;
  CHECK_THROWS_AS(traffic::on_file_complete(ft), ModelError);
  ft.last_byte_delivered.reset();
  CHECK_THROWS_AS(traffic::on_file_complete(ft), ModelError);
}

TEST_CASE("files are tracked FIFO along the byte stream") {
  sim::Simulator s;
  traffic::FtpConfig cfg;
  cfg.file_bytes = 1000;
  cfg.lambda_per_s = 10;
  std::uint64_t written = 0;
  traffic::FtpSource src(s, cfg, 3, 0, [&](const traffic::FileTransfer& f) {
    CHECK(f.stream_begin == written);
    written += f.bytes;
  });
  src.start();
  s.run_until(SimTime::from_seconds(2));
  const auto n = src.files().size();
  REQUIRE(n >= 5);
  src.on_first_send(0, 500);
  CHECK(src.files()[0].first_byte_sent.has_value());
  CHECK_FALSE(src.files()[1].first_byte_sent.has_value());
  src.on_delivered(1500);
  CHECK(src.files()[0].last_byte_delivered.has_value());
  CHECK_FALSE(src.files()[1].last_byte_delivered.has_value());
  src.on_delivered(3000);
  CHECK(src.files()[2].last_byte_delivered.has_value());
  CHECK_FALSE(src.files()[3].last_byte_delivered.has_value());
  for (std::size_t i = 1; i < n; ++i) CHECK(src.files()[i].arrival_time >= src.files()[i - 1].arrival_time);
}

TEST_CASE("long-run offered load converges to the configured rate") {
  sim::Simulator s;
  traffic::FtpConfig cfg;
  std::uint64_t bytes = 0;
  traffic::FtpSource src(s, cfg, 8, 0, [&](const traffic::FileTransfer& f) { bytes += f.bytes; });
  src.start();
  const double horizon = 40'000.0;
  s.run_until(SimTime::from_seconds(horizon));
  // Poisson count over the horizon has sd sqrt(lambda T).
  const double files = static_cast<double>(src.files().size());
  CHECK(std::abs(files - 0.25 * horizon) < 3.0 * std::sqrt(0.25 * horizon));
  CHECK(std::abs(bytes * 8.0 / horizon / 70e6 - 1.0) < 0.05);
}
