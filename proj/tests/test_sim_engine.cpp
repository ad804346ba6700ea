#include <doctest.h>

#include <cmath>
#include <vector>

#include "recovery/errors.hpp"
#include "recovery/sim_engine.hpp"

using namespace recovery;
using sim::EventKind;
using sim::SimTime;

TEST_CASE("event at now runs before an event one tick later") {
  sim::Simulator s;
  std::vector<int> order;
  s.schedule(SimTime::from_us(1), EventKind::kOther, [&] { order.push_back(1); });
  s.schedule(SimTime::from_us(0), EventKind::kOther, [&] { order.push_back(0); });
  s.run_until(SimTime::from_us(10));
  CHECK(order == std::vector<int>{0, 1});
}

TEST_CASE("ties execute in insertion order") {
  sim::Simulator s;
  std::vector<std::uint64_t> seen;
  const auto a = s.schedule(SimTime::from_ms(5), EventKind::kOther, [&] { seen.push_back(0); });
  const auto b = s.schedule(SimTime::from_ms(5), EventKind::kOther, [&] { seen.push_back(1); });
  CHECK(a + 1 == b);
  s.run_until(SimTime::from_ms(5));
  CHECK(seen == std::vector<std::uint64_t>{0, 1});
}

TEST_CASE("scheduling in the past is rejected") {
  sim::Simulator s;
  s.run_until(SimTime::from_ms(1));
  CHECK_THROWS_AS(s.schedule(SimTime::from_us(999), EventKind::kOther, [] {}), ConfigError);
}

TEST_CASE("run_until on an empty queue only moves the clock") {
  sim::Simulator s;
  s.run_until(SimTime::from_seconds(60));
  CHECK(s.now() == SimTime::from_seconds(60));
  CHECK(s.executed() == 0);
}

TEST_CASE("a single event fires exactly once") {
  sim::Simulator s;
  int hits = 0;
  s.schedule(SimTime::from_seconds(30), EventKind::kOther, [&] { ++hits; });
  s.run_until(SimTime::from_seconds(60));
  s.run_until(SimTime::from_seconds(90));
  CHECK(hits == 1);
}

TEST_CASE("horizon is inclusive and nothing past it executes") {
  sim::Simulator s;
  int early = 0;
  int late = 0;
  s.schedule(SimTime::from_us(59'999'000), EventKind::kOther, [&] { ++early; });
  s.schedule(SimTime::from_us(60'001'000), EventKind::kOther, [&] { ++late; });
  s.run_until(SimTime::from_seconds(60));
  CHECK(early == 1);
  CHECK(late == 0);
  CHECK(s.pending() == 1);
}

TEST_CASE("execution trace is strictly increasing in (fire_at, seq)") {
  sim::Simulator s;
  sim::RngStream rng(7, "order");
  std::vector<std::pair<std::int64_t, std::uint64_t>> trace;
  s.set_trace_hook([&](const sim::Event& e) { trace.emplace_back(e.fire_at.us(), e.seq); });
  // Events that schedule more events, some at the current instant.
  std::function<void(int)> spawn = [&](int depth) {
    if (depth == 0) return;
    for (int i = 0; i < 3; ++i) {
      const auto delay = SimTime::from_us(static_cast<std::int64_t>(rng.uniform() * 3));
      s.schedule_in(delay, EventKind::kOther, [&, depth] { spawn(depth - 1); });
    }
  };
  s.schedule(SimTime{}, EventKind::kOther, [&] { spawn(6); });
  s.run_until(SimTime::from_ms(100));
  REQUIRE(trace.size() > 100);
  for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i - 1] < trace[i]);
}

TEST_CASE("timer restart cancels the earlier expiry") {
  sim::Simulator s;
  int fired = 0;
  sim::Timer t(s, [&] { ++fired; });
  t.start(SimTime::from_ms(10));
  s.run_until(SimTime::from_ms(5));
  t.start(SimTime::from_ms(10));
  s.run_until(SimTime::from_ms(12));
  CHECK(fired == 0);
  s.run_until(SimTime::from_ms(15));
  CHECK(fired == 1);
  CHECK_FALSE(t.running());
  t.start(SimTime::from_ms(1));
  t.stop();
  s.run_until(SimTime::from_ms(20));
  CHECK(fired == 1);
}

TEST_CASE("same seed and label replay the same draws") {
  sim::RngStream a(42, "phy");
  sim::RngStream b(42, "phy");
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("different labels or seeds give different sequences") {
  sim::RngStream a(42, "phy");
  sim::RngStream b(42, "feedback");
  sim::RngStream c(43, "phy");
  int same_ab = 0;
  int same_ac = 0;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    same_ab += x == b.next_u64();
    same_ac += x == c.next_u64();
  }
  CHECK(same_ab == 0);
  CHECK(same_ac == 0);
}

TEST_CASE("uniform draws have mean 1/2 within three sigma") {
  sim::RngStream r(1, "uniform");
  const int n = 1'000'000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  const double sigma = 1.0 / std::sqrt(12.0 * n);
  CHECK(std::abs(sum / n - 0.5) < 3 * sigma);
  CHECK(3 * sigma < 0.002);
}

TEST_CASE("exponential draws have the configured mean") {
  sim::RngStream r(3, "exp");
  const int n = 200'000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += r.exponential(2.0);
  CHECK(std::abs(sum / n - 0.5) < 3 * 0.5 / std::sqrt(n));
}

TEST_CASE("time conversions round to the microsecond") {
  CHECK(SimTime::from_ms(0.5).us() == 500);
  CHECK(SimTime::from_seconds(1.25).us() == 1'250'000);
  CHECK(SimTime::from_us(1500).ms() == doctest::Approx(1.5));
  CHECK((SimTime::from_us(500) * 4).us() == 2000);
}
