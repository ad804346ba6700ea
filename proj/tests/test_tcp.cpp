#include <doctest.h>

#include <cmath>
#include <vector>

#include "recovery/errors.hpp"
#include "recovery/tcp.hpp"

using namespace recovery;
using sim::SimTime;
using tcp::Phase;

namespace {

constexpr std::uint32_t kMss = 1500;

struct Harness {
  sim::Simulator sim;
  std::vector<tcp::Segment> sent;
  tcp::TcpSender sender;

  explicit Harness(tcp::TcpConfig cfg) : sender(sim, cfg, [this](const tcp::Segment& s) { sent.push_back(s); }) {}

  void ack(std::uint64_t segments) { sender.on_ack({segments * kMss}); }
};

tcp::TcpConfig reno(double cwnd = 3, double ssthresh = 500) {
  tcp::TcpConfig c;
  c.variant = tcp::Variant::kReno;
  c.init_cwnd_mss = cwnd;
  c.ssthresh_init_mss = ssthresh;
  return c;
}

}  // namespace

TEST_CASE("slow start adds one MSS per new ACK") {
  Harness h(reno());
  h.sender.app_write(100 * kMss);
  CHECK(h.sent.size() == 3);
  h.ack(1);
  CHECK(h.sender.state().cwnd == doctest::Approx(4.0));
  CHECK(h.sender.state().phase == Phase::kSlowStart);
  CHECK(h.sent.size() == 5);  // one slot freed plus one more from growth: 4 in flight
}

TEST_CASE("congestion avoidance adds about one MSS per window") {
  Harness h(reno(10, 10));
  CHECK(h.sender.state().phase == Phase::kCongAvoid);
  h.sender.app_write(100 * kMss);
  double expect = 10.0;
  for (int i = 1; i <= 10; ++i) {
    h.ack(static_cast<std::uint64_t>(i));
    expect += 1.0 / expect;
  }
  CHECK(h.sender.state().cwnd == doctest::Approx(expect).epsilon(1e-12));
  CHECK(h.sender.state().cwnd == doctest::Approx(11.0).epsilon(0.01));
}

TEST_CASE("three duplicate ACKs halve the window and resend the first unacked segment") {
  Harness h(reno(20, 500));
  h.sender.app_write(100 * kMss);
  REQUIRE(h.sent.size() == 20);
  for (int i = 0; i < 3; ++i) h.ack(0);
  const auto& st = h.sender.state();
  CHECK(st.ssthresh == doctest::Approx(10.0));
  CHECK(st.phase == Phase::kFastRecovery);
  CHECK(st.cwnd == doctest::Approx(13.0));
  REQUIRE(h.sent.size() == 21);
  CHECK(h.sent.back().seq == 0);
  CHECK(h.sent.back().is_retransmission);
  CHECK(h.sender.counters().fast_retransmits == 1);

  h.ack(0);  // inflation
  CHECK(st.cwnd == doctest::Approx(14.0));
  h.ack(20);  // new ACK deflates
  CHECK(st.cwnd == doctest::Approx(10.0));
  CHECK(st.phase == Phase::kCongAvoid);
}

TEST_CASE("retransmission timeout") {
  Harness h(reno(40, 500));
  h.sender.app_write(1000 * kMss);
  REQUIRE(h.sent.size() == 40);
  const auto rto0 = h.sender.state().rto;
  h.sim.run_until(rto0);
  const auto& st = h.sender.state();
  CHECK(st.cwnd == doctest::Approx(1.0));
  CHECK(st.ssthresh == doctest::Approx(20.0));
  CHECK(st.phase == Phase::kSlowStart);
  CHECK(h.sent.back().seq == 0);
  CHECK(h.sender.counters().timeouts == 1);
  CHECK(st.rto == rto0 * 2);

  h.sim.run_until(rto0 + rto0 * 2);
  CHECK(h.sender.counters().timeouts == 2);
  CHECK(st.rto == rto0 * 4);
  CHECK(st.ssthresh == doctest::Approx(20.0));  // not recomputed on a backed-off timeout

  h.ack(1);
  CHECK(st.cwnd == doctest::Approx(2.0));
  CHECK(st.phase == Phase::kSlowStart);
  CHECK(st.backoff == 0);
}

TEST_CASE("RTO estimate follows srtt + 4 rttvar with a floor") {
  auto cfg = reno();
  Harness h(cfg);
  h.sender.app_write(10 * kMss);
  h.sim.run_until(SimTime::from_ms(100));
  h.ack(1);
  const auto& st = h.sender.state();
  CHECK(st.rtt_valid);
  CHECK(st.srtt_s == doctest::Approx(0.1));
  CHECK(st.rttvar_s == doctest::Approx(0.05));
  CHECK(st.rto == SimTime::from_ms(300));
  Harness fast(cfg);
  fast.sender.app_write(10 * kMss);
  fast.sim.run_until(SimTime::from_ms(1));
  fast.ack(1);
  CHECK(fast.sender.state().rto == SimTime::from_ms(200));
}

TEST_CASE("cubic curve constants") {
  const double k = tcp::cubic_k(100, 0.2, 0.4);
  CHECK(k == doctest::Approx(std::cbrt(50.0)));
  CHECK(k == doctest::Approx(3.684).epsilon(1e-3));
  CHECK(tcp::cubic_window(k, 100, k, 0.4) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(tcp::cubic_window(0.0, 100, k, 0.4) == doctest::Approx(80.0).epsilon(1e-12));
}

TEST_CASE("CUBIC loss starts an epoch at the current window") {
  tcp::TcpConfig cfg;
  cfg.init_cwnd_mss = 100;
  cfg.ssthresh_init_mss = 500;
  Harness h(cfg);
  h.sender.app_write(1000 * kMss);
  for (int i = 0; i < 3; ++i) h.ack(0);
  REQUIRE(h.sender.cubic_epochs().size() == 1);
  const auto& e = h.sender.cubic_epochs()[0];
  CHECK(e.w_max == doctest::Approx(100.0));
  CHECK(e.k_s == doctest::Approx(std::cbrt(50.0)));
  CHECK(e.w_at_k == doctest::Approx(100.0));
  CHECK(e.w_at_zero == doctest::Approx(80.0));
  CHECK(e.ssthresh_after == doctest::Approx(80.0));
  CHECK(h.sender.state().cwnd == doctest::Approx(83.0));
}

TEST_CASE("CUBIC growth tracks the cubic curve in congestion avoidance") {
  tcp::TcpConfig cfg;
  cfg.init_cwnd_mss = 100;
  Harness h(cfg);
  h.sender.app_write(1'000'000ull * kMss);
  for (int i = 0; i < 3; ++i) h.ack(0);
  h.ack(100);  // leave recovery at cwnd = 80
  CHECK(h.sender.state().cwnd == doctest::Approx(80.0));
  // Acknowledge steadily for K seconds; the window should end near w_max.
  const double k = std::cbrt(50.0);
  std::uint64_t acked = 100;
  while (h.sim.now().seconds() < k) {
    h.sim.run_until(h.sim.now() + SimTime::from_ms(1));
    acked += 1;
    h.ack(acked);
  }
  CHECK(h.sender.state().cwnd == doctest::Approx(100.0).epsilon(0.02));
  CHECK(h.sender.state().cwnd <= 100.5);
}

TEST_CASE("new data is only sent inside the window and cwnd stays at least one MSS") {
  tcp::TcpConfig cfg;
  sim::Simulator s;
  tcp::TcpSender* sp = nullptr;
  int violations = 0;
  std::uint64_t new_segments = 0;
  tcp::TcpSender sender(s, cfg, [&](const tcp::Segment& seg) {
    if (seg.is_retransmission) return;
    ++new_segments;
    const auto& st = sp->state();
    if (static_cast<double>(st.flight_bytes()) > st.cwnd * kMss) ++violations;
  });
  sp = &sender;
  sim::RngStream r(4, "acks");
  sender.app_write(5000 * kMss);
  std::uint64_t acked = 0;
  for (int step = 0; step < 20'000; ++step) {
    const auto& st = sender.state();
    REQUIRE(st.cwnd >= 1.0);
    REQUIRE(st.snd_una <= st.snd_nxt);
    s.run_until(s.now() + SimTime::from_ms(1));
    if (r.bernoulli(0.2)) {
      sender.on_ack({acked});
    } else if (acked < st.snd_max) {
      acked = std::min<std::uint64_t>(acked + kMss, st.snd_max);
      sender.on_ack({acked});
    }
  }
  CHECK(new_segments > 1000);
  CHECK(violations == 0);
  CHECK(sender.counters().fast_retransmits > 0);
}

TEST_CASE("ACK beyond anything sent is a model error") {
  Harness h(reno());
  h.sender.app_write(kMss);
  CHECK_THROWS_AS(h.sender.on_ack({10 * kMss}), ModelError);
}

TEST_CASE("receiver cumulative ACKs") {
  std::uint64_t handed = 0;
  tcp::TcpReceiver rx([&](std::uint64_t from, std::uint64_t to) { handed += to - from; });
  CHECK(rx.on_segment({0, 1000}).ack_no == 1000);
  CHECK(rx.on_segment({2000, 1000}).ack_no == 1000);  // gap: duplicate ACK
  CHECK(rx.on_segment({3000, 1000}).ack_no == 1000);
  CHECK(rx.on_segment({1000, 1000}).ack_no == 4000);  // jumps over buffered data
  CHECK(handed == 4000);
  CHECK(rx.on_segment({0, 1000}).ack_no == 4000);
  CHECK(rx.duplicate_segments() == 1);
  CHECK(handed == 4000);
}

TEST_CASE("pipe delivers after the configured delay") {
  sim::Simulator s;
  tcp::Pipe zero(s, SimTime{});
  tcp::Pipe ten(s, SimTime::from_ms(10));
  std::vector<std::int64_t> at;
  zero.transfer([&] { at.push_back(s.now().us()); });
  ten.transfer([&] { at.push_back(s.now().us()); });
  s.run_until(SimTime::from_ms(20));
  CHECK(at == std::vector<std::int64_t>{0, 10'000});

  tcp::TcpConfig cfg;
  CHECK(cfg.one_way_delay() == SimTime::from_ms(10));
  cfg.delay_is_round_trip = true;
  CHECK(cfg.one_way_delay() == SimTime::from_ms(5));
}

TEST_CASE("loss-free transfer is limited by cwnd over RTT and delivers every byte") {
  tcp::TcpConfig cfg = reno(10, 10);
  cfg.network_delay_ms = 50;
  sim::Simulator s;
  std::uint64_t delivered = 0;
  tcp::TcpReceiver rx([&](std::uint64_t from, std::uint64_t to) { delivered += to - from; });
  tcp::Pipe pipe(s, cfg.one_way_delay());
  tcp::TcpSender* sp = nullptr;
  tcp::TcpSender sender(s, cfg, [&](const tcp::Segment& seg) {
    pipe.transfer([&, seg] {
      const auto a = rx.on_segment(seg);
      pipe.transfer([&, a] { sp->on_ack(a); });
    });
  });
  sp = &sender;
  const std::uint64_t total = 2000ull * kMss + 123;
  sender.app_write(total);
  s.run_until(SimTime::from_ms(99));
  CHECK(delivered == 10ull * kMss);  // one window in the first RTT
  s.run_until(SimTime::from_seconds(30));
  CHECK(delivered == total);
  CHECK(sender.counters().retransmissions == 0);
}

TEST_CASE("idle restart resets the window after a quiet period") {
  auto cfg = reno(3, 500);
  sim::Simulator s;
  tcp::TcpSender* sp = nullptr;
  tcp::TcpSender sender(s, cfg, [&](const tcp::Segment& seg) {
    s.schedule_in(SimTime::from_ms(5), sim::EventKind::kOther, [&, seg] { sp->on_ack({seg.seq + seg.len}); });
  });
  sp = &sender;
  sender.app_write(50 * kMss);
  s.run_until(SimTime::from_seconds(1));
  CHECK(sender.state().cwnd > 3.0);
  s.run_until(SimTime::from_seconds(5));
  sender.app_write(10 * kMss);
  CHECK(sender.counters().idle_restarts == 1);
  CHECK(sender.state().cwnd == doctest::Approx(3.0));
}
