#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "recovery/sim_engine.hpp"

namespace recovery::tcp {

enum class Variant : std::uint8_t { kReno, kCubic };

struct TcpConfig {
  std::uint32_t mss_bytes = 1500;
  double init_cwnd_mss = 3.0;
  double ssthresh_init_mss = 500.0;
  Variant variant = Variant::kCubic;
  double cubic_beta = 0.2;
  double cubic_c = 0.4;
  double network_delay_ms = 10.0;
  /// When set, network_delay_ms is the round-trip contribution and each
  /// direction gets half of it.
  bool delay_is_round_trip = false;
  double rto_min_ms = 200.0;
  double rto_initial_ms = 1000.0;
  double rto_max_ms = 60'000.0;
  int dupack_threshold = 3;
  /// RFC 5681 restart window after an idle period longer than the RTO.
  bool idle_restart = true;

  sim::SimTime one_way_delay() const {
    return sim::SimTime::from_ms(delay_is_round_trip ? network_delay_ms / 2.0 : network_delay_ms);
  }
  void validate() const;
};

enum class Phase : std::uint8_t { kSlowStart, kCongAvoid, kFastRecovery };

struct CubicEpoch {
  bool active = false;
  double w_max = 0.0;  ///< MSS
  double k_s = 0.0;    ///< seconds until the window returns to w_max
  sim::SimTime start;
};

struct TcpSenderState {
  double cwnd = 3.0;        ///< MSS
  double ssthresh = 500.0;  ///< MSS
  Phase phase = Phase::kSlowStart;
  std::uint64_t snd_una = 0;
  std::uint64_t snd_nxt = 0;
  std::uint64_t snd_max = 0;  ///< highest byte ever sent + 1
  int dupack_count = 0;
  bool rtt_valid = false;
  double srtt_s = 0.0;
  double rttvar_s = 0.0;
  sim::SimTime rto;
  int backoff = 0;
  CubicEpoch cubic;

  std::uint64_t flight_bytes() const { return snd_nxt - snd_una; }
};

struct Segment {
  std::uint64_t seq = 0;
  std::uint32_t len = 0;
  bool is_retransmission = false;
  sim::SimTime send_time;
};

struct Ack {
  std::uint64_t ack_no = 0;
};

/// K = cbrt(w_max * beta / C): time for the cubic curve to climb back to w_max.
double cubic_k(double w_max, double beta, double c);

/// W(t) = C (t - K)^3 + w_max, in MSS.
double cubic_window(double t_since_epoch_s, double w_max, double k_s, double c);

/// Snapshot taken when a loss starts a new CUBIC epoch.
struct EpochRecord {
  sim::SimTime at;
  double w_max = 0.0;
  double k_s = 0.0;
  double w_at_zero = 0.0;
  double w_at_k = 0.0;
  double ssthresh_after = 0.0;
};

struct SenderCounters {
  std::uint64_t segments = 0;
  std::uint64_t retransmissions = 0;
  std::uint64_t fast_retransmits = 0;
  std::uint64_t timeouts = 0;
  std::uint64_t idle_restarts = 0;
};

/// Window-based bulk sender over an application byte stream (Reno or CUBIC
/// growth, RFC 5681 fast retransmit/recovery, RFC 6298 timer).
class TcpSender {
 public:
  using SegmentSink = std::function<void(const Segment&)>;

  TcpSender(sim::Simulator& sim, const TcpConfig& cfg, SegmentSink sink);

  /// Appends `bytes` to the outgoing stream and sends what the window allows.
  void app_write(std::uint64_t bytes);
  void on_ack(const Ack& ack);
  void on_rto();

  const TcpSenderState& state() const { return st_; }
  const TcpConfig& config() const { return cfg_; }
  std::uint64_t app_limit() const { return app_limit_; }
  const SenderCounters& counters() const { return counters_; }
  const std::vector<EpochRecord>& cubic_epochs() const { return epochs_; }
  bool rto_running() const { return rto_timer_.running(); }

  /// Invoked once per transmitted segment, before it leaves.
  void set_first_send_hook(std::function<void(std::uint64_t seq, std::uint32_t len)> hook) {
    first_send_hook_ = std::move(hook);
  }

 private:
  void try_send();
  void transmit(std::uint64_t seq, std::uint32_t len);
  void grow_on_new_ack();
  void enter_loss_epoch();
  void take_rtt_sample(double r_s);
  void update_rto();
  void restart_rto_timer();
  double flight_mss() const;

  sim::Simulator* sim_;
  TcpConfig cfg_;
  SegmentSink sink_;
  TcpSenderState st_;
  std::uint64_t app_limit_ = 0;
  sim::Timer rto_timer_;
  bool timing_ = false;
  std::uint64_t timed_seq_end_ = 0;
  sim::SimTime timed_start_;
  sim::SimTime last_send_;
  SenderCounters counters_;
  std::vector<EpochRecord> epochs_;
  std::function<void(std::uint64_t, std::uint32_t)> first_send_hook_;
};

/// Cumulative-ACK receiver; every segment is acknowledged immediately.
class TcpReceiver {
 public:
  /// Receives [from, to) of the in-order stream.
  using DeliverySink = std::function<void(std::uint64_t from, std::uint64_t to)>;

  explicit TcpReceiver(DeliverySink sink = {}) : sink_(std::move(sink)) {}

  Ack on_segment(const Segment& seg);
  std::uint64_t rcv_nxt() const { return rcv_nxt_; }
  std::uint64_t duplicate_segments() const { return duplicates_; }
  std::size_t out_of_order_blocks() const { return ooo_.size(); }

 private:
  DeliverySink sink_;
  std::uint64_t rcv_nxt_ = 0;
  std::map<std::uint64_t, std::uint64_t> ooo_;  // start -> end
  std::uint64_t duplicates_ = 0;
};

/// Lossless in-order fixed-delay pipe between the server and the RAN.
class Pipe {
 public:
  Pipe(sim::Simulator& sim, sim::SimTime delay) : sim_(&sim), delay_(delay) {}

  void transfer(std::function<void()> deliver) const {
    sim_->schedule_in(delay_, sim::EventKind::kLayerHandoff, std::move(deliver));
  }
  sim::SimTime delay() const { return delay_; }

 private:
  sim::Simulator* sim_;
  sim::SimTime delay_;
};

}  // namespace recovery::tcp
