#include "recovery/tcp.hpp"

#include <algorithm>
#include <cmath>

#include "recovery/errors.hpp"

namespace recovery::tcp {

void TcpConfig::validate() const {
  if (mss_bytes == 0) throw ConfigError("tcp.mss_bytes must be > 0");
  if (!(init_cwnd_mss >= 1.0)) throw ConfigError("tcp.init_cwnd_mss must be >= 1");
  if (!(ssthresh_init_mss > 0.0)) throw ConfigError("tcp.ssthresh_init_mss must be > 0");
  if (!(cubic_beta > 0.0 && cubic_beta < 1.0)) throw ConfigError("tcp.cubic_beta must lie in (0,1)");
  if (!(cubic_c > 0.0)) throw ConfigError("tcp.cubic_c must be > 0");
  if (!(network_delay_ms >= 0.0)) throw ConfigError("tcp.network_delay_ms must be >= 0");
  if (!(rto_min_ms > 0.0) || rto_initial_ms < rto_min_ms || rto_max_ms < rto_initial_ms) {
    throw ConfigError("tcp RTO bounds must satisfy 0 < min <= initial <= max");
  }
  if (dupack_threshold < 1) throw ConfigError("tcp.dupack_threshold must be >= 1");
}

double cubic_k(double w_max, double beta, double c) { return std::cbrt(w_max * beta / c); }

double cubic_window(double t_since_epoch_s, double w_max, double k_s, double c) {
  const double d = t_since_epoch_s - k_s;
  return c * d * d * d + w_max;
}

TcpSender::TcpSender(sim::Simulator& sim, const TcpConfig& cfg, SegmentSink sink)
    : sim_(&sim), cfg_(cfg), sink_(std::move(sink)), rto_timer_(sim, [this] { on_rto(); }) {
  cfg_.validate();
  st_.cwnd = cfg_.init_cwnd_mss;
  st_.ssthresh = cfg_.ssthresh_init_mss;
  st_.phase = st_.cwnd < st_.ssthresh ? Phase::kSlowStart : Phase::kCongAvoid;
  st_.rto = sim::SimTime::from_ms(cfg_.rto_initial_ms);
}

double TcpSender::flight_mss() const { return static_cast<double>(st_.flight_bytes()) / cfg_.mss_bytes; }

void TcpSender::app_write(std::uint64_t bytes) {
  app_limit_ += bytes;
  try_send();
}

void TcpSender::transmit(std::uint64_t seq, std::uint32_t len) {
  const bool retx = seq < st_.snd_max;
  if (retx) {
    ++counters_.retransmissions;
    if (timing_ && seq < timed_seq_end_) timing_ = false;  // Karn
  } else if (!timing_) {
    timing_ = true;
    timed_seq_end_ = seq + len;
    timed_start_ = sim_->now();
  }
  ++counters_.segments;
  st_.snd_max = std::max(st_.snd_max, seq + len);
  last_send_ = sim_->now();
  if (first_send_hook_ && !retx) first_send_hook_(seq, len);
  if (!rto_timer_.running()) rto_timer_.start(st_.rto);
  sink_(Segment{seq, len, retx, sim_->now()});
}

void TcpSender::try_send() {
  if (cfg_.idle_restart && st_.flight_bytes() == 0 && st_.snd_nxt < app_limit_ && counters_.segments > 0 &&
      sim_->now() - last_send_ > st_.rto) {
    if (st_.cwnd > cfg_.init_cwnd_mss) {
      ++counters_.idle_restarts;
      st_.cwnd = cfg_.init_cwnd_mss;
    }
    if (st_.cubic.active) st_.cubic.start += sim_->now() - last_send_;
    st_.phase = st_.cwnd < st_.ssthresh ? Phase::kSlowStart : Phase::kCongAvoid;
  }
  const double window_bytes = st_.cwnd * cfg_.mss_bytes;
  while (st_.snd_nxt < app_limit_) {
    const auto len = static_cast<std::uint32_t>(std::min<std::uint64_t>(cfg_.mss_bytes, app_limit_ - st_.snd_nxt));
    if (static_cast<double>(st_.flight_bytes() + len) > window_bytes) break;
    const std::uint64_t seq = st_.snd_nxt;
    st_.snd_nxt += len;
    transmit(seq, len);
  }
}

void TcpSender::take_rtt_sample(double r_s) {
  if (!st_.rtt_valid) {
    st_.srtt_s = r_s;
    st_.rttvar_s = r_s / 2.0;
    st_.rtt_valid = true;
  } else {
    st_.rttvar_s = 0.75 * st_.rttvar_s + 0.25 * std::abs(st_.srtt_s - r_s);
    st_.srtt_s = 0.875 * st_.srtt_s + 0.125 * r_s;
  }
}

void TcpSender::update_rto() {
  if (!st_.rtt_valid) return;
  const double rto_ms = 1e3 * (st_.srtt_s + 4.0 * st_.rttvar_s);
  st_.rto = sim::SimTime::from_ms(std::clamp(rto_ms, cfg_.rto_min_ms, cfg_.rto_max_ms));
}

void TcpSender::restart_rto_timer() {
  if (st_.flight_bytes() > 0 || st_.snd_una < st_.snd_max) {
    rto_timer_.start(st_.rto);
  } else {
    rto_timer_.stop();
  }
}

void TcpSender::enter_loss_epoch() {
  const double beta = cfg_.cubic_beta;
  auto& ep = st_.cubic;
  ep.active = true;
  ep.w_max = st_.cwnd;
  ep.k_s = cubic_k(ep.w_max, beta, cfg_.cubic_c);
  ep.start = sim_->now();
  st_.ssthresh = std::max((1.0 - beta) * ep.w_max, 2.0);
  epochs_.push_back(EpochRecord{sim_->now(), ep.w_max, ep.k_s, cubic_window(0.0, ep.w_max, ep.k_s, cfg_.cubic_c),
                                cubic_window(ep.k_s, ep.w_max, ep.k_s, cfg_.cubic_c), st_.ssthresh});
}

void TcpSender::grow_on_new_ack() {
  switch (st_.phase) {
    case Phase::kFastRecovery:
      st_.cwnd = st_.ssthresh;
      st_.phase = Phase::kCongAvoid;
      return;
    case Phase::kSlowStart:
      st_.cwnd += 1.0;
      if (st_.cwnd >= st_.ssthresh) st_.phase = Phase::kCongAvoid;
      return;
    case Phase::kCongAvoid:
      break;
  }
  if (cfg_.variant == Variant::kReno) {
    st_.cwnd += 1.0 / st_.cwnd;
    return;
  }
  auto& ep = st_.cubic;
  if (!ep.active) {
    // Entered congestion avoidance without a loss: grow from the current window.
    ep.active = true;
    ep.w_max = st_.cwnd;
    ep.k_s = 0.0;
    ep.start = sim_->now();
  }
  const double t = (sim_->now() - ep.start).seconds();
  const double target = cubic_window(t, ep.w_max, ep.k_s, cfg_.cubic_c);
  if (target > st_.cwnd) {
    st_.cwnd += std::min(target - st_.cwnd, st_.cwnd) / st_.cwnd;
  } else {
    st_.cwnd += 0.01 / st_.cwnd;
  }
}

void TcpSender::on_ack(const Ack& ack) {
  if (ack.ack_no > st_.snd_max) throw ModelError("ACK beyond highest sent byte");
  if (ack.ack_no > st_.snd_una) {
    st_.snd_una = ack.ack_no;
    st_.snd_nxt = std::max(st_.snd_nxt, st_.snd_una);
    if (timing_ && ack.ack_no >= timed_seq_end_) {
      timing_ = false;
      take_rtt_sample((sim_->now() - timed_start_).seconds());
    }
    st_.backoff = 0;
    update_rto();
    grow_on_new_ack();
    st_.dupack_count = 0;
    restart_rto_timer();
  } else if (ack.ack_no == st_.snd_una && st_.snd_una < st_.snd_max) {
    ++st_.dupack_count;
    if (st_.phase == Phase::kFastRecovery) {
      st_.cwnd += 1.0;
    } else if (st_.dupack_count == cfg_.dupack_threshold) {
      ++counters_.fast_retransmits;
      if (cfg_.variant == Variant::kCubic) {
        enter_loss_epoch();
      } else {
        st_.ssthresh = std::max(flight_mss() / 2.0, 2.0);
      }
      st_.cwnd = st_.ssthresh + cfg_.dupack_threshold;
      st_.phase = Phase::kFastRecovery;
      const auto len = static_cast<std::uint32_t>(std::min<std::uint64_t>(cfg_.mss_bytes, st_.snd_max - st_.snd_una));
      transmit(st_.snd_una, len);
    }
  }
  try_send();
}

void TcpSender::on_rto() {
  rto_timer_.stop();
  if (st_.snd_una >= st_.snd_max) return;
  ++counters_.timeouts;
  if (st_.backoff == 0) {
    if (cfg_.variant == Variant::kCubic) {
      enter_loss_epoch();
    } else {
      st_.ssthresh = std::max(flight_mss() / 2.0, 2.0);
    }
  }
  st_.cwnd = 1.0;
  st_.phase = Phase::kSlowStart;
  st_.dupack_count = 0;
  st_.snd_nxt = st_.snd_una;  // go back N
  ++st_.backoff;
  st_.rto = std::min(st_.rto * 2, sim::SimTime::from_ms(cfg_.rto_max_ms));
  timing_ = false;
  try_send();
  if (!rto_timer_.running()) rto_timer_.start(st_.rto);
}

Ack TcpReceiver::on_segment(const Segment& seg) {
  const std::uint64_t start = seg.seq;
  const std::uint64_t end = seg.seq + seg.len;
  if (end <= rcv_nxt_) {
    ++duplicates_;
    return Ack{rcv_nxt_};
  }
  if (start > rcv_nxt_) {
    auto [it, fresh] = ooo_.try_emplace(start, end);
    if (!fresh) {
      if (it->second >= end) ++duplicates_;
      it->second = std::max(it->second, end);
    }
    return Ack{rcv_nxt_};
  }
  const std::uint64_t before = rcv_nxt_;
  rcv_nxt_ = end;
  for (auto it = ooo_.begin(); it != ooo_.end() && it->first <= rcv_nxt_;) {
    rcv_nxt_ = std::max(rcv_nxt_, it->second);
    it = ooo_.erase(it);
  }
  if (sink_) sink_(before, rcv_nxt_);
  return Ack{rcv_nxt_};
}

}  // namespace recovery::tcp
