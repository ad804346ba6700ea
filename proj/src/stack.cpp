#include "recovery/stack.hpp"

#include <algorithm>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>

#include <fmt/format.h>

#include "recovery/analytics.hpp"
#include "recovery/errors.hpp"

namespace recovery::stack {

void StackConfig::validate() const {
  error.validate();
  link.validate();
  harq.validate();
  am.validate();
  um.validate();
  tcp.validate();
  ftp.validate();
  if (error.n_max != harq.max_retx) throw ConfigError("error.n_max and harq.max_retx disagree");
  if (ul_delay_slots < 0) throw ConfigError("uplink delay must be non-negative");
  if (status_loss_prob > 1.0) throw ConfigError("status loss probability above 1");
  if (!(sim_seconds > 0.0)) throw ConfigError("sim_seconds must be positive");
  if (!(warmup_seconds >= 0.0) || warmup_seconds >= sim_seconds) {
    throw ConfigError("warm-up must be non-negative and shorter than the run");
  }
  if (link.tb_bytes() < 1) throw ConfigError("transport block smaller than one byte");
}

double StackConfig::effective_status_loss() const {
  if (status_loss_prob >= 0.0) return status_loss_prob;
  return std::min(1.0, analytics::residual_error_exact(error).total);
}

std::string StackConfig::fingerprint() const {
  return fmt::format(
      "err={:.12g}/{:.12g}/{:.12g}/{:.12g}/{:.12g}/{} link={}/{}/{:.6g}/{} harq={}/{}/{}/{} rlc={} am={}/{:.6g}/{:.6g}/{}/{} "
      "um={:.6g}/{} tcp={}/{:.6g}/{:.6g}/{}/{:.6g}/{:.6g}/{:.6g}/{}/{:.6g}/{:.6g}/{:.6g}/{}/{} ftp={}/{:.12g}/{} "
      "ul={}/{:.12g} t={:.6g}/{:.6g}",
      error.p_ch, error.p_e, error.p_na, error.p_da, error.p_an, error.n_max, link.slot_us, link.tb_bits,
      link.combining_gain, link.combining_enabled, harq.n_processes, harq.max_retx, static_cast<int>(harq.mode),
      harq.feedback_delay_slots, rlc_mode == rlc::RlcMode::kAm ? "AM" : "UM", am.max_retx, am.t_poll_retransmit_ms,
      am.t_reassembly_ms, am.sn_bits, am.poll_pdu_every, um.t_reassembly_ms, um.sn_bits, tcp.mss_bytes,
      tcp.init_cwnd_mss, tcp.ssthresh_init_mss, tcp.variant == tcp::Variant::kCubic ? "CUBIC" : "RENO",
      tcp.cubic_beta, tcp.cubic_c, tcp.network_delay_ms, tcp.delay_is_round_trip, tcp.rto_min_ms,
      tcp.rto_initial_ms, tcp.rto_max_ms, tcp.dupack_threshold, tcp.idle_restart, ftp.file_bytes, ftp.lambda_per_s,
      ftp.n_users, ul_delay_slots, status_loss_prob, sim_seconds, warmup_seconds);
}

namespace {

std::string label(const char* base, int user) {
  return user == 0 ? std::string(base) : fmt::format("{}/{}", base, user);
}

/// One user's full downlink stack: FTP server, TCP, RLC, HARQ and the radio link.
class LinkInstance {
 public:
  LinkInstance(const StackConfig& cfg, std::uint64_t seed, int user)
      : cfg_(cfg),
        slot_(sim::SimTime::from_us(cfg.link.slot_us)),
        ul_delay_(slot_ * cfg.ul_delay_slots),
        warmup_(sim::SimTime::from_seconds(cfg.warmup_seconds)),
        end_(sim::SimTime::from_seconds(cfg.sim_seconds)),
        status_loss_(cfg.effective_status_loss()),
        phy_(seed, label("phy", user)),
        feedback_(seed, label("feedback", user)),
        uplink_(seed, label("uplink", user)),
        harq_(cfg.harq, cfg.link),
        sender_(sim_, cfg.tcp, [this](const tcp::Segment& s) { on_segment_sent(s); }),
        receiver_([this](std::uint64_t from, std::uint64_t to) { on_app_delivery(from, to); }),
        ftp_(sim_, cfg.ftp, seed, user, [this](const traffic::FileTransfer& f) { sender_.app_write(f.bytes); }) {
    if (cfg.rlc_mode == rlc::RlcMode::kAm) {
      am_tx_.emplace(sim_, cfg.am);
      am_rx_.emplace(sim_, cfg.am);
      am_rx_->set_delivery_sink([this](const rlc::Sdu& s) { on_rlc_delivery(s); });
      am_rx_->set_status_sink([this](const rlc::StatusPdu& st) { on_status_report(st); });
    } else {
      um_tx_.emplace(cfg.um);
      um_rx_.emplace(sim_, cfg.um);
      um_rx_->set_delivery_sink([this](const rlc::Sdu& s) { on_rlc_delivery(s); });
    }
    sender_.set_first_send_hook([this](std::uint64_t seq, std::uint32_t len) { ftp_.on_first_send(seq, len); });
    builder_ = [this](std::int64_t budget) { return build_tb(budget); };
  }

  void run(bool keep_trace) {
    keep_trace_ = keep_trace;
    ftp_.start();
    sim_.schedule(sim::SimTime{}, sim::EventKind::kSlotTick, [this] { on_slot(); });
    sim_.run_until(end_);
  }

  double throughput_bps() const {
    return metrics::user_throughput(delivered_after_warmup_, (end_ - warmup_).seconds());
  }

  void collect(metrics::RunMetrics& m) const {
    m.user_throughput_bps.push_back(throughput_bps());
    for (const auto& f : ftp_.files()) {
      if (f.last_byte_delivered) {
        if (*f.last_byte_delivered >= warmup_) {
          m.per_packet_throughput_bps.push_back(traffic::on_file_complete(f));
          ++m.files_completed;
        }
      } else {
        ++m.files_incomplete;
      }
    }
    m.harq_log += harq_.log();
    if (am_tx_) {
      m.sdus_lost += am_tx_->counters().discarded_sdus;
      m.sdus_delivered += am_rx_->counters().delivered_sdus;
    } else {
      m.sdus_lost += um_rx_->counters().lost_sdus;
      m.sdus_delivered += um_rx_->counters().delivered_sdus;
    }
    const auto& c = sender_.counters();
    m.cwnd.fast_retransmits += c.fast_retransmits;
    m.cwnd.timeouts += c.timeouts;
    m.cwnd.loss_epochs += sender_.cubic_epochs().size();
    if (cwnd_samples_ > 0) {
      m.cwnd.mean_mss = cwnd_sum_ / static_cast<double>(cwnd_samples_);
      m.cwnd.max_mss = cwnd_max_;
    }
  }

  const tcp::TcpSender& sender() const { return sender_; }
  const std::vector<CwndSample>& trace() const { return trace_; }
  std::uint64_t events() const { return sim_.executed(); }

 private:
  // Server side: segments cross the core network before reaching the RLC buffer.
  void on_segment_sent(const tcp::Segment& s) {
    sim_.schedule_in(cfg_.tcp.one_way_delay(), sim::EventKind::kLayerHandoff, [this, s] {
      const rlc::Sdu sdu{next_sdu_id_++, s.len, s.seq};
      if (am_tx_) {
        am_tx_->submit(sdu);
      } else {
        um_tx_->submit(sdu);
      }
    });
  }

  std::vector<harq::PayloadEntry> build_tb(std::int64_t budget) {
    std::vector<rlc::Pdu> pdus = am_tx_ ? am_tx_->build(budget) : um_tx_->build(budget);
    std::vector<harq::PayloadEntry> payload;
    payload.reserve(pdus.size());
    for (auto& p : pdus) {
      payload.push_back({p.pdu_id, p.bytes});
      in_flight_.emplace(p.pdu_id, std::move(p));
    }
    return payload;
  }

  void on_slot() {
    const sim::SimTime now = sim_.now();
    sample_cwnd(now);
    for (const auto& att : harq_.on_slot(now, builder_)) transmit(att);
    if (now + slot_ <= end_) sim_.schedule_in(slot_, sim::EventKind::kSlotTick, [this] { on_slot(); });
  }

  void transmit(const link::TransmissionAttempt& att) {
    const int pid = att.process_id;
    const bool grant = link::grant_received(cfg_.error, phy_);
    const bool decoded = grant && !harq_.process(pid).delivered && link::attempt_decode(att, cfg_.link, cfg_.error, phy_);
    const harq::Reception rx = harq_.on_transmission_outcome(pid, grant, decoded);
    if (rx.first_delivery) {
      std::vector<rlc::Pdu> pdus;
      for (const auto& e : harq_.process(pid).tb->payload) pdus.push_back(in_flight_.at(e.pdu_id));
      sim_.schedule_in(slot_, sim::EventKind::kLayerHandoff, [this, pdus = std::move(pdus)] {
        for (const auto& p : pdus) {
          if (am_rx_) {
            am_rx_->on_pdu(p);
          } else {
            um_rx_->on_pdu(p);
          }
        }
      });
    }
    const link::Feedback truth = rx.true_state;
    sim_.schedule_in(slot_ * cfg_.harq.feedback_delay_slots, sim::EventKind::kLayerHandoff,
                     [this, pid, truth] { on_feedback(pid, truth); });
  }

  void on_feedback(int pid, link::Feedback truth) {
    const auto decision = harq_.on_feedback(pid, link::corrupt_feedback(truth, cfg_.error, feedback_));
    if (!decision.concluded_tb) return;
    for (const auto& e : decision.concluded_tb->payload) {
      auto it = in_flight_.find(e.pdu_id);
      if (it == in_flight_.end()) continue;
      if (decision.kind == harq::DecisionKind::kGiveUpLoss && am_tx_) am_tx_->on_local_loss(it->second);
      in_flight_.erase(it);
    }
  }

  void on_status_report(const rlc::StatusPdu& st) {
    if (uplink_.bernoulli(status_loss_)) return;
    sim_.schedule_in(ul_delay_, sim::EventKind::kLayerHandoff, [this, st] { am_tx_->on_status(st); });
  }

  // UE side: RLC hands the SDU (one TCP segment) to the TCP receiver, whose
  // ACK rides the uplink and then the core network back to the server.
  void on_rlc_delivery(const rlc::Sdu& sdu) {
    const tcp::Ack ack = receiver_.on_segment(tcp::Segment{sdu.context, sdu.bytes, false, sim_.now()});
    sim_.schedule_in(ul_delay_ + cfg_.tcp.one_way_delay(), sim::EventKind::kLayerHandoff,
                     [this, ack] { sender_.on_ack(ack); });
  }

  void on_app_delivery(std::uint64_t from, std::uint64_t to) {
    if (sim_.now() >= warmup_) delivered_after_warmup_ += to - from;
    ftp_.on_delivered(to);
  }

  void sample_cwnd(sim::SimTime now) {
    if (now < warmup_) return;
    const auto& st = sender_.state();
    cwnd_sum_ += st.cwnd;
    cwnd_max_ = std::max(cwnd_max_, st.cwnd);
    ++cwnd_samples_;
    if (keep_trace_ && (now.us() % 10'000) == 0) trace_.push_back({now, st.cwnd, st.ssthresh});
  }

  const StackConfig& cfg_;
  sim::SimTime slot_;
  sim::SimTime ul_delay_;
  sim::SimTime warmup_;
  sim::SimTime end_;
  double status_loss_;
  sim::Simulator sim_;
  sim::RngStream phy_;
  sim::RngStream feedback_;
  sim::RngStream uplink_;
  harq::HarqEntity harq_;
  std::optional<rlc::AmTransmitter> am_tx_;
  std::optional<rlc::AmReceiver> am_rx_;
  std::optional<rlc::UmTransmitter> um_tx_;
  std::optional<rlc::UmReceiver> um_rx_;
  tcp::TcpSender sender_;
  tcp::TcpReceiver receiver_;
  traffic::FtpSource ftp_;
  harq::HarqEntity::TbBuilder builder_;
  std::unordered_map<std::uint64_t, rlc::Pdu> in_flight_;
  std::uint64_t next_sdu_id_ = 0;
  std::uint64_t delivered_after_warmup_ = 0;
  bool keep_trace_ = false;
  double cwnd_sum_ = 0.0;
  double cwnd_max_ = 0.0;
  std::uint64_t cwnd_samples_ = 0;
  std::vector<CwndSample> trace_;
};

}  // namespace

RunResult run_link(const StackConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  RunResult out;
  out.metrics.config_fingerprint = cfg.fingerprint();
  out.metrics.seed = seed;
  for (int u = 0; u < cfg.ftp.n_users; ++u) {
    auto inst = std::make_unique<LinkInstance>(cfg, seed, u);
    inst->run(cfg.keep_cwnd_trace && u == 0);
    inst->collect(out.metrics);
    out.events += inst->events();
    if (u == 0) {
      out.cubic_epochs = inst->sender().cubic_epochs();
      out.cwnd_trace = inst->trace();
    }
  }
  const auto& log = out.metrics.harq_log;
  out.metrics.mac_residual_rate = log.concluded() > 0 ? harq::measured_residual_rate(log) : 0.0;
  const std::uint64_t sdus = out.metrics.sdus_delivered + out.metrics.sdus_lost;
  out.metrics.rlc_sdu_loss_rate =
      sdus > 0 ? static_cast<double>(out.metrics.sdus_lost) / static_cast<double>(sdus) : 0.0;
  return out;
}

}  // namespace recovery::stack
