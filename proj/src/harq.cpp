#include "recovery/harq.hpp"

#include <numeric>
#include <string>

#include "recovery/errors.hpp"

namespace recovery::harq {

void HarqConfig::validate() const {
  if (n_processes < 1) throw ConfigError("harq.n_processes must be >= 1");
  if (max_retx < 0) throw ConfigError("harq.max_retx must be >= 0");
  if (feedback_delay_slots < 0) throw ConfigError("harq.feedback_delay_slots must be >= 0");
}

std::int64_t TransportBlock::bytes() const {
  return std::accumulate(payload.begin(), payload.end(), std::int64_t{0},
                         [](std::int64_t acc, const PayloadEntry& e) { return acc + e.bytes; });
}

OutcomeLog& OutcomeLog::operator+=(const OutcomeLog& o) {
  delivered += o.delivered;
  nack_to_ack += o.nack_to_ack;
  dtx_to_ack += o.dtx_to_ack;
  give_up += o.give_up;
  attempts += o.attempts;
  spurious_retx += o.spurious_retx;
  return *this;
}

double measured_residual_rate(const OutcomeLog& log) {
  if (log.concluded() == 0) throw ModelError("residual rate undefined: no transport block concluded");
  return static_cast<double>(log.losses()) / static_cast<double>(log.concluded());
}

HarqEntity::HarqEntity(const HarqConfig& cfg, const link::LinkConfig& link_cfg) : cfg_(cfg), link_cfg_(link_cfg) {
  cfg_.validate();
  link_cfg_.validate();
  processes_.resize(static_cast<std::size_t>(cfg_.n_processes));
  for (int i = 0; i < cfg_.n_processes; ++i) processes_[static_cast<std::size_t>(i)].id = i;
}

std::vector<link::TransmissionAttempt> HarqEntity::on_slot(sim::SimTime slot_time, const TbBuilder& build) {
  if (slot_time.us() % link_cfg_.slot_us != 0) throw ModelError("on_slot called off a slot boundary");

  HarqProcess* chosen = nullptr;
  for (auto& p : processes_) {
    if (p.state == ProcessState::kRetxPending) {
      chosen = &p;
      break;
    }
  }
  if (chosen == nullptr) {
    for (auto& p : processes_) {
      if (p.state != ProcessState::kIdle) continue;
      auto payload = build(link_cfg_.tb_bytes());
      if (payload.empty()) return {};
      chosen = &p;
      chosen->tb = TransportBlock{next_tb_id_++, std::move(payload), slot_time};
      if (chosen->tb->bytes() > link_cfg_.tb_bytes()) throw ModelError("transport block exceeds tb_bits");
      chosen->attempt_index = 0;
      chosen->combined_copies = 0;
      chosen->delivered = false;
      break;
    }
  }
  if (chosen == nullptr) return {};  // every process waits for feedback

  chosen->state = ProcessState::kWaitingFeedback;
  ++chosen->attempt_index;
  ++log_.attempts;
  const int copies = combining() ? chosen->combined_copies + 1 : 1;
  return {link::TransmissionAttempt{chosen->id, chosen->attempt_index, copies}};
}

HarqProcess& HarqEntity::waiting_process(int process_id) {
  if (process_id < 0 || process_id >= cfg_.n_processes) throw ModelError("unknown HARQ process");
  auto& p = processes_[static_cast<std::size_t>(process_id)];
  if (p.state != ProcessState::kWaitingFeedback) throw ModelError("HARQ process is not waiting for feedback");
  return p;
}

Reception HarqEntity::on_transmission_outcome(int process_id, bool grant_ok, bool decode_ok) {
  auto& p = waiting_process(process_id);
  Reception r;
  if (!grant_ok) {
    r.true_state = link::Feedback::kDtx;
  } else {
    ++p.combined_copies;
    if (p.delivered) {
      // Receiver already holds this TB and simply acknowledges the copy again.
      r.true_state = link::Feedback::kAck;
    } else if (decode_ok) {
      p.delivered = true;
      r.first_delivery = true;
      r.true_state = link::Feedback::kAck;
    } else {
      r.true_state = link::Feedback::kNack;
    }
  }
  p.last_true_state = r.true_state;
  return r;
}

HarqDecision HarqEntity::conclude(HarqProcess& p, DecisionKind kind, LossCause cause) {
  HarqDecision d{kind, cause, std::move(p.tb)};
  switch (kind) {
    case DecisionKind::kDelivered:
      ++log_.delivered;
      break;
    case DecisionKind::kResidualLoss:
      if (cause == LossCause::kDtxToAck) {
        ++log_.dtx_to_ack;
      } else {
        ++log_.nack_to_ack;
      }
      break;
    case DecisionKind::kGiveUpLoss:
      ++log_.give_up;
      break;
    case DecisionKind::kRetransmit:
      throw ModelError("retransmission is not a terminal outcome");
  }
  p.tb.reset();
  p.state = ProcessState::kIdle;
  p.attempt_index = 0;
  p.combined_copies = 0;
  p.delivered = false;
  return d;
}

HarqDecision HarqEntity::on_feedback(int process_id, const link::FeedbackSignal& feedback) {
  auto& p = waiting_process(process_id);
  if (feedback.observed_state == link::Feedback::kAck) {
    if (p.delivered) return conclude(p, DecisionKind::kDelivered, LossCause::kNone);
    const auto cause = feedback.true_state == link::Feedback::kDtx ? LossCause::kDtxToAck : LossCause::kNackToAck;
    return conclude(p, DecisionKind::kResidualLoss, cause);
  }
  // NACK or DTX observed: retransmit with a fresh grant while attempts remain.
  if (p.attempt_index > cfg_.max_retx) {
    if (p.delivered) return conclude(p, DecisionKind::kDelivered, LossCause::kNone);
    return conclude(p, DecisionKind::kGiveUpLoss, LossCause::kGiveUp);
  }
  if (p.delivered) ++log_.spurious_retx;
  p.state = ProcessState::kRetxPending;
  return HarqDecision{DecisionKind::kRetransmit, LossCause::kNone, std::nullopt};
}

OutcomeLog simulate_residual(const HarqConfig& cfg, const link::LinkConfig& link_cfg,
                             const link::ErrorModelParams& params, std::uint64_t n_tbs, std::uint64_t seed) {
  params.validate();
  HarqConfig single = cfg;
  single.n_processes = 1;
  HarqEntity entity(single, link_cfg);
  sim::RngStream phy(seed, "phy");
  sim::RngStream fb(seed, "feedback");

  const HarqEntity::TbBuilder one_pdu = [](std::int64_t) { return std::vector<PayloadEntry>{{0, 1}}; };
  const auto slot = sim::SimTime::from_us(link_cfg.slot_us);
  sim::SimTime t;
  while (entity.log().concluded() < n_tbs) {
    const auto attempts = entity.on_slot(t, one_pdu);
    const auto& att = attempts.front();
    const bool grant = link::grant_received(params, phy);
    const bool decoded = grant && !entity.process(att.process_id).delivered &&
                         link::attempt_decode(att, entity.link_config(), params, phy);
    const auto rx = entity.on_transmission_outcome(att.process_id, grant, decoded);
    entity.on_feedback(att.process_id, link::corrupt_feedback(rx.true_state, params, fb));
    t += slot;
  }
  return entity.log();
}

}  // namespace recovery::harq
