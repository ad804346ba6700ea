#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "recovery/link_model.hpp"
#include "recovery/sim_engine.hpp"

namespace recovery::harq {

enum class HarqMode : std::uint8_t {
  kCombining,  ///< Chase combining across copies
  kL1Arq,      ///< every attempt decoded on its own
};

struct HarqConfig {
  int n_processes = 8;
  int max_retx = 6;
  HarqMode mode = HarqMode::kCombining;
  int feedback_delay_slots = 4;

  void validate() const;
};

/// One RLC PDU (by id) carried inside a transport block.
struct PayloadEntry {
  std::uint64_t pdu_id = 0;
  std::uint32_t bytes = 0;
};

struct TransportBlock {
  std::uint64_t tb_id = 0;
  std::vector<PayloadEntry> payload;
  sim::SimTime created_at;

  std::int64_t bytes() const;
};

enum class ProcessState : std::uint8_t { kIdle, kWaitingFeedback, kRetxPending };

struct HarqProcess {
  int id = 0;
  ProcessState state = ProcessState::kIdle;
  std::optional<TransportBlock> tb;
  int attempt_index = 0;    ///< attempts made for the current TB
  int combined_copies = 0;  ///< copies whose grant the receiver actually saw
  bool delivered = false;   ///< receiver decoded the TB on some attempt
  link::Feedback last_true_state = link::Feedback::kAck;
};

enum class LossCause : std::uint8_t { kNone, kNackToAck, kDtxToAck, kGiveUp };

/// Terminal outcome counters. Every TB ends in exactly one bucket.
struct OutcomeLog {
  std::uint64_t delivered = 0;
  std::uint64_t nack_to_ack = 0;
  std::uint64_t dtx_to_ack = 0;
  std::uint64_t give_up = 0;
  std::uint64_t attempts = 0;
  std::uint64_t spurious_retx = 0;  ///< retransmissions of a TB the receiver already had

  std::uint64_t residual_losses() const { return nack_to_ack + dtx_to_ack; }
  std::uint64_t losses() const { return residual_losses() + give_up; }
  std::uint64_t concluded() const { return delivered + losses(); }

  OutcomeLog& operator+=(const OutcomeLog& o);
};

/// (ResidualLoss + GiveUpLoss) / concluded TBs. Throws ModelError on an empty log.
double measured_residual_rate(const OutcomeLog& log);

enum class DecisionKind : std::uint8_t { kDelivered, kResidualLoss, kGiveUpLoss, kRetransmit };

struct HarqDecision {
  DecisionKind kind = DecisionKind::kRetransmit;
  LossCause cause = LossCause::kNone;
  std::optional<TransportBlock> concluded_tb;  ///< set for every terminal decision
};

struct Reception {
  link::Feedback true_state = link::Feedback::kAck;
  bool first_delivery = false;  ///< hand the payload to RLC
};

/// Transmitter-side HARQ entity for one link: parallel stop-and-wait processes,
/// at most one transmission per slot, asynchronous retransmissions.
class HarqEntity {
 public:
  /// Fills up to `byte_budget` bytes of new RLC data; empty when nothing is queued.
  using TbBuilder = std::function<std::vector<PayloadEntry>(std::int64_t byte_budget)>;

  HarqEntity(const HarqConfig& cfg, const link::LinkConfig& link_cfg);

  /// Picks the lowest-id process waiting for a retransmission, otherwise the
  /// lowest-id idle process if the builder yields data. Returns at most one attempt.
  std::vector<link::TransmissionAttempt> on_slot(sim::SimTime slot_time, const TbBuilder& build);

  /// Records what happened over the air for the process's outstanding attempt.
  Reception on_transmission_outcome(int process_id, bool grant_ok, bool decode_ok);

  /// Acts on the (possibly corrupted) feedback for the outstanding attempt.
  HarqDecision on_feedback(int process_id, const link::FeedbackSignal& feedback);

  const HarqProcess& process(int id) const { return processes_.at(static_cast<std::size_t>(id)); }
  const std::vector<HarqProcess>& processes() const { return processes_; }
  const OutcomeLog& log() const { return log_; }
  const HarqConfig& config() const { return cfg_; }
  const link::LinkConfig& link_config() const { return link_cfg_; }

  bool combining() const { return cfg_.mode == HarqMode::kCombining && link_cfg_.combining_enabled; }

 private:
  HarqProcess& waiting_process(int process_id);
  HarqDecision conclude(HarqProcess& p, DecisionKind kind, LossCause cause);

  HarqConfig cfg_;
  link::LinkConfig link_cfg_;
  std::vector<HarqProcess> processes_;
  OutcomeLog log_;
  std::uint64_t next_tb_id_ = 0;
};

/// Drives one HARQ entity through `n_tbs` transport blocks back to back, drawing
/// grant/decode from stream "phy" and feedback corruption from "feedback".
/// No upper layers are involved; this is the Monte-Carlo counterpart of the
/// closed-form residual-error model.
OutcomeLog simulate_residual(const HarqConfig& cfg, const link::LinkConfig& link_cfg,
                             const link::ErrorModelParams& params, std::uint64_t n_tbs, std::uint64_t seed);

}  // namespace recovery::harq
