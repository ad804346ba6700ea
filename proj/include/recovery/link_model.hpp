#pragma once

#include <cstdint>
#include <string_view>

#include "recovery/sim_engine.hpp"

namespace recovery::link {

/// Control/data channel error probabilities of the residual-error model.
struct ErrorModelParams {
  double p_ch = 0.01;  ///< downlink grant missed
  double p_e = 0.1;    ///< first-transmission BLER
  double p_na = 0.0;   ///< NACK read as ACK
  double p_da = 0.0;   ///< DTX read as ACK
  double p_an = 0.0;   ///< ACK read as NACK
  int n_max = 6;       ///< max HARQ retransmissions

  /// Throws ConfigError if any probability is outside [0,1] or n_max < 0.
  void validate() const;
};

struct LinkConfig {
  std::int64_t slot_us = 500;
  std::int64_t tb_bits = 75'000;
  double combining_gain = 0.95;
  bool combining_enabled = true;

  std::int64_t tb_bytes() const { return tb_bits / 8; }
  void validate() const;
};

struct TransmissionAttempt {
  int process_id = 0;
  int attempt_index = 1;    ///< 1 = initial transmission
  int combined_copies = 0;  ///< copies the receiver will hold if this one's grant is seen
};

enum class Feedback : std::uint8_t { kAck, kNack, kDtx };

std::string_view to_string(Feedback f);

struct FeedbackSignal {
  Feedback true_state = Feedback::kAck;
  Feedback observed_state = Feedback::kAck;
};

/// False with probability p_ch: the UE missed the grant and will stay silent (DTX).
bool grant_received(const ErrorModelParams& params, sim::RngStream& rng);

/// Probability that a decode with `combined_copies` soft-combined copies fails.
/// Chase combining: p_e^(1 + gain * (copies - 1)); without combining every
/// attempt fails independently with p_e.
double decode_failure_probability(int combined_copies, const LinkConfig& cfg, const ErrorModelParams& params);

/// Draws the decode result for an attempt whose grant was received.
/// Requires att.combined_copies >= 1.
bool attempt_decode(const TransmissionAttempt& att, const LinkConfig& cfg, const ErrorModelParams& params,
                    sim::RngStream& rng);

/// Applies the feedback-channel corruption: NACK->ACK (p_na), ACK->NACK (p_an),
/// DTX->ACK (p_da). No other transitions exist.
FeedbackSignal corrupt_feedback(Feedback true_state, const ErrorModelParams& params, sim::RngStream& rng);

}  // namespace recovery::link
