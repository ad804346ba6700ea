#include "recovery/link_model.hpp"

#include <cmath>
#include <string>

#include "recovery/errors.hpp"

namespace recovery::link {

namespace {

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ConfigError(std::string(name) + " must lie in [0,1], got " + std::to_string(p));
  }
}

}  // namespace

void ErrorModelParams::validate() const {
  check_probability(p_ch, "p_ch");
  check_probability(p_e, "p_e");
  check_probability(p_na, "p_na");
  check_probability(p_da, "p_da");
  check_probability(p_an, "p_an");
  if (n_max < 0) throw ConfigError("n_max must be >= 0");
}

void LinkConfig::validate() const {
  if (slot_us <= 0) throw ConfigError("slot_us must be > 0");
  if (tb_bits <= 0) throw ConfigError("tb_bits must be > 0");
  if (!(combining_gain > 0.0 && combining_gain <= 1.0)) throw ConfigError("combining_gain must lie in (0,1]");
}

std::string_view to_string(Feedback f) {
  switch (f) {
    case Feedback::kAck:
      return "ACK";
    case Feedback::kNack:
      return "NACK";
    case Feedback::kDtx:
      return "DTX";
  }
  return "?";
}

bool grant_received(const ErrorModelParams& params, sim::RngStream& rng) { return !rng.bernoulli(params.p_ch); }

double decode_failure_probability(int combined_copies, const LinkConfig& cfg, const ErrorModelParams& params) {
  if (combined_copies < 1) throw ModelError("decode attempted with no received copy");
  if (!cfg.combining_enabled || combined_copies == 1) return params.p_e;
  return std::pow(params.p_e, 1.0 + cfg.combining_gain * (combined_copies - 1));
}

bool attempt_decode(const TransmissionAttempt& att, const LinkConfig& cfg, const ErrorModelParams& params,
                    sim::RngStream& rng) {
  return !rng.bernoulli(decode_failure_probability(att.combined_copies, cfg, params));
}

FeedbackSignal corrupt_feedback(Feedback true_state, const ErrorModelParams& params, sim::RngStream& rng) {
  FeedbackSignal sig{true_state, true_state};
  switch (true_state) {
    case Feedback::kNack:
      if (rng.bernoulli(params.p_na)) sig.observed_state = Feedback::kAck;
      break;
    case Feedback::kAck:
      if (rng.bernoulli(params.p_an)) sig.observed_state = Feedback::kNack;
      break;
    case Feedback::kDtx:
      if (rng.bernoulli(params.p_da)) sig.observed_state = Feedback::kAck;
      break;
  }
  return sig;
}

}  // namespace recovery::link
