#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "recovery/harq.hpp"
#include "recovery/link_model.hpp"
#include "recovery/metrics.hpp"
#include "recovery/rlc.hpp"
#include "recovery/tcp.hpp"
#include "recovery/traffic.hpp"

namespace recovery::stack {

/// Everything one end-to-end link run needs.
struct StackConfig {
  link::ErrorModelParams error;
  link::LinkConfig link;
  harq::HarqConfig harq;
  rlc::RlcMode rlc_mode = rlc::RlcMode::kAm;
  rlc::RlcAmConfig am;
  rlc::RlcUmConfig um;
  tcp::TcpConfig tcp;
  traffic::FtpConfig ftp;
  int ul_delay_slots = 4;
  /// Loss probability of RLC status reports on the uplink; negative means
  /// "same as the downlink analytic residual error".
  double status_loss_prob = -1.0;
  double sim_seconds = 60.0;
  double warmup_seconds = 4.0;
  bool keep_cwnd_trace = false;

  void validate() const;
  double effective_status_loss() const;
  /// Canonical one-line rendering of every parameter; equal configs give equal strings.
  std::string fingerprint() const;
};

struct CwndSample {
  sim::SimTime at;
  double cwnd_mss = 0.0;
  double ssthresh_mss = 0.0;
};

struct RunResult {
  metrics::RunMetrics metrics;
  std::vector<tcp::EpochRecord> cubic_epochs;  ///< user 0
  std::vector<CwndSample> cwnd_trace;          ///< user 0, only if requested
  std::uint64_t events = 0;
};

/// Runs every user's link instance for `sim_seconds` and collects metrics.
/// Bit-for-bit reproducible for a given (config, seed).
RunResult run_link(const StackConfig& cfg, std::uint64_t seed);

}  // namespace recovery::stack
