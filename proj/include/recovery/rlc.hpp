#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "recovery/sim_engine.hpp"

namespace recovery::rlc {

/// Sequence numbers are kept unwrapped (64-bit count). The configured SN width
/// only sets the window size; wire encoding would be `sn & ((1 << sn_bits) - 1)`.
using Sn = std::uint64_t;

struct RlcAmConfig {
  int max_retx = 13;
  double t_poll_retransmit_ms = 25.0;
  double t_reassembly_ms = 50.0;
  int sn_bits = 18;
  int poll_pdu_every = 16;

  Sn window_size() const { return Sn{1} << (sn_bits - 1); }
  void validate() const;
};

struct RlcUmConfig {
  double t_reassembly_ms = 50.0;
  int sn_bits = 18;

  Sn window_size() const { return Sn{1} << (sn_bits - 1); }
  void validate() const;
};

enum class RlcMode : std::uint8_t { kAm, kUm };

/// Upper-layer packet. `context` is opaque to RLC and travels with the SDU.
struct Sdu {
  std::uint64_t id = 0;
  std::uint32_t bytes = 0;
  std::uint64_t context = 0;
};

struct Pdu {
  std::uint64_t pdu_id = 0;
  Sn sn = 0;
  std::uint32_t segment_offset = 0;
  std::uint32_t bytes = 0;
  bool is_last_segment = true;
  bool poll = false;
  bool is_retx = false;
  Sdu sdu;
  /// Lowest SN the transmitter still holds; everything below is either
  /// acknowledged or abandoned. Lets the receiver skip discarded SDUs.
  Sn tx_window_low = 0;
};

inline constexpr std::uint32_t kSegmentToEnd = 0xFFFFFFFFu;

/// Byte range [start, end) of an SDU; end == kSegmentToEnd means "to the last byte".
struct SegmentRange {
  std::uint32_t start = 0;
  std::uint32_t end = kSegmentToEnd;
  auto operator<=>(const SegmentRange&) const = default;
};

struct NackEntry {
  Sn sn = 0;
  std::optional<SegmentRange> range;  ///< empty: whole SDU missing
  bool operator==(const NackEntry&) const = default;
};

struct StatusPdu {
  Sn ack_sn = 0;
  std::vector<NackEntry> nacks;

  /// NACKs strictly ordered, no duplicates, all below ack_sn.
  bool well_formed() const;
};

/// Disjoint set of received byte ranges of one SDU.
class ByteRanges {
 public:
  /// Returns the number of bytes that were not already present.
  std::uint32_t add(std::uint32_t start, std::uint32_t end);
  bool covers(std::uint32_t start, std::uint32_t end) const;
  /// Holes in [0, limit).
  std::vector<SegmentRange> holes(std::uint32_t limit) const;
  std::uint32_t highest_end() const { return ranges_.empty() ? 0 : std::prev(ranges_.end())->second; }
  bool empty() const { return ranges_.empty(); }

 private:
  std::map<std::uint32_t, std::uint32_t> ranges_;  // start -> end
};

/// Receive-side reassembly and in-order delivery shared by AM and UM.
class ReassemblyWindow {
 public:
  explicit ReassemblyWindow(Sn window_size) : window_size_(window_size) {}

  enum class Insert : std::uint8_t { kStored, kDuplicate, kOutOfWindow };
  Insert insert(const Pdu& pdu);

  /// Delivers complete SDUs from rx_next upward and advances rx_next.
  std::vector<Sdu> deliver_in_order();

  /// Gives up on every incomplete SN below `sn`; returns how many SDUs were lost.
  std::uint64_t abandon_below(Sn sn, std::vector<Sdu>& delivered);

  bool complete(Sn sn) const;
  /// True if bytes of `sn` are missing before the last byte received so far.
  bool has_internal_hole(Sn sn) const;
  /// Missing pieces of SNs in [rx_next, limit), in order.
  std::vector<NackEntry> missing_below(Sn limit) const;
  /// First SN >= from that is not complete.
  Sn first_incomplete_from(Sn from) const;

  Sn rx_next() const { return rx_next_; }
  Sn rx_next_highest() const { return rx_next_highest_; }
  Sn window_size() const { return window_size_; }

 private:
  struct Record {
    ByteRanges got;
    std::optional<std::uint32_t> total;
    Sdu sdu;
  };
  bool record_complete(const Record& r) const;

  Sn window_size_;
  Sn rx_next_ = 0;
  Sn rx_next_highest_ = 0;
  std::map<Sn, Record> records_;
};

struct AmTxCounters {
  std::uint64_t new_pdus = 0;
  std::uint64_t retx_pdus = 0;
  std::uint64_t polls = 0;
  std::uint64_t poll_timer_expiries = 0;
  std::uint64_t statuses = 0;
  std::uint64_t malformed_statuses = 0;
  std::uint64_t discarded_sdus = 0;
  std::uint64_t local_losses = 0;
};

/// Acknowledged-mode transmitter: SN assignment, segmentation, retransmission
/// queue driven by status reports, polling with the poll-retransmit timer.
class AmTransmitter {
 public:
  AmTransmitter(sim::Simulator& sim, const RlcAmConfig& cfg);

  void submit(const Sdu& sdu);

  /// Builds PDUs for a transmission opportunity of `byte_budget` bytes.
  /// Retransmissions go first. New data stops when the window is full.
  std::vector<Pdu> build(std::int64_t byte_budget);

  void on_status(const StatusPdu& status);
  void on_poll_retransmit_timer();
  /// Lower layer reports these PDUs as lost (HARQ gave up).
  void on_local_loss(const Pdu& pdu);

  bool has_data() const;
  bool window_stalled() const;
  Sn tx_next() const { return tx_next_; }
  Sn tx_next_ack() const;
  std::size_t buffered_sdus() const { return new_sdus_.size(); }
  std::size_t unacked() const { return records_.size(); }
  int retx_count(Sn sn) const;
  bool poll_timer_running() const { return poll_timer_.running(); }
  const AmTxCounters& counters() const { return counters_; }
  const RlcAmConfig& config() const { return cfg_; }

  void set_discard_callback(std::function<void(const Sdu&)> cb) { on_discard_ = std::move(cb); }

 private:
  struct TxRecord {
    Sdu sdu;
    std::uint32_t sent_bytes = 0;  ///< high-water mark of the first transmission
    int retx_count = 0;
    int queued = 0;  ///< retransmission items waiting in retx_
  };
  struct RetxItem {
    Sn sn;
    std::uint32_t start;
    std::uint32_t end;
  };

  void queue_retx(Sn sn, std::vector<SegmentRange> ranges);
  void drop_queued(Sn sn);
  void send_poll(Pdu& pdu);

  sim::Simulator* sim_;
  RlcAmConfig cfg_;
  std::deque<Sdu> new_sdus_;
  std::uint32_t head_offset_ = 0;  ///< bytes of new_sdus_.front() already sent
  std::map<Sn, TxRecord> records_;
  std::deque<RetxItem> retx_;
  Sn tx_next_ = 0;
  Sn poll_sn_ = 0;
  int pdu_without_poll_ = 0;
  bool poll_pending_ = false;
  sim::Timer poll_timer_;
  std::uint64_t next_pdu_id_ = 0;
  AmTxCounters counters_;
  std::function<void(const Sdu&)> on_discard_;
};

struct RxCounters {
  std::uint64_t pdus = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t out_of_window = 0;
  std::uint64_t delivered_sdus = 0;
  std::uint64_t lost_sdus = 0;
  std::uint64_t statuses = 0;
  std::uint64_t timer_expiries = 0;
};

/// Acknowledged-mode receiver. Status reports go out only on reassembly-timer
/// expiry or when a PDU carries the poll bit.
class AmReceiver {
 public:
  AmReceiver(sim::Simulator& sim, const RlcAmConfig& cfg);

  std::vector<Sdu> on_pdu(const Pdu& pdu);
  StatusPdu on_reassembly_timer();

  void set_status_sink(std::function<void(const StatusPdu&)> sink) { send_status_ = std::move(sink); }
  void set_delivery_sink(std::function<void(const Sdu&)> sink) { deliver_ = std::move(sink); }

  bool reassembly_timer_running() const { return reassembly_timer_.running(); }
  Sn rx_next() const { return window_.rx_next(); }
  Sn rx_next_highest() const { return window_.rx_next_highest(); }
  Sn rx_highest_status() const { return rx_highest_status_; }
  const RxCounters& counters() const { return counters_; }

 private:
  StatusPdu build_status(Sn limit) const;
  void update_timer();
  void emit(const std::vector<Sdu>& sdus);

  RlcAmConfig cfg_;
  ReassemblyWindow window_;
  Sn rx_highest_status_ = 0;
  Sn status_trigger_ = 0;
  sim::Timer reassembly_timer_;
  RxCounters counters_;
  std::function<void(const StatusPdu&)> send_status_;
  std::function<void(const Sdu&)> deliver_;
};

/// Unacknowledged-mode transmitter: SN per SDU, segmentation, no recovery.
class UmTransmitter {
 public:
  explicit UmTransmitter(const RlcUmConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

  void submit(const Sdu& sdu) { queue_.push_back(sdu); }
  std::vector<Pdu> build(std::int64_t byte_budget);
  bool has_data() const { return !queue_.empty(); }
  std::uint64_t pdus() const { return next_pdu_id_; }

 private:
  RlcUmConfig cfg_;
  std::deque<Sdu> queue_;
  std::uint32_t head_offset_ = 0;
  Sn tx_next_ = 0;
  std::uint64_t next_pdu_id_ = 0;
};

/// Unacknowledged-mode receiver: reorders within the reassembly timer, then
/// abandons whatever is still missing.
class UmReceiver {
 public:
  UmReceiver(sim::Simulator& sim, const RlcUmConfig& cfg);

  std::vector<Sdu> on_pdu(const Pdu& pdu);
  std::vector<Sdu> on_reassembly_timer();

  void set_delivery_sink(std::function<void(const Sdu&)> sink) { deliver_ = std::move(sink); }
  bool reassembly_timer_running() const { return reassembly_timer_.running(); }
  Sn rx_next() const { return window_.rx_next(); }
  const RxCounters& counters() const { return counters_; }

 private:
  void update_timer();
  void emit(const std::vector<Sdu>& sdus);

  RlcUmConfig cfg_;
  ReassemblyWindow window_;
  Sn timer_trigger_ = 0;
  sim::Timer reassembly_timer_;
  RxCounters counters_;
  std::function<void(const Sdu&)> deliver_;
};

}  // namespace recovery::rlc
