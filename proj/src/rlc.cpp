#include "recovery/rlc.hpp"

#include <algorithm>
#include <iterator>

#include "recovery/errors.hpp"

namespace recovery::rlc {

void RlcAmConfig::validate() const {
  if (max_retx < 0) throw ConfigError("rlc.max_retx must be >= 0");
  if (!(t_poll_retransmit_ms > 0.0)) throw ConfigError("rlc.t_poll_retransmit_ms must be > 0");
  if (!(t_reassembly_ms > 0.0)) throw ConfigError("rlc.t_reassembly_ms must be > 0");
  if (sn_bits < 2 || sn_bits > 32) throw ConfigError("rlc.sn_bits must lie in [2,32]");
  if (poll_pdu_every < 1) throw ConfigError("rlc.poll_pdu_every must be >= 1");
}

void RlcUmConfig::validate() const {
  if (!(t_reassembly_ms > 0.0)) throw ConfigError("rlc.t_reassembly_ms must be > 0");
  if (sn_bits < 2 || sn_bits > 32) throw ConfigError("rlc.sn_bits must lie in [2,32]");
}

bool StatusPdu::well_formed() const {
  for (std::size_t i = 0; i < nacks.size(); ++i) {
    const auto& n = nacks[i];
    if (n.sn >= ack_sn) return false;
    if (n.range && n.range->start >= n.range->end) return false;
    if (i == 0) continue;
    const auto& prev = nacks[i - 1];
    if (prev.sn > n.sn) return false;
    if (prev.sn == n.sn) {
      // Several segment NACKs for one SN must be ordered and disjoint.
      if (!prev.range || !n.range || prev.range->end > n.range->start) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// ByteRanges

std::uint32_t ByteRanges::add(std::uint32_t start, std::uint32_t end) {
  if (start >= end) return 0;
  auto it = ranges_.upper_bound(start);
  if (it != ranges_.begin()) {
    auto p = std::prev(it);
    if (p->second >= start) it = p;
  }
  std::uint32_t covered = 0;
  std::uint32_t lo = start;
  std::uint32_t hi = end;
  while (it != ranges_.end() && it->first <= end) {
    const std::uint32_t ov_lo = std::max(start, it->first);
    const std::uint32_t ov_hi = std::min(end, it->second);
    if (ov_hi > ov_lo) covered += ov_hi - ov_lo;
    lo = std::min(lo, it->first);
    hi = std::max(hi, it->second);
    it = ranges_.erase(it);
  }
  ranges_.emplace(lo, hi);
  return (end - start) - covered;
}

bool ByteRanges::covers(std::uint32_t start, std::uint32_t end) const {
  if (start >= end) return true;
  auto it = ranges_.upper_bound(start);
  if (it == ranges_.begin()) return false;
  --it;
  return it->first <= start && it->second >= end;
}

std::vector<SegmentRange> ByteRanges::holes(std::uint32_t limit) const {
  std::vector<SegmentRange> out;
  std::uint32_t cursor = 0;
  for (const auto& [s, e] : ranges_) {
    if (cursor >= limit) break;
    if (s > cursor) out.push_back({cursor, std::min(s, limit)});
    cursor = std::max(cursor, e);
  }
  if (cursor < limit) out.push_back({cursor, limit});
  return out;
}

// ---------------------------------------------------------------------------
// ReassemblyWindow

ReassemblyWindow::Insert ReassemblyWindow::insert(const Pdu& pdu) {
  if (pdu.sn < rx_next_) return Insert::kDuplicate;  // already delivered or abandoned
  if (pdu.sn >= rx_next_ + window_size_) return Insert::kOutOfWindow;
  auto [it, fresh] = records_.try_emplace(pdu.sn);
  Record& r = it->second;
  if (fresh) r.sdu = pdu.sdu;
  const std::uint32_t added = r.got.add(pdu.segment_offset, pdu.segment_offset + pdu.bytes);
  if (pdu.is_last_segment) r.total = pdu.segment_offset + pdu.bytes;
  rx_next_highest_ = std::max(rx_next_highest_, pdu.sn + 1);
  return added == 0 && !fresh ? Insert::kDuplicate : Insert::kStored;
}

bool ReassemblyWindow::record_complete(const Record& r) const { return r.total && r.got.covers(0, *r.total); }

bool ReassemblyWindow::complete(Sn sn) const {
  if (sn < rx_next_) return true;
  auto it = records_.find(sn);
  return it != records_.end() && record_complete(it->second);
}

bool ReassemblyWindow::has_internal_hole(Sn sn) const {
  auto it = records_.find(sn);
  if (it == records_.end()) return false;
  const auto& got = it->second.got;
  return !got.holes(got.highest_end()).empty();
}

std::vector<Sdu> ReassemblyWindow::deliver_in_order() {
  std::vector<Sdu> out;
  for (auto it = records_.begin(); it != records_.end() && it->first == rx_next_ && record_complete(it->second);) {
    out.push_back(it->second.sdu);
    it = records_.erase(it);
    ++rx_next_;
  }
  return out;
}

std::uint64_t ReassemblyWindow::abandon_below(Sn sn, std::vector<Sdu>& delivered) {
  std::uint64_t lost = 0;
  while (rx_next_ < sn) {
    auto it = records_.find(rx_next_);
    if (it != records_.end() && record_complete(it->second)) {
      delivered.push_back(it->second.sdu);
    } else {
      ++lost;
    }
    if (it != records_.end()) records_.erase(it);
    ++rx_next_;
  }
  rx_next_highest_ = std::max(rx_next_highest_, rx_next_);
  auto more = deliver_in_order();
  delivered.insert(delivered.end(), more.begin(), more.end());
  return lost;
}

std::vector<NackEntry> ReassemblyWindow::missing_below(Sn limit) const {
  std::vector<NackEntry> out;
  auto it = records_.lower_bound(rx_next_);
  for (Sn sn = rx_next_; sn < limit; ++sn) {
    while (it != records_.end() && it->first < sn) ++it;
    if (it == records_.end() || it->first != sn) {
      out.push_back({sn, std::nullopt});
      continue;
    }
    const Record& r = it->second;
    if (record_complete(r)) continue;
    const std::uint32_t known = r.total ? *r.total : r.got.highest_end();
    for (const auto& h : r.got.holes(known)) out.push_back({sn, h});
    if (!r.total) out.push_back({sn, SegmentRange{known, kSegmentToEnd}});
  }
  return out;
}

Sn ReassemblyWindow::first_incomplete_from(Sn from) const {
  Sn s = std::max(from, rx_next_);
  while (complete(s)) ++s;
  return s;
}

// ---------------------------------------------------------------------------
// AmTransmitter

AmTransmitter::AmTransmitter(sim::Simulator& sim, const RlcAmConfig& cfg)
    : sim_(&sim), cfg_(cfg), poll_timer_(sim, [this] { on_poll_retransmit_timer(); }) {
  cfg_.validate();
}

void AmTransmitter::submit(const Sdu& sdu) {
  if (sdu.bytes == 0) throw ConfigError("empty RLC SDU");
  new_sdus_.push_back(sdu);
}

Sn AmTransmitter::tx_next_ack() const { return records_.empty() ? tx_next_ : records_.begin()->first; }

bool AmTransmitter::window_stalled() const { return tx_next_ - tx_next_ack() >= cfg_.window_size(); }

bool AmTransmitter::has_data() const {
  return !retx_.empty() || (!new_sdus_.empty() && (head_offset_ > 0 || !window_stalled()));
}

int AmTransmitter::retx_count(Sn sn) const {
  auto it = records_.find(sn);
  return it == records_.end() ? -1 : it->second.retx_count;
}

void AmTransmitter::send_poll(Pdu& pdu) {
  pdu.poll = true;
  pdu_without_poll_ = 0;
  poll_pending_ = false;
  poll_sn_ = tx_next_ == 0 ? 0 : tx_next_ - 1;
  ++counters_.polls;
  poll_timer_.start(sim::SimTime::from_ms(cfg_.t_poll_retransmit_ms));
}

std::vector<Pdu> AmTransmitter::build(std::int64_t byte_budget) {
  if (byte_budget <= 0) throw ConfigError("RLC byte budget must be > 0");
  std::vector<Pdu> out;
  std::int64_t left = byte_budget;

  while (left > 0) {
    if (!retx_.empty()) {
      RetxItem& item = retx_.front();
      auto rec = records_.find(item.sn);
      if (rec == records_.end()) {
        retx_.pop_front();
        continue;
      }
      const auto len = static_cast<std::uint32_t>(std::min<std::int64_t>(left, item.end - item.start));
      Pdu p;
      p.pdu_id = next_pdu_id_++;
      p.sn = item.sn;
      p.segment_offset = item.start;
      p.bytes = len;
      p.is_last_segment = item.start + len == rec->second.sdu.bytes;
      p.is_retx = true;
      p.sdu = rec->second.sdu;
      item.start += len;
      left -= len;
      if (item.start == item.end) {
        retx_.pop_front();
        --rec->second.queued;
      }
      ++counters_.retx_pdus;
      out.push_back(p);
      continue;
    }
    if (new_sdus_.empty()) break;
    if (head_offset_ == 0) {
      if (window_stalled()) break;
      records_.emplace(tx_next_, TxRecord{new_sdus_.front(), 0, 0, 0});
      ++tx_next_;
    }
    const Sn sn = tx_next_ - 1;
    const Sdu& sdu = new_sdus_.front();
    auto& rec = records_.at(sn);
    const auto len = static_cast<std::uint32_t>(std::min<std::int64_t>(left, sdu.bytes - head_offset_));
    Pdu p;
    p.pdu_id = next_pdu_id_++;
    p.sn = sn;
    p.segment_offset = head_offset_;
    p.bytes = len;
    p.is_last_segment = head_offset_ + len == sdu.bytes;
    p.sdu = sdu;
    head_offset_ += len;
    rec.sent_bytes = head_offset_;
    left -= len;
    if (p.is_last_segment) {
      new_sdus_.pop_front();
      head_offset_ = 0;
    }
    ++counters_.new_pdus;
    if (++pdu_without_poll_ >= cfg_.poll_pdu_every) send_poll(p);
    out.push_back(p);
  }

  if (!out.empty()) {
    Pdu& last = out.back();
    if (!last.poll && (poll_pending_ || (retx_.empty() && new_sdus_.empty()) || window_stalled())) send_poll(last);
    const Sn low = tx_next_ack();
    for (auto& p : out) p.tx_window_low = low;
  }
  return out;
}

void AmTransmitter::drop_queued(Sn sn) {
  std::erase_if(retx_, [sn](const RetxItem& r) { return r.sn == sn; });
  if (auto it = records_.find(sn); it != records_.end()) it->second.queued = 0;
}

void AmTransmitter::queue_retx(Sn sn, std::vector<SegmentRange> ranges) {
  auto& rec = records_.at(sn);
  for (const auto& r : ranges) {
    retx_.push_back({sn, r.start, r.end});
    ++rec.queued;
  }
}

namespace {

std::vector<SegmentRange> clip(std::vector<SegmentRange> ranges, std::uint32_t sent) {
  std::vector<SegmentRange> out;
  for (auto r : ranges) {
    r.end = std::min(r.end, sent);
    if (r.start < r.end) out.push_back(r);
  }
  return out;
}

}  // namespace

void AmTransmitter::on_status(const StatusPdu& status) {
  ++counters_.statuses;
  if (!status.well_formed() || status.ack_sn > tx_next_) {
    ++counters_.malformed_statuses;
    return;
  }
  bool poll_covered = status.ack_sn > poll_sn_;
  std::size_t ni = 0;
  const auto& nacks = status.nacks;

  for (auto it = records_.begin(); it != records_.end() && it->first < status.ack_sn;) {
    const Sn sn = it->first;
    auto& rec = it->second;
    while (ni < nacks.size() && nacks[ni].sn < sn) ++ni;  // NACKs for unknown SNs
    const bool in_progress = sn + 1 == tx_next_ && head_offset_ > 0;

    if (ni < nacks.size() && nacks[ni].sn == sn) {
      std::vector<SegmentRange> ranges;
      for (; ni < nacks.size() && nacks[ni].sn == sn; ++ni) {
        ranges.push_back(nacks[ni].range.value_or(SegmentRange{0, kSegmentToEnd}));
      }
      if (sn == poll_sn_) poll_covered = true;
      ranges = clip(std::move(ranges), rec.sent_bytes);
      if (ranges.empty() || rec.queued > 0) {
        ++it;
        continue;
      }
      if (++rec.retx_count > cfg_.max_retx) {
        ++counters_.discarded_sdus;
        if (on_discard_) on_discard_(rec.sdu);
        drop_queued(sn);
        if (in_progress) {
          new_sdus_.pop_front();
          head_offset_ = 0;
        }
        it = records_.erase(it);
        continue;
      }
      queue_retx(sn, std::move(ranges));
      ++it;
      continue;
    }
    if (in_progress) {
      ++it;
      continue;
    }
    if (rec.queued > 0) drop_queued(sn);
    it = records_.erase(it);
  }

  if (poll_timer_.running() && poll_covered) poll_timer_.stop();
}

void AmTransmitter::on_local_loss(const Pdu& pdu) {
  ++counters_.local_losses;
  auto it = records_.find(pdu.sn);
  if (it == records_.end()) return;
  auto& rec = it->second;
  const SegmentRange range{pdu.segment_offset, pdu.segment_offset + pdu.bytes};
  if (rec.queued > 0) {
    queue_retx(pdu.sn, {range});
    return;
  }
  if (++rec.retx_count > cfg_.max_retx) {
    ++counters_.discarded_sdus;
    if (on_discard_) on_discard_(rec.sdu);
    if (pdu.sn + 1 == tx_next_ && head_offset_ > 0) {
      new_sdus_.pop_front();
      head_offset_ = 0;
    }
    records_.erase(it);
    return;
  }
  queue_retx(pdu.sn, {range});
}

void AmTransmitter::on_poll_retransmit_timer() {
  poll_timer_.stop();
  ++counters_.poll_timer_expiries;
  if (records_.empty()) return;
  if ((retx_.empty() && new_sdus_.empty()) || window_stalled()) {
    auto it = std::prev(records_.end());
    auto& rec = it->second;
    if (rec.queued == 0 && rec.sent_bytes > 0) {
      if (++rec.retx_count > cfg_.max_retx) {
        ++counters_.discarded_sdus;
        if (on_discard_) on_discard_(rec.sdu);
        records_.erase(it);
      } else {
        queue_retx(it->first, {SegmentRange{0, rec.sent_bytes}});
      }
    }
  }
  poll_pending_ = true;
}

// ---------------------------------------------------------------------------
// AmReceiver

AmReceiver::AmReceiver(sim::Simulator& sim, const RlcAmConfig& cfg)
    : cfg_(cfg), window_(cfg.window_size()), reassembly_timer_(sim, [this] { on_reassembly_timer(); }) {
  cfg_.validate();
}

void AmReceiver::emit(const std::vector<Sdu>& sdus) {
  counters_.delivered_sdus += sdus.size();
  if (deliver_) {
    for (const auto& s : sdus) deliver_(s);
  }
}

StatusPdu AmReceiver::build_status(Sn limit) const { return StatusPdu{limit, window_.missing_below(limit)}; }

void AmReceiver::update_timer() {
  const Sn next = window_.rx_next();
  if (reassembly_timer_.running()) {
    const bool filled = status_trigger_ <= next || (status_trigger_ == next + 1 && !window_.has_internal_hole(next));
    if (filled) reassembly_timer_.stop();
  }
  if (!reassembly_timer_.running()) {
    const Sn highest = window_.rx_next_highest();
    if (highest > next + 1 || (highest == next + 1 && window_.has_internal_hole(next))) {
      status_trigger_ = highest;
      reassembly_timer_.start(sim::SimTime::from_ms(cfg_.t_reassembly_ms));
    }
  }
}

std::vector<Sdu> AmReceiver::on_pdu(const Pdu& pdu) {
  ++counters_.pdus;
  std::vector<Sdu> delivered;
  if (pdu.tx_window_low > window_.rx_next()) {
    counters_.lost_sdus += window_.abandon_below(pdu.tx_window_low, delivered);
  }
  switch (window_.insert(pdu)) {
    case ReassemblyWindow::Insert::kStored: {
      auto more = window_.deliver_in_order();
      delivered.insert(delivered.end(), more.begin(), more.end());
      break;
    }
    case ReassemblyWindow::Insert::kDuplicate:
      ++counters_.duplicates;
      break;
    case ReassemblyWindow::Insert::kOutOfWindow:
      ++counters_.out_of_window;
      break;
  }
  rx_highest_status_ = std::max(rx_highest_status_, window_.rx_next());
  if (rx_highest_status_ < window_.rx_next_highest() && window_.complete(rx_highest_status_)) {
    rx_highest_status_ = window_.first_incomplete_from(rx_highest_status_);
  }
  update_timer();
  if (pdu.poll) {
    ++counters_.statuses;
    const auto status = build_status(rx_highest_status_);
    if (send_status_) send_status_(status);
  }
  emit(delivered);
  return delivered;
}

StatusPdu AmReceiver::on_reassembly_timer() {
  reassembly_timer_.stop();
  ++counters_.timer_expiries;
  ++counters_.statuses;
  rx_highest_status_ = std::max(rx_highest_status_, window_.rx_next_highest());
  auto status = build_status(rx_highest_status_);
  if (send_status_) send_status_(status);
  return status;
}

// ---------------------------------------------------------------------------
// Unacknowledged mode

std::vector<Pdu> UmTransmitter::build(std::int64_t byte_budget) {
  if (byte_budget <= 0) throw ConfigError("RLC byte budget must be > 0");
  std::vector<Pdu> out;
  std::int64_t left = byte_budget;
  while (left > 0 && !queue_.empty()) {
    const Sdu& sdu = queue_.front();
    if (head_offset_ == 0) ++tx_next_;
    const auto len = static_cast<std::uint32_t>(std::min<std::int64_t>(left, sdu.bytes - head_offset_));
    Pdu p;
    p.pdu_id = next_pdu_id_++;
    p.sn = tx_next_ - 1;
    p.segment_offset = head_offset_;
    p.bytes = len;
    p.is_last_segment = head_offset_ + len == sdu.bytes;
    p.sdu = sdu;
    head_offset_ += len;
    left -= len;
    if (p.is_last_segment) {
      queue_.pop_front();
      head_offset_ = 0;
    }
    out.push_back(p);
  }
  return out;
}

UmReceiver::UmReceiver(sim::Simulator& sim, const RlcUmConfig& cfg)
    : cfg_(cfg), window_(cfg.window_size()), reassembly_timer_(sim, [this] { on_reassembly_timer(); }) {
  cfg_.validate();
}

void UmReceiver::emit(const std::vector<Sdu>& sdus) {
  counters_.delivered_sdus += sdus.size();
  if (deliver_) {
    for (const auto& s : sdus) deliver_(s);
  }
}

void UmReceiver::update_timer() {
  const Sn next = window_.rx_next();
  if (reassembly_timer_.running()) {
    const bool filled = timer_trigger_ <= next || (timer_trigger_ == next + 1 && !window_.has_internal_hole(next));
    if (filled) reassembly_timer_.stop();
  }
  if (!reassembly_timer_.running()) {
    const Sn highest = window_.rx_next_highest();
    if (highest > next + 1 || (highest == next + 1 && window_.has_internal_hole(next))) {
      timer_trigger_ = highest;
      reassembly_timer_.start(sim::SimTime::from_ms(cfg_.t_reassembly_ms));
    }
  }
}

std::vector<Sdu> UmReceiver::on_pdu(const Pdu& pdu) {
  ++counters_.pdus;
  std::vector<Sdu> delivered;
  switch (window_.insert(pdu)) {
    case ReassemblyWindow::Insert::kStored:
      delivered = window_.deliver_in_order();
      break;
    case ReassemblyWindow::Insert::kDuplicate:
      ++counters_.duplicates;
      break;
    case ReassemblyWindow::Insert::kOutOfWindow:
      ++counters_.out_of_window;
      break;
  }
  update_timer();
  emit(delivered);
  return delivered;
}

std::vector<Sdu> UmReceiver::on_reassembly_timer() {
  reassembly_timer_.stop();
  ++counters_.timer_expiries;
  std::vector<Sdu> delivered;
  const Sn resume = window_.first_incomplete_from(timer_trigger_);
  // Everything below the trigger that is still incomplete is gone for good.
  counters_.lost_sdus += window_.abandon_below(resume, delivered);
  update_timer();
  emit(delivered);
  return delivered;
}

}  // namespace recovery::rlc
