#include "recovery/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "recovery/errors.hpp"

namespace recovery::sim {

std::uint64_t Simulator::schedule(SimTime at, EventKind kind, std::function<void()> action) {
  if (at < now_) {
    throw ConfigError("event scheduled in the past: t=" + std::to_string(at.us()) +
                      "us, now=" + std::to_string(now_.us()) + "us");
  }
  const std::uint64_t seq = next_seq_++;
  heap_.push_back(Event{at, seq, kind, std::move(action)});
  std::push_heap(heap_.begin(), heap_.end(), Later{});
  return seq;
}

void Simulator::run_until(SimTime t_end) {
  while (!heap_.empty() && heap_.front().fire_at <= t_end) {
    std::pop_heap(heap_.begin(), heap_.end(), Later{});
    Event ev = std::move(heap_.back());
    heap_.pop_back();
    now_ = ev.fire_at;
    if (trace_) trace_(ev);
    ++executed_;
    ev.action();
  }
  if (t_end > now_) now_ = t_end;
}

void Timer::start(SimTime delay) {
  const std::uint64_t gen = ++generation_;
  running_ = true;
  expiry_ = sim_->now() + delay;
  sim_->schedule(expiry_, EventKind::kTimerExpiry, [this, gen] {
    if (gen != generation_ || !running_) return;
    running_ = false;
    on_expire_();
  });
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RngStream::RngStream(std::uint64_t master_seed, std::string_view label) : label_(label) {
  const std::uint64_t h = fnv1a(label);
  // seed_seq's mixing is fully specified by the standard, so streams replay
  // identically across toolchains.
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  engine_.seed(seq);
}

double RngStream::exponential(double rate) {
  if (!(rate > 0.0)) throw ConfigError("exponential rate must be positive");
  return -std::log1p(-uniform()) / rate;
}

}  // namespace recovery::sim
