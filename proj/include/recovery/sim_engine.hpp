#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace recovery::sim {

/// Simulation clock value in integer microseconds since the start of a run.
class SimTime {
 public:
  constexpr SimTime() = default;

  static constexpr SimTime from_us(std::int64_t us) { return SimTime(us); }
  static constexpr SimTime from_ms(double ms) { return SimTime(static_cast<std::int64_t>(ms * 1e3 + (ms >= 0 ? 0.5 : -0.5))); }
  static constexpr SimTime from_seconds(double s) { return SimTime(static_cast<std::int64_t>(s * 1e6 + (s >= 0 ? 0.5 : -0.5))); }

  constexpr std::int64_t us() const { return us_; }
  constexpr double seconds() const { return static_cast<double>(us_) * 1e-6; }
  constexpr double ms() const { return static_cast<double>(us_) * 1e-3; }

  constexpr SimTime operator+(SimTime o) const { return SimTime(us_ + o.us_); }
  constexpr SimTime operator-(SimTime o) const { return SimTime(us_ - o.us_); }
  constexpr SimTime operator*(std::int64_t k) const { return SimTime(us_ * k); }
  constexpr SimTime& operator+=(SimTime o) {
    us_ += o.us_;
    return *this;
  }
  constexpr auto operator<=>(const SimTime&) const = default;

 private:
  constexpr explicit SimTime(std::int64_t us) : us_(us) {}
  std::int64_t us_ = 0;
};

enum class EventKind : std::uint8_t {
  kSlotTick,
  kTimerExpiry,
  kLayerHandoff,
  kTrafficArrival,
  kOther,
};

struct Event {
  SimTime fire_at;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::kOther;
  std::function<void()> action;
};

/// Single-threaded event loop. Events fire in (fire_at, seq) order, where seq is
/// the insertion counter, so ties resolve FIFO.
class Simulator {
 public:
  using TraceHook = std::function<void(const Event&)>;

  SimTime now() const { return now_; }

  /// Returns the event's seq. Throws ConfigError when `at` lies in the past.
  std::uint64_t schedule(SimTime at, EventKind kind, std::function<void()> action);
  std::uint64_t schedule_in(SimTime delay, EventKind kind, std::function<void()> action) {
    return schedule(now_ + delay, kind, std::move(action));
  }

  /// Executes every event with fire_at <= t_end, then leaves the clock at t_end.
  void run_until(SimTime t_end);

  std::size_t pending() const { return heap_.size(); }
  std::uint64_t executed() const { return executed_; }

  /// Called just before each event executes; used by ordering checks.
  void set_trace_hook(TraceHook hook) { trace_ = std::move(hook); }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
      return a.seq > b.seq;
    }
  };

  std::vector<Event> heap_;
  SimTime now_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t executed_ = 0;
  TraceHook trace_;
};

/// Restartable one-shot timer on top of Simulator. Stopping or restarting
/// invalidates any previously scheduled expiry.
class Timer {
 public:
  Timer(Simulator& sim, std::function<void()> on_expire)
      : sim_(&sim), on_expire_(std::move(on_expire)) {}

  Timer(const Timer&) = delete;
  Timer& operator=(const Timer&) = delete;

  void start(SimTime delay);
  void stop() {
    ++generation_;
    running_ = false;
  }
  bool running() const { return running_; }
  SimTime expiry() const { return expiry_; }

 private:
  Simulator* sim_;
  std::function<void()> on_expire_;
  std::uint64_t generation_ = 0;
  bool running_ = false;
  SimTime expiry_;
};

/// Deterministic pseudo-random stream keyed by (master seed, label). Distinct
/// labels give independent sequences; the same key always replays the same draws.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::string_view label);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Exponential variate with the given rate (mean 1/rate).
  double exponential(double rate);

  std::string_view label() const { return label_; }

 private:
  std::mt19937_64 engine_;
  std::string label_;
};

/// 64-bit FNV-1a, used to turn stream labels into seed material.
std::uint64_t fnv1a(std::string_view text);

}  // namespace recovery::sim
