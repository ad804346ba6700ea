#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "recovery/sim_engine.hpp"

namespace recovery::traffic {

/// FTP Model 3: fixed-size files with Poisson arrivals.
struct FtpConfig {
  std::uint64_t file_bytes = 35'000'000;
  double lambda_per_s = 0.25;
  int n_users = 1;

  double offered_load_bps() const { return static_cast<double>(file_bytes) * 8.0 * lambda_per_s; }
  void validate() const;
};

struct FileTransfer {
  std::uint64_t id = 0;
  int user = 0;
  sim::SimTime arrival_time;
  std::optional<sim::SimTime> first_byte_sent;
  std::optional<sim::SimTime> last_byte_delivered;
  std::uint64_t stream_begin = 0;  ///< offset of the first byte in the connection's stream
  std::uint64_t bytes = 0;

  std::uint64_t stream_end() const { return stream_begin + bytes; }
};

/// Exponential inter-arrival gap with mean 1/lambda, rounded to the microsecond.
sim::SimTime next_arrival(sim::RngStream& rng, const FtpConfig& cfg);

/// Application throughput of one completed file, bits per second.
/// Throws ModelError if the file is incomplete or took zero time.
double on_file_complete(const FileTransfer& ft);

/// Generates file arrivals for one user and tracks each file's progress along
/// the connection's byte stream. Files are served FIFO.
class FtpSource {
 public:
  using ArrivalSink = std::function<void(const FileTransfer&)>;

  FtpSource(sim::Simulator& sim, const FtpConfig& cfg, std::uint64_t master_seed, int user, ArrivalSink sink);

  /// Schedules the first arrival; later arrivals chain themselves.
  void start();

  /// The sender put stream bytes [seq, seq+len) on the wire for the first time.
  void on_first_send(std::uint64_t seq, std::uint32_t len);
  /// The receiver application now holds every stream byte below `stream_offset`.
  void on_delivered(std::uint64_t stream_offset);

  const std::vector<FileTransfer>& files() const { return files_; }

 private:
  void arrive();

  sim::Simulator* sim_;
  FtpConfig cfg_;
  sim::RngStream rng_;
  int user_;
  ArrivalSink sink_;
  std::vector<FileTransfer> files_;
  std::uint64_t stream_tail_ = 0;
  std::size_t next_unsent_ = 0;
  std::size_t next_undelivered_ = 0;
};

}  // namespace recovery::traffic
