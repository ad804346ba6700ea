#include "recovery/traffic.hpp"

#include <cmath>
#include <string>

#include "recovery/errors.hpp"

namespace recovery::traffic {

void FtpConfig::validate() const {
  if (file_bytes == 0) throw ConfigError("traffic.file_bytes must be > 0");
  if (!(lambda_per_s > 0.0)) throw ConfigError("traffic.lambda_per_s must be > 0");
  if (n_users < 1) throw ConfigError("traffic.n_users must be >= 1");
}

sim::SimTime next_arrival(sim::RngStream& rng, const FtpConfig& cfg) {
  return sim::SimTime::from_seconds(rng.exponential(cfg.lambda_per_s));
}

double on_file_complete(const FileTransfer& ft) {
  if (!ft.last_byte_delivered) throw ModelError("file " + std::to_string(ft.id) + " is not complete");
  const auto duration = *ft.last_byte_delivered - ft.arrival_time;
  if (duration.us() <= 0) throw ModelError("file " + std::to_string(ft.id) + " completed in zero time");
  return static_cast<double>(ft.bytes) * 8.0 / duration.seconds();
}

FtpSource::FtpSource(sim::Simulator& sim, const FtpConfig& cfg, std::uint64_t master_seed, int user,
                     ArrivalSink sink)
    : sim_(&sim),
      cfg_(cfg),
      rng_(master_seed, "traffic/" + std::to_string(user)),
      user_(user),
      sink_(std::move(sink)) {
  cfg_.validate();
}

void FtpSource::start() {
  sim_->schedule_in(next_arrival(rng_, cfg_), sim::EventKind::kTrafficArrival, [this] { arrive(); });
}

void FtpSource::arrive() {
  FileTransfer ft;
  ft.id = files_.size();
  ft.user = user_;
  ft.arrival_time = sim_->now();
  ft.stream_begin = stream_tail_;
  ft.bytes = cfg_.file_bytes;
  stream_tail_ += cfg_.file_bytes;
  files_.push_back(ft);
  sim_->schedule_in(next_arrival(rng_, cfg_), sim::EventKind::kTrafficArrival, [this] { arrive(); });
  if (sink_) sink_(files_.back());
}

void FtpSource::on_first_send(std::uint64_t seq, std::uint32_t len) {
  while (next_unsent_ < files_.size() && files_[next_unsent_].stream_begin < seq + len) {
    files_[next_unsent_].first_byte_sent = sim_->now();
    ++next_unsent_;
  }
}

void FtpSource::on_delivered(std::uint64_t stream_offset) {
  while (next_undelivered_ < files_.size() && files_[next_undelivered_].stream_end() <= stream_offset) {
    files_[next_undelivered_].last_byte_delivered = sim_->now();
    ++next_undelivered_;
  }
}

}  // namespace recovery::traffic
