#include "recovery/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "recovery/errors.hpp"

namespace recovery::scenario {

namespace {

const std::map<std::string, Experiment>& experiment_names() {
  static const std::map<std::string, Experiment> names{
      {"HARQ_VS_L1ARQ", Experiment::kHarqVsL1Arq},
      {"RESIDUAL_SWEEP", Experiment::kResidualSweep},
      {"DELAY_SWEEP", Experiment::kDelaySweep},
      {"DEGRADATION_GRID", Experiment::kDegradationGrid},
      {"SINGLE_RUN", Experiment::kSingleRun},
  };
  return names;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

double to_double(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, v));
  }
  return out;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) {
    throw ConfigError(fmt::format("{}: '{}' is not an integer", key, v));
  }
  return out;
}

int to_int32(const std::string& key, const std::string& v) {
  const auto x = to_int(key, v);
  if (x < INT32_MIN || x > INT32_MAX) throw ConfigError(fmt::format("{}: '{}' out of range", key, v));
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  const std::string t = upper(trim(v));
  if (t == "TRUE" || t == "1" || t == "YES" || t == "ON") return true;
  if (t == "FALSE" || t == "0" || t == "NO" || t == "OFF") return false;
  throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, v));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split_list(v)) out.push_back(to_double(key, item));
  if (out.empty()) throw ConfigError(fmt::format("{}: empty list", key));
  return out;
}

tcp::Variant to_variant(const std::string& key, const std::string& v) {
  const std::string t = upper(trim(v));
  if (t == "RENO") return tcp::Variant::kReno;
  if (t == "CUBIC") return tcp::Variant::kCubic;
  throw ConfigError(fmt::format("{}: unknown TCP variant '{}'", key, v));
}

rlc::RlcMode to_mode(const std::string& key, const std::string& v) {
  const std::string t = upper(trim(v));
  if (t == "AM") return rlc::RlcMode::kAm;
  if (t == "UM") return rlc::RlcMode::kUm;
  throw ConfigError(fmt::format("{}: unknown RLC mode '{}'", key, v));
}

std::string name(tcp::Variant v) { return v == tcp::Variant::kReno ? "RENO" : "CUBIC"; }
std::string name(rlc::RlcMode m) { return m == rlc::RlcMode::kAm ? "AM" : "UM"; }

std::string num(double v) { return fmt::format("{}", v); }

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) out += ",";
    if constexpr (std::is_same_v<T, double>) {
      out += num(xs[i]);
    } else {
      out += name(xs[i]);
    }
  }
  return out;
}

struct Setting {
  std::string key;
  std::function<void(Scenario&, const std::string&)> set;
  std::function<std::string(const Scenario&)> get;
};

#define REAL(KEY, FIELD)                                                                \
  Setting {                                                                             \
    KEY, [](Scenario& s, const std::string& v) { s.FIELD = to_double(KEY, v); },       \
        [](const Scenario& s) { return num(s.FIELD); }                                  \
  }
#define INT(KEY, FIELD)                                                                 \
  Setting {                                                                             \
    KEY, [](Scenario& s, const std::string& v) { s.FIELD = to_int32(KEY, v); },        \
        [](const Scenario& s) { return std::to_string(s.FIELD); }                       \
  }
#define BOOL(KEY, FIELD)                                                                \
  Setting {                                                                             \
    KEY, [](Scenario& s, const std::string& v) { s.FIELD = to_bool(KEY, v); },         \
        [](const Scenario& s) { return std::string(s.FIELD ? "true" : "false"); }       \
  }
#define REALS(KEY, FIELD)                                                               \
  Setting {                                                                             \
    KEY, [](Scenario& s, const std::string& v) { s.FIELD = to_doubles(KEY, v); },      \
        [](const Scenario& s) { return join(s.FIELD); }                                 \
  }

const std::vector<Setting>& settings() {
  static const std::vector<Setting> table{
      Setting{"scenario.experiment",
              [](Scenario& s, const std::string& v) { s.experiment = parse_experiment(v); },
              [](const Scenario& s) { return to_string(s.experiment); }},
      INT("scenario.seeds", seeds),
      Setting{"scenario.seed_base",
              [](Scenario& s, const std::string& v) {
                const auto x = to_int("scenario.seed_base", v);
                if (x < 0) throw ConfigError("scenario.seed_base must be non-negative");
                s.seed_base = static_cast<std::uint64_t>(x);
              },
              [](const Scenario& s) { return std::to_string(s.seed_base); }},
      INT("scenario.workers", workers),
      REAL("scenario.sim_seconds", base.sim_seconds),
      REAL("scenario.warmup_seconds", base.warmup_seconds),
      BOOL("scenario.keep_cwnd_trace", base.keep_cwnd_trace),

      REAL("error.p_ch", base.error.p_ch),
      REAL("error.p_e", base.error.p_e),
      REAL("error.p_na", base.error.p_na),
      REAL("error.p_da", base.error.p_da),
      REAL("error.p_an", base.error.p_an),

      Setting{"link.slot_us", [](Scenario& s, const std::string& v) { s.base.link.slot_us = to_int("link.slot_us", v); },
              [](const Scenario& s) { return std::to_string(s.base.link.slot_us); }},
      Setting{"link.tb_bits", [](Scenario& s, const std::string& v) { s.base.link.tb_bits = to_int("link.tb_bits", v); },
              [](const Scenario& s) { return std::to_string(s.base.link.tb_bits); }},
      REAL("link.combining_gain", base.link.combining_gain),

      INT("harq.n_processes", base.harq.n_processes),
      Setting{"harq.max_retx",
              [](Scenario& s, const std::string& v) {
                s.base.harq.max_retx = to_int32("harq.max_retx", v);
                s.base.error.n_max = s.base.harq.max_retx;
              },
              [](const Scenario& s) { return std::to_string(s.base.harq.max_retx); }},
      Setting{"harq.mode",
              [](Scenario& s, const std::string& v) {
                const std::string t = upper(trim(v));
                if (t == "HARQ") {
                  s.base.harq.mode = harq::HarqMode::kCombining;
                } else if (t == "L1_ARQ" || t == "L1ARQ") {
                  s.base.harq.mode = harq::HarqMode::kL1Arq;
                } else {
                  throw ConfigError(fmt::format("harq.mode: unknown mode '{}'", v));
                }
              },
              [](const Scenario& s) {
                return std::string(s.base.harq.mode == harq::HarqMode::kCombining ? "HARQ" : "L1_ARQ");
              }},
      INT("harq.feedback_delay_slots", base.harq.feedback_delay_slots),

      Setting{"rlc.mode", [](Scenario& s, const std::string& v) { s.base.rlc_mode = to_mode("rlc.mode", v); },
              [](const Scenario& s) { return name(s.base.rlc_mode); }},
      INT("rlc.max_retx", base.am.max_retx),
      REAL("rlc.t_poll_retransmit_ms", base.am.t_poll_retransmit_ms),
      Setting{"rlc.t_reassembly_ms",
              [](Scenario& s, const std::string& v) {
                s.base.am.t_reassembly_ms = to_double("rlc.t_reassembly_ms", v);
                s.base.um.t_reassembly_ms = s.base.am.t_reassembly_ms;
              },
              [](const Scenario& s) { return num(s.base.am.t_reassembly_ms); }},
      Setting{"rlc.sn_bits",
              [](Scenario& s, const std::string& v) {
                s.base.am.sn_bits = to_int32("rlc.sn_bits", v);
                s.base.um.sn_bits = s.base.am.sn_bits;
              },
              [](const Scenario& s) { return std::to_string(s.base.am.sn_bits); }},
      INT("rlc.poll_pdu_every", base.am.poll_pdu_every),

      Setting{"tcp.variant", [](Scenario& s, const std::string& v) { s.base.tcp.variant = to_variant("tcp.variant", v); },
              [](const Scenario& s) { return name(s.base.tcp.variant); }},
      Setting{"tcp.mss_bytes",
              [](Scenario& s, const std::string& v) {
                const auto x = to_int("tcp.mss_bytes", v);
                if (x <= 0 || x > 65535) throw ConfigError("tcp.mss_bytes out of range");
                s.base.tcp.mss_bytes = static_cast<std::uint32_t>(x);
              },
              [](const Scenario& s) { return std::to_string(s.base.tcp.mss_bytes); }},
      REAL("tcp.init_cwnd_mss", base.tcp.init_cwnd_mss),
      REAL("tcp.ssthresh_init_mss", base.tcp.ssthresh_init_mss),
      REAL("tcp.cubic_beta", base.tcp.cubic_beta),
      REAL("tcp.cubic_c", base.tcp.cubic_c),
      REAL("tcp.network_delay_ms", base.tcp.network_delay_ms),
      BOOL("tcp.delay_is_round_trip", base.tcp.delay_is_round_trip),
      REAL("tcp.rto_min_ms", base.tcp.rto_min_ms),
      REAL("tcp.rto_initial_ms", base.tcp.rto_initial_ms),
      REAL("tcp.rto_max_ms", base.tcp.rto_max_ms),
      INT("tcp.dupack_threshold", base.tcp.dupack_threshold),
      BOOL("tcp.idle_restart", base.tcp.idle_restart),

      Setting{"traffic.file_bytes",
              [](Scenario& s, const std::string& v) {
                const auto x = to_int("traffic.file_bytes", v);
                if (x <= 0) throw ConfigError("traffic.file_bytes must be positive");
                s.base.ftp.file_bytes = static_cast<std::uint64_t>(x);
              },
              [](const Scenario& s) { return std::to_string(s.base.ftp.file_bytes); }},
      REAL("traffic.lambda_per_s", base.ftp.lambda_per_s),
      INT("traffic.n_users", base.ftp.n_users),

      INT("uplink.delay_slots", base.ul_delay_slots),
      REAL("uplink.status_loss_prob", base.status_loss_prob),

      REALS("sweep.residual_targets", sweep.residual_targets),
      REAL("sweep.residual_p_da", sweep.residual_p_da),
      Setting{"sweep.tcp_variants",
              [](Scenario& s, const std::string& v) {
                s.sweep.tcp_variants.clear();
                for (const auto& x : split_list(v)) s.sweep.tcp_variants.push_back(to_variant("sweep.tcp_variants", x));
              },
              [](const Scenario& s) { return join(s.sweep.tcp_variants); }},
      Setting{"sweep.rlc_modes",
              [](Scenario& s, const std::string& v) {
                s.sweep.rlc_modes.clear();
                for (const auto& x : split_list(v)) s.sweep.rlc_modes.push_back(to_mode("sweep.rlc_modes", x));
              },
              [](const Scenario& s) { return join(s.sweep.rlc_modes); }},
      REALS("sweep.delays_ms", sweep.delays_ms),
      REALS("sweep.delay_residuals", sweep.delay_residuals),
      REALS("sweep.harq_p_e", sweep.harq_p_e),
      REAL("sweep.grid_min", sweep.grid_min),
      REAL("sweep.grid_max", sweep.grid_max),
      INT("sweep.grid_size", sweep.grid_size),
      REAL("sweep.grid_level_pct", sweep.grid_level_pct),

      Setting{"analytics.give_up_exponent",
              [](Scenario& s, const std::string& v) {
                const std::string t = upper(trim(v));
                if (t == "RETRANSMISSIONS") {
                  s.give_up_exponent = analytics::GiveUpExponent::kRetransmissions;
                } else if (t == "TRANSMISSIONS") {
                  s.give_up_exponent = analytics::GiveUpExponent::kTotalTransmissions;
                } else {
                  throw ConfigError(fmt::format("analytics.give_up_exponent: unknown value '{}'", v));
                }
              },
              [](const Scenario& s) {
                return std::string(s.give_up_exponent == analytics::GiveUpExponent::kRetransmissions ? "retransmissions"
                                                                                                     : "transmissions");
              }},
  };
  return table;
}

#undef REAL
#undef INT
#undef BOOL
#undef REALS

}  // namespace

std::string to_string(Experiment e) {
  for (const auto& [n, v] : experiment_names()) {
    if (v == e) return n;
  }
  return "UNKNOWN";
}

Experiment parse_experiment(const std::string& name) {
  const auto it = experiment_names().find(upper(trim(name)));
  if (it == experiment_names().end()) {
    std::string known;
    for (const auto& [n, v] : experiment_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError(fmt::format("unknown experiment '{}' (expected one of {})", name, known));
  }
  return it->second;
}

void Scenario::validate() const {
  if (seeds < 1) throw ConfigError("scenario.seeds must be at least 1");
  if (workers < 0) throw ConfigError("scenario.workers must be non-negative");
  base.validate();
  if (sweep.grid_size < 2) throw ConfigError("sweep.grid_size must be at least 2");
  if (!(sweep.grid_min > 0.0) || !(sweep.grid_max > sweep.grid_min) || sweep.grid_max > 1.0) {
    throw ConfigError("sweep grid range must satisfy 0 < grid_min < grid_max <= 1");
  }
  if (sweep.tcp_variants.empty() || sweep.rlc_modes.empty()) throw ConfigError("sweep lists must not be empty");
  for (double p : sweep.harq_p_e) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("sweep.harq_p_e values must lie in [0,1]");
  }
  for (double d : sweep.delays_ms) {
    if (!(d >= 0.0)) throw ConfigError("sweep.delays_ms values must be non-negative");
  }
  if (!(sweep.residual_p_da >= 0.0 && sweep.residual_p_da <= 1.0)) throw ConfigError("sweep.residual_p_da out of range");
}

Scenario default_scenario() {
  Scenario s;
  s.base.error.p_ch = 0.01;
  s.base.error.p_e = 0.1;
  s.base.error.n_max = s.base.harq.max_retx;
  return s;
}

void apply_setting(Scenario& s, const std::string& key, const std::string& value) {
  const std::string k = trim(key);
  for (const auto& setting : settings()) {
    if (setting.key == k) {
      setting.set(s, value);
      return;
    }
  }
  throw ConfigError(fmt::format("unknown setting '{}'", key));
}

Scenario load_scenario(const std::filesystem::path& file) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(file.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(fmt::format("cannot read scenario '{}': {}", file.string(), e.message()));
  }
  Scenario s = default_scenario();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(fmt::format("setting '{}' must live inside a section", section));
    }
    for (const auto& [key, leaf] : body) apply_setting(s, section + "." + key, leaf.data());
  }
  return s;
}

std::pair<std::string, std::string> split_override(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError(fmt::format("override '{}' is not key=value", kv));
  return {trim(kv.substr(0, eq)), trim(kv.substr(eq + 1))};
}

std::string resolved_config(const Scenario& s) {
  std::ostringstream os;
  std::string section;
  for (const auto& setting : settings()) {
    const auto dot = setting.key.find('.');
    const std::string sec = setting.key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) os << '\n';
      os << '[' << sec << "]\n";
      section = sec;
    }
    os << setting.key.substr(dot + 1) << " = " << setting.get(s) << '\n';
  }
  return os.str();
}

Plan plan(const Scenario& s) {
  s.validate();
  Plan out;
  const auto& sw = s.sweep;
  const auto with_target = [&](stack::StackConfig c, double target, const std::string& series) -> std::optional<stack::StackConfig> {
    const auto p_na = analytics::p_na_for_target(target, c.error.p_ch, c.error.p_e, sw.residual_p_da);
    if (!p_na) {
      out.skipped.push_back({series, target,
                             fmt::format("needs P_na outside [0,1] with P_ch={}, P_e={}, P_da={}", c.error.p_ch,
                                         c.error.p_e, sw.residual_p_da)});
      return std::nullopt;
    }
    c.error.p_na = *p_na;
    c.error.p_da = sw.residual_p_da;
    return c;
  };

  switch (s.experiment) {
    case Experiment::kSingleRun:
      out.points.push_back({"single", "none", 0.0, s.base});
      break;

    case Experiment::kResidualSweep:
      for (auto variant : sw.tcp_variants) {
        for (auto mode : sw.rlc_modes) {
          const std::string series = name(variant) + "-" + name(mode);
          for (double target : sw.residual_targets) {
            stack::StackConfig c = s.base;
            c.tcp.variant = variant;
            c.rlc_mode = mode;
            if (auto t = with_target(c, target, series)) out.points.push_back({series, "p_re_target", target, *t});
          }
        }
      }
      break;

    case Experiment::kDelaySweep:
      for (auto mode : sw.rlc_modes) {
        for (double target : sw.delay_residuals) {
          const std::string series = fmt::format("CUBIC-{}-{}", name(mode), num(target));
          for (double delay : sw.delays_ms) {
            stack::StackConfig c = s.base;
            c.tcp.variant = tcp::Variant::kCubic;
            c.rlc_mode = mode;
            c.tcp.network_delay_ms = delay;
            if (auto t = with_target(c, target, series)) out.points.push_back({series, "network_delay_ms", delay, *t});
          }
        }
      }
      break;

    case Experiment::kHarqVsL1Arq:
      for (double p_e : sw.harq_p_e) {
        for (auto mode : {harq::HarqMode::kCombining, harq::HarqMode::kL1Arq}) {
          stack::StackConfig c = s.base;
          c.error.p_e = p_e;
          c.harq.mode = mode;
          out.points.push_back({mode == harq::HarqMode::kCombining ? "HARQ" : "L1_ARQ", "p_e", p_e, c});
        }
      }
      break;

    case Experiment::kDegradationGrid: {
      stack::StackConfig c = s.base;
      c.rlc_mode = rlc::RlcMode::kUm;
      c.error.p_na = 0.0;
      c.error.p_da = 0.0;
      out.points.push_back({"baseline", "p_na", 0.0, c});
      const auto axis = analytics::log_axis(sw.grid_min, sw.grid_max, sw.grid_size);
      for (double p_na : axis) {
        for (double p_da : axis) {
          c.error.p_na = p_na;
          c.error.p_da = p_da;
          out.points.push_back({fmt::format("p_da={}", num(p_da)), "p_na", p_na, c});
        }
      }
      break;
    }
  }
  return out;
}

metrics::AggregateMetrics summarize(const std::vector<metrics::RunMetrics>& runs) {
  if (runs.empty()) throw ModelError("nothing to summarize");
  if (runs.size() >= 2) return metrics::aggregate_seeds(runs);
  const auto& r = runs.front();
  metrics::AggregateMetrics a;
  a.runs = 1;
  a.user_throughput_bps = {r.mean_user_throughput_bps(), 0.0, 1};
  a.per_packet_throughput_bps = {r.mean_per_packet_throughput_bps(), 0.0, 1};
  a.residual_rate = {r.mac_residual_rate, 0.0, 1};
  a.pooled_residual_rate = r.mac_residual_rate;
  a.pooled_sdu_loss_rate = r.rlc_sdu_loss_rate;
  a.sdus_lost = r.sdus_lost;
  a.tbs = r.harq_log.concluded();
  a.files_completed = r.files_completed;
  return a;
}

std::vector<PointResult> run_points(const std::vector<Point>& points, int seeds, std::uint64_t seed_base, int workers,
                                    analytics::GiveUpExponent exponent) {
  if (seeds < 1) throw ConfigError("at least one seed is required");
  const std::size_t n_tasks = points.size() * static_cast<std::size_t>(seeds);
  std::vector<metrics::RunMetrics> results(n_tasks);
  std::vector<std::exception_ptr> errors(n_tasks);
  std::atomic<std::size_t> next{0};

  const auto worker = [&] {
    for (std::size_t i = next++; i < n_tasks; i = next++) {
      const auto& p = points[i / static_cast<std::size_t>(seeds)];
      const std::uint64_t seed = seed_base + i % static_cast<std::size_t>(seeds);
      try {
        results[i] = stack::run_link(p.config, seed).metrics;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::size_t n_threads = workers > 0 ? static_cast<std::size_t>(workers) : std::thread::hardware_concurrency();
  n_threads = std::clamp<std::size_t>(n_threads, 1, std::max<std::size_t>(n_tasks, 1));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<PointResult> out;
  out.reserve(points.size());
  for (std::size_t p = 0; p < points.size(); ++p) {
    PointResult r;
    r.point = points[p];
    const auto first = results.begin() + static_cast<std::ptrdiff_t>(p * static_cast<std::size_t>(seeds));
    r.runs.assign(std::make_move_iterator(first), std::make_move_iterator(first + seeds));
    r.agg = summarize(r.runs);
    r.analytic = analytics::residual_error_exact(r.point.config.error, exponent);
    r.analytic_approx = analytics::residual_error_approx(r.point.config.error);
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

constexpr const char* kHeader =
    "experiment,series,sweep_param,value,seed,agg,user_tput_mbps,user_tput_se,pkt_tput_mbps,pkt_tput_se,"
    "residual_rate,analytic_p_re,approx_p_re,sdu_loss_rate,sdus_lost,tbs,files_completed,fast_retx,timeouts\n";

std::string g(double v) { return fmt::format("{:.10g}", v); }

}  // namespace

std::string raw_csv(const std::string& experiment, const std::vector<PointResult>& points) {
  std::string out = kHeader;
  for (const auto& p : points) {
    for (const auto& r : p.runs) {
      out += fmt::format("{},{},{},{},{},0,{},,{},,{},{},{},{},{},{},{},{},{}\n", experiment, p.point.series,
                         p.point.sweep_param, g(p.point.value), r.seed, g(r.mean_user_throughput_bps() / 1e6),
                         g(r.mean_per_packet_throughput_bps() / 1e6), g(r.mac_residual_rate), g(p.analytic.total),
                         g(p.analytic_approx), g(r.rlc_sdu_loss_rate), r.sdus_lost, r.harq_log.concluded(),
                         r.files_completed, r.cwnd.fast_retransmits, r.cwnd.timeouts);
    }
  }
  return out;
}

std::string agg_csv(const std::string& experiment, const std::vector<PointResult>& points) {
  std::string out = kHeader;
  for (const auto& p : points) {
    std::uint64_t fr = 0;
    std::uint64_t to = 0;
    for (const auto& r : p.runs) {
      fr += r.cwnd.fast_retransmits;
      to += r.cwnd.timeouts;
    }
    const auto& a = p.agg;
    out += fmt::format("{},{},{},{},,1,{},{},{},{},{},{},{},{},{},{},{},{},{}\n", experiment, p.point.series,
                       p.point.sweep_param, g(p.point.value), g(a.user_throughput_bps.mean / 1e6),
                       g(a.user_throughput_bps.std_error / 1e6), g(a.per_packet_throughput_bps.mean / 1e6),
                       g(a.per_packet_throughput_bps.std_error / 1e6), g(a.pooled_residual_rate), g(p.analytic.total),
                       g(p.analytic_approx), g(a.pooled_sdu_loss_rate), a.sdus_lost, a.tbs, a.files_completed, fr, to);
  }
  return out;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text, std::vector<std::filesystem::path>& files) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  os << text;
  files.push_back(path);
}

}  // namespace

ScenarioResult run_scenario(const Scenario& s, const std::filesystem::path& out_dir) {
  Plan p = plan(s);
  for (const auto& sk : p.skipped) {
    std::cerr << fmt::format("skipping {} target P_re={}: {}\n", sk.series, num(sk.target), sk.reason);
  }
  ScenarioResult result;
  result.skipped = std::move(p.skipped);
  result.points = run_points(p.points, s.seeds, s.seed_base, s.workers, s.give_up_exponent);

  if (s.experiment == Experiment::kDegradationGrid) {
    const auto axis = analytics::log_axis(s.sweep.grid_min, s.sweep.grid_max, s.sweep.grid_size);
    const double baseline = result.points.front().agg.user_throughput_bps.mean;
    const auto lookup = [&](const std::vector<analytics::Cell>& cells) {
      // Cells arrive in the same row-major order the plan used, right after the baseline.
      std::vector<double> out;
      for (std::size_t i = 0; i < cells.size(); ++i) out.push_back(result.points[i + 1].agg.user_throughput_bps.mean);
      return out;
    };
    result.grid = analytics::degradation_grid(axis, axis, baseline, lookup, s.sweep.grid_level_pct);
  }

  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw ConfigError(fmt::format("cannot create output directory '{}': {}", out_dir.string(), ec.message()));
    const std::string exp = to_string(s.experiment);
    std::string lower = exp;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    write_file(out_dir / (lower + "_raw.csv"), raw_csv(exp, result.points), result.files);
    write_file(out_dir / (lower + "_agg.csv"), agg_csv(exp, result.points), result.files);
    std::string cfg = resolved_config(s);
    for (const auto& sk : result.skipped) {
      cfg += fmt::format("# skipped {} target {}: {}\n", sk.series, num(sk.target), sk.reason);
    }
    write_file(out_dir / "resolved_config.txt", cfg, result.files);
    if (result.grid) {
      write_file(out_dir / (lower + "_matrix.csv"), result.grid->matrix_csv(), result.files);
      write_file(out_dir / (lower + "_boundary.csv"), result.grid->boundary_csv(), result.files);
    }
  }
  return result;
}

}  // namespace recovery::scenario
