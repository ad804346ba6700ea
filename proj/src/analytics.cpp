#include "recovery/analytics.hpp"

#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "recovery/errors.hpp"

namespace recovery::analytics {

double give_up_prob(double p_e, int n) {
  if (!(p_e >= 0.0 && p_e <= 1.0)) throw ModelError("p_e must lie in [0,1]");
  if (n < 0) throw ModelError("retransmission count must be non-negative");
  return std::pow(p_e, n);
}

ResidualBreakdown residual_error_exact(const link::ErrorModelParams& p, GiveUpExponent exponent) {
  p.validate();
  const int n = exponent == GiveUpExponent::kRetransmissions ? p.n_max : p.n_max + 1;
  ResidualBreakdown b;
  b.nack_to_ack = (1.0 - p.p_ch) * p.p_e * p.p_na;
  b.dtx_to_ack = p.p_ch * p.p_da;
  b.give_up = give_up_prob(p.p_e, n);
  b.ack_to_nack = (1.0 - p.p_ch) * (1.0 - p.p_e) * p.p_an;
  b.total = b.nack_to_ack + b.dtx_to_ack + b.give_up + b.ack_to_nack;
  return b;
}

double residual_error_approx(const link::ErrorModelParams& p) {
  p.validate();
  return (1.0 - p.p_ch) * p.p_e * p.p_na + p.p_ch * p.p_da;
}

std::optional<double> p_na_for_target(double target, double p_ch, double p_e, double p_da) {
  const double slope = (1.0 - p_ch) * p_e;
  const double rest = target - p_ch * p_da;
  if (slope <= 0.0) {
    return std::abs(rest) <= 1e-15 ? std::optional<double>(0.0) : std::nullopt;
  }
  const double p_na = rest / slope;
  if (p_na < 0.0 || p_na > 1.0) return std::nullopt;
  return p_na;
}

std::vector<double> log_axis(double lo, double hi, int n) {
  if (n < 2 || !(lo > 0.0) || !(hi > lo)) throw ModelError("log axis needs n >= 2 and 0 < lo < hi");
  std::vector<double> out;
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < n; ++i) {
    out.push_back(std::pow(10.0, a + (b - a) * i / (n - 1)));
  }
  out.front() = lo;
  out.back() = hi;
  return out;
}

bool DegradationGrid::downward_closed() const {
  for (std::size_t r = 0; r < p_na.size(); ++r) {
    for (std::size_t c = 0; c < p_da.size(); ++c) {
      if (!within(r, c)) continue;
      if (r > 0 && !within(r - 1, c)) return false;
      if (c > 0 && !within(r, c - 1)) return false;
    }
  }
  return true;
}

std::string DegradationGrid::matrix_csv() const {
  std::ostringstream os;
  os << "p_na";
  for (double d : p_da) os << fmt::format(",{:.6g}", d);
  os << '\n';
  for (std::size_t r = 0; r < p_na.size(); ++r) {
    os << fmt::format("{:.6g}", p_na[r]);
    for (std::size_t c = 0; c < p_da.size(); ++c) os << fmt::format(",{:.6f}", degradation_pct[r][c]);
    os << '\n';
  }
  return os.str();
}

std::string DegradationGrid::boundary_csv() const {
  std::ostringstream os;
  os << "p_na,max_p_da_within_level,level_pct\n";
  for (std::size_t r = 0; r < p_na.size(); ++r) {
    os << fmt::format("{:.6g},", p_na[r]);
    if (boundary_p_da[r]) os << fmt::format("{:.6g}", *boundary_p_da[r]);
    os << fmt::format(",{:.6g}\n", level_pct);
  }
  return os.str();
}

DegradationGrid degradation_grid(const std::vector<double>& p_na, const std::vector<double>& p_da,
                                 double baseline_bps, const BatchThroughput& eval, double level_pct) {
  if (p_na.size() < 2 || p_da.size() < 2) throw ModelError("degradation grid must be at least 2x2");
  if (!(baseline_bps > 0.0)) throw ModelError("degradation baseline must be positive");
  DegradationGrid g;
  g.p_na = p_na;
  g.p_da = p_da;
  g.baseline_bps = baseline_bps;
  g.level_pct = level_pct;

  std::vector<Cell> cells;
  for (double na : p_na)
    for (double da : p_da) cells.emplace_back(na, da);
  const std::vector<double> tput = eval(cells);
  if (tput.size() != cells.size()) throw ModelError("throughput evaluator returned the wrong number of cells");

  g.throughput_bps.assign(p_na.size(), std::vector<double>(p_da.size()));
  g.degradation_pct.assign(p_na.size(), std::vector<double>(p_da.size()));
  for (std::size_t r = 0; r < p_na.size(); ++r) {
    for (std::size_t c = 0; c < p_da.size(); ++c) {
      const double t = tput[r * p_da.size() + c];
      g.throughput_bps[r][c] = t;
      g.degradation_pct[r][c] = 100.0 * (1.0 - t / baseline_bps);
    }
  }
  g.boundary_p_da.assign(p_na.size(), std::nullopt);
  for (std::size_t r = 0; r < p_na.size(); ++r) {
    for (std::size_t c = 0; c < p_da.size() && g.within(r, c); ++c) g.boundary_p_da[r] = p_da[c];
  }
  return g;
}

}  // namespace recovery::analytics
