#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "recovery/link_model.hpp"

namespace recovery::analytics {

/// What the exponent of the give-up term counts. The closed form writes P_e^n
/// with n the maximum number of retransmissions; a TB is only abandoned after
/// all n+1 transmissions fail, which the second option reproduces.
enum class GiveUpExponent { kRetransmissions, kTotalTransmissions };

struct ResidualBreakdown {
  double nack_to_ack = 0.0;  ///< (1-P_ch) P_e P_na
  double dtx_to_ack = 0.0;   ///< P_ch P_da
  double give_up = 0.0;      ///< P_e^n
  double ack_to_nack = 0.0;  ///< (1-P_ch)(1-P_e) P_an
  double total = 0.0;
};

/// P_e^n. Throws ModelError for p_e outside [0,1] or negative n.
double give_up_prob(double p_e, int n);

/// Full residual-error expression with its four terms.
ResidualBreakdown residual_error_exact(const link::ErrorModelParams& p,
                                       GiveUpExponent exponent = GiveUpExponent::kRetransmissions);

/// Dominant-terms approximation (1-P_ch) P_e P_na + P_ch P_da.
double residual_error_approx(const link::ErrorModelParams& p);

/// Solves the approximation for P_na so that it yields `target`.
/// Empty when no P_na in [0,1] reaches it with the given P_ch, P_e, P_da.
std::optional<double> p_na_for_target(double target, double p_ch, double p_e, double p_da);

/// n points spaced evenly in log10 between lo and hi inclusive.
std::vector<double> log_axis(double lo, double hi, int n);

struct DegradationGrid {
  std::vector<double> p_na;  ///< rows
  std::vector<double> p_da;  ///< columns
  double baseline_bps = 0.0;
  double level_pct = 5.0;
  std::vector<std::vector<double>> throughput_bps;   ///< [row][col]
  std::vector<std::vector<double>> degradation_pct;  ///< 100 * (1 - tput / baseline)
  /// For each row, the largest P_da whose cell stays below the level
  /// together with every smaller P_da; empty when even the first cell fails.
  std::vector<std::optional<double>> boundary_p_da;

  bool within(std::size_t row, std::size_t col) const { return degradation_pct[row][col] < level_pct; }
  /// True when the within-level cells are closed under moving to smaller P_na or P_da.
  bool downward_closed() const;
  std::string matrix_csv() const;
  std::string boundary_csv() const;
};

using Cell = std::pair<double, double>;  ///< (p_na, p_da)
/// Evaluates mean user throughput for a batch of cells, in input order.
using BatchThroughput = std::function<std::vector<double>(const std::vector<Cell>&)>;

/// Throws ModelError for grids smaller than 2x2 or a non-positive baseline.
DegradationGrid degradation_grid(const std::vector<double>& p_na, const std::vector<double>& p_da,
                                 double baseline_bps, const BatchThroughput& eval, double level_pct = 5.0);

}  // namespace recovery::analytics
