#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>

#include "recovery/analytics.hpp"
#include "recovery/errors.hpp"

using namespace recovery;

namespace {

link::ErrorModelParams params(double p_ch, double p_e, double p_na, double p_da, double p_an, int n) {
  link::ErrorModelParams p;
  p.p_ch = p_ch;
  p.p_e = p_e;
  p.p_na = p_na;
  p.p_da = p_da;
  p.p_an = p_an;
  p.n_max = n;
  return p;
}

}  // namespace

TEST_CASE("give-up probability") {
  CHECK(analytics::give_up_prob(0.1, 6) == doctest::Approx(1e-6).epsilon(1e-14));
  CHECK(analytics::give_up_prob(0.37, 0) == 1.0);
  CHECK(analytics::give_up_prob(0.5, 3) == 0.125);
  CHECK_THROWS_AS(analytics::give_up_prob(1.1, 2), ModelError);
  CHECK_THROWS_AS(analytics::give_up_prob(0.5, -1), ModelError);
  for (double p : {0.05, 0.1, 0.5, 0.9}) {
    for (int a = 0; a < 5; ++a) {
      for (int b = 0; b < 5; ++b) {
        CHECK(analytics::give_up_prob(p, a + b) ==
              doctest::Approx(analytics::give_up_prob(p, a) * analytics::give_up_prob(p, b)).epsilon(1e-13));
      }
    }
  }
}

TEST_CASE("exact residual error") {
  CHECK(analytics::residual_error_exact(params(0, 0, 0, 0, 0, 6)).total == 0.0);
  CHECK(analytics::residual_error_exact(params(0, 0.1, 1e-2, 0, 0, 200)).total == doctest::Approx(1e-3).epsilon(1e-12));

  const auto r = analytics::residual_error_exact(params(0.01, 0.1, 1e-3, 1e-4, 0, 6));
  CHECK(r.nack_to_ack == doctest::Approx(9.9e-5));
  CHECK(r.dtx_to_ack == doctest::Approx(1e-6));
  CHECK(r.give_up == doctest::Approx(1e-6));
  CHECK(r.ack_to_nack == 0.0);
  CHECK(r.total == doctest::Approx(1.010e-4).epsilon(1e-9));
  CHECK(analytics::residual_error_approx(params(0.01, 0.1, 1e-3, 1e-4, 0, 6)) == doctest::Approx(1.000e-4).epsilon(1e-9));
  CHECK(analytics::residual_error_approx(params(0.01, 0.1, 0, 0, 0, 6)) == 0.0);
}

TEST_CASE("give-up exponent convention") {
  const auto p = params(0, 0.1, 0, 0, 0, 6);
  CHECK(analytics::residual_error_exact(p, analytics::GiveUpExponent::kRetransmissions).give_up ==
        doctest::Approx(1e-6));
  CHECK(analytics::residual_error_exact(p, analytics::GiveUpExponent::kTotalTransmissions).give_up ==
        doctest::Approx(1e-7));
}

TEST_CASE("exact minus approximation is the give-up plus ACK-to-NACK terms") {
  sim::RngStream r(99, "analytic");
  for (int i = 0; i < 500; ++i) {
    const auto p = params(r.uniform(), r.uniform(), r.uniform(), r.uniform(), r.uniform(), static_cast<int>(r.uniform() * 10));
    const auto ex = analytics::residual_error_exact(p);
    const double ap = analytics::residual_error_approx(p);
    CHECK(ex.total - ap == doctest::Approx(ex.give_up + (1 - p.p_ch) * (1 - p.p_e) * p.p_an).epsilon(1e-12));
    CHECK(ex.total >= ap);
  }
  CHECK_THROWS_AS(analytics::residual_error_exact(params(2, 0, 0, 0, 0, 1)), ConfigError);
}

TEST_CASE("solving the approximation for P_na") {
  const auto p_na = analytics::p_na_for_target(8e-5, 0.01, 0.1, 1e-3);
  REQUIRE(p_na);
  CHECK(*p_na == doctest::Approx((8e-5 - 1e-5) / (0.99 * 0.1)));
  CHECK(*p_na == doctest::Approx(7.07e-4).epsilon(1e-3));
  CHECK(analytics::residual_error_approx(params(0.01, 0.1, *p_na, 1e-3, 0, 6)) == doctest::Approx(8e-5));
  CHECK_FALSE(analytics::p_na_for_target(2e-6, 0.01, 0.1, 1e-3));  // DTX term alone exceeds the target
  CHECK_FALSE(analytics::p_na_for_target(0.5, 0.01, 0.1, 0.0));    // would need P_na > 1
}

TEST_CASE("log axis") {
  const auto a = analytics::log_axis(1e-5, 1e-1, 5);
  REQUIRE(a.size() == 5);
  CHECK(a[0] == 1e-5);
  CHECK(a[2] == doctest::Approx(1e-3));
  CHECK(a[4] == 1e-1);
  CHECK_THROWS_AS(analytics::log_axis(1e-5, 1e-1, 1), ModelError);
}

TEST_CASE("degradation grid") {
  const auto axis = analytics::log_axis(1e-5, 1e-1, 7);
  // Synthetic throughput falling with the residual rate of each cell.
  const auto eval = [](const std::vector<analytics::Cell>& cells) {
    std::vector<double> out;
    for (const auto& [na, da] : cells) out.push_back(100.0 * (1.0 - std::min(1.0, 0.099 * na * 50 + 0.01 * da * 50)));
    return out;
  };
  const auto g = analytics::degradation_grid(axis, axis, 100.0, eval);
  CHECK(g.degradation_pct[0][0] == doctest::Approx(0.0).epsilon(0.01));
  for (std::size_t r = 0; r < 7; ++r) {
    for (std::size_t c = 0; c < 7; ++c) {
      if (r > 0) CHECK(g.degradation_pct[r][c] >= g.degradation_pct[r - 1][c]);
      if (c > 0) CHECK(g.degradation_pct[r][c] >= g.degradation_pct[r][c - 1]);
    }
  }
  CHECK(g.downward_closed());
  REQUIRE(g.boundary_p_da.size() == 7);
  CHECK(g.boundary_p_da[0].has_value());
  CHECK_FALSE(g.boundary_p_da[6].has_value());

  std::istringstream csv(g.matrix_csv());
  std::string header;
  std::getline(csv, header);
  CHECK(header.rfind("p_na,1e-05,", 0) == 0);
  int rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  CHECK(rows == 7);

  CHECK_THROWS_AS(analytics::degradation_grid({1e-3}, axis, 100.0, eval), ModelError);
  CHECK_THROWS_AS(analytics::degradation_grid(axis, axis, 0.0, eval), ModelError);
}

TEST_CASE("downward closure detects a hole") {
  analytics::DegradationGrid g;
  g.p_na = {1, 2};
  g.p_da = {1, 2};
  g.degradation_pct = {{10, 1}, {1, 1}};
  CHECK_FALSE(g.downward_closed());
  g.degradation_pct = {{1, 1}, {1, 10}};
  CHECK(g.downward_closed());
}
