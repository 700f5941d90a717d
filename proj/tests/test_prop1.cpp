#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hmgan/prop1.hpp"
#include "hmgan/rng.hpp"

using namespace hmgan;

TEST_CASE("loss curves") {
  DecayConfig cfg;
  cfg.rates = {1.0, 1.0};
  cfg.threshold = 0.25;

  const LossCurvePoint at0 = loss_curves(cfg, 0.0);
  REQUIRE(at0.l_d == 1.0);
  REQUIRE(at0.l_h == 2.0);  // n - 1 terms

  const LossCurvePoint at_ln2 = loss_curves(cfg, std::log(2.0));
  REQUIRE(at_ln2.l_d == Catch::Approx(0.25).margin(1e-14));
  REQUIRE(at_ln2.l_h == Catch::Approx(1.0).margin(1e-14));

  double prev_h = at0.l_h, prev_d = at0.l_d;
  for (double t = 0.1; t < 3.0; t += 0.1) {
    const LossCurvePoint p = loss_curves(cfg, t);
    REQUIRE(p.l_h < prev_h);
    REQUIRE(p.l_d < prev_d);
    prev_h = p.l_h;
    prev_d = p.l_d;
  }
}

TEST_CASE("stop times for the equal-rate case") {
  DecayConfig cfg;
  cfg.rates = {1.0, 1.0};
  cfg.threshold = 0.25;
  const StopTimes st = stop_times(cfg);
  REQUIRE(st.t_d == Catch::Approx(std::log(4.0) / 2.0).margin(1e-12));
  // 2 e^-t = 0.25 at t = ln 8
  REQUIRE(st.t_h == Catch::Approx(std::log(8.0)).margin(1e-9));
  REQUIRE(st.t_h > st.t_d);
}

TEST_CASE("closed-form t_d matches bisection") {
  RngStream rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    DecayConfig cfg;
    const std::size_t n = 3 + rng.uniform_int(6);
    for (std::size_t i = 0; i + 1 < n; ++i) cfg.rates.push_back(rng.uniform(0.2, 5.0));
    cfg.threshold = rng.uniform(0.01, 0.95);
    cfg.t_max = 1e4;
    const StopTimes st = stop_times(cfg);
    const double bisected = detail::bisect_stop_time(
        [&](double t) { return loss_curves(cfg, t).l_d; }, cfg.threshold, cfg.t_max);
    REQUIRE(std::abs(st.t_d - bisected) <= 1e-10);
  }
}

TEST_CASE("the sum curve never stops before the product curve") {
  RngStream rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    DecayConfig cfg;
    const std::size_t n = 3 + rng.uniform_int(6);
    for (std::size_t i = 0; i + 1 < n; ++i) cfg.rates.push_back(rng.uniform(0.2, 5.0));
    cfg.threshold = rng.uniform(0.01, 0.99);  // below min(1, n-1)
    cfg.t_max = 1e4;
    const StopTimes st = stop_times(cfg);
    REQUIRE(st.t_h >= st.t_d);
    REQUIRE(st.t_h > st.t_d);  // strict for n >= 3
  }
}

TEST_CASE("stop time is zero when the curve starts at or below the threshold") {
  DecayConfig cfg;
  cfg.rates = {1.0, 1.0, 1.0};
  cfg.threshold = 2.0;  // l_d(0) = 1 < 2, l_h(0) = 3 > 2
  const StopTimes st = stop_times(cfg);
  REQUIRE(st.t_d == 0.0);
  REQUIRE(st.t_h > 0.0);
}

TEST_CASE("unreachable threshold is an error") {
  DecayConfig cfg;
  cfg.rates = {0.001, 0.001};
  cfg.threshold = 0.2;
  cfg.t_max = 1.0;  // far too short for the sum to decay
  REQUIRE_THROWS_AS(stop_times(cfg), DomainError);
}

TEST_CASE("proposition holds under its construction") {
  RngStream rng(3);
  const Prop1Report report = check_proposition(4, 100.0, 200, rng);
  REQUIRE(report.checked == 200);
  REQUIRE(report.violations == 0);
  for (const Prop1Record& rec : report.records) {
    REQUIRE(rec.premise_met);
    REQUIRE(rec.ordering_holds);
    REQUIRE(rec.l_d_at_tbar < rec.threshold);
    REQUIRE(rec.threshold < rec.l_h_at_tbar);
    REQUIRE(rec.t_h > rec.t_d);
    // margin above H is (n-1) e^(-r_dom t_bar), small but positive
    double r_dom = 0.0;
    for (double r : rec.rates) r_dom = std::max(r_dom, r);
    const double expected_margin = 3.0 * std::exp(-r_dom * rec.t_bar);
    REQUIRE(rec.margin_h > 0.0);
    REQUIRE(rec.margin_h == Catch::Approx(expected_margin).epsilon(1e-6));
  }
}

TEST_CASE("no dominant rate flags the premise instead of asserting") {
  RngStream rng(4);
  const Prop1Report report = check_proposition(4, 1.0, 50, rng);
  REQUIRE(report.checked == 0);
  REQUIRE(report.violations == 0);
  for (const Prop1Record& rec : report.records) REQUIRE_FALSE(rec.premise_met);
}

TEST_CASE("argument validation") {
  RngStream rng(5);
  REQUIRE_THROWS_AS(check_proposition(2, 100.0, 1, rng), DomainError);
  REQUIRE_THROWS_AS(check_proposition(4, 0.0, 1, rng), DomainError);
  DecayConfig bad;
  bad.rates = {1.0, -1.0};
  bad.threshold = 0.5;
  REQUIRE_THROWS_AS(stop_times(bad), DomainError);
}
