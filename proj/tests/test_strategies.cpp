#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "corrport/errors.hpp"
#include "corrport/oracle.hpp"
#include "corrport/strategies.hpp"
#include "support.hpp"

using namespace corrport;
using testing_support::table1;

namespace {

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

MarketParams slack_market() {
  // pi_bar far below every cap.
  MarketParams p = table1();
  p.mu1 = -0.29;
  return p;
}

}  // namespace

TEST_SUITE("strategies") {

TEST_CASE("pi_bar") {
  const TimeGrid g{8, 1.0};
  // (1 / (2 gamma sigma1)) ln((1 + theta) / (1 - theta)) with theta = 7/30
  const double expected = std::log((1.0 + 7.0 / 30.0) / (1.0 - 7.0 / 30.0)) / (2.0 * 0.5 * 0.3);
  CHECK(near(pi_bar(table1(), g), expected, 1e-14));
  CHECK(near(pi_bar(table1(), g), 1.584746, 1e-6));

  MarketParams p = table1();
  p.mu1 = 0.0;
  CHECK(pi_bar(p, g) == 0.0);

  p = table1();
  p.gamma = 1.0;
  CHECK(near(pi_bar(p, g), 0.792373, 1e-6));
  CHECK(near(pi_bar(p, g), 0.5 * pi_bar(table1(), g), 1e-15));

  p = table1();
  p.mu1 = 0.3;
  CHECK_THROWS_AS(pi_bar(p, g), DomainError);
}

TEST_CASE("admissibility bound") {
  const TimeGrid g{8, 1.0};
  CHECK(near(admissibility_bound(table1(), g), 0.1918, 1e-4));
  CHECK(near(admissibility_bound(table1(), g), 0.191853, 1e-6));
  CHECK_NOTHROW(require_admissible(table1(), g));
  MarketParams p = table1();
  p.delta = 0.25;
  CHECK_THROWS_AS(require_admissible(p, g), InadmissibleDelta);
  try {
    csgp(p, g);
    FAIL("expected InadmissibleDelta");
  } catch (const InadmissibleDelta& e) {
    CHECK(near(e.bound(), 0.191853, 1e-6));
  }
  CHECK_THROWS_AS(cpc(p, g), InadmissibleDelta);
}

TEST_CASE("conditional correlation with one step left") {
  const MarketParams p = table1();
  const TimeGrid g{2, 1.0};
  const CorrelationAggregates agg = aggregates_for_step(p, g, {}, 1);
  CHECK(near(conditional_correlation(p, g, 0.0, agg), 0.6, 1e-14));
  CHECK(near(conditional_correlation(p, g, csgp_cap(p, g, agg), agg), -0.09, 1e-12));
  CHECK(near(conditional_correlation(p, g, -1e6, agg), -0.6, 1e-4));
}

TEST_CASE("conditional correlation rejects zero variance") {
  MarketParams p = table1();
  p.sigma2 = 0.0;  // both income increments equal: no income risk
  const TimeGrid g{1, 1.0};
  const CorrelationAggregates agg = aggregates_for_step(p, g, {}, 1);
  CHECK(agg.b2 == 0.0);
  CHECK(agg.k2_sq == 0.0);
  CHECK_THROWS_AS(conditional_correlation(p, g, 0.0, agg), DegenerateVariance);
}

TEST_CASE("aggregates for the two-step reference case") {
  const MarketParams p = table1();
  const TimeGrid g{2, 1.0};
  const CorrelationAggregates a1 = aggregates_for_step(p, g, {}, 1);
  CHECK(near(a1.b2, 0.0042857, 1e-7));
  CHECK(near(a1.k2_sq, 5.10204e-5, 1e-9));
  const std::vector<double> tail{-0.123878};
  const CorrelationAggregates a2 = aggregates_for_step(p, g, tail, 2);
  CHECK(near(a2.b2, 0.00326237, 1e-8));
  CHECK(near(a2.k2_sq, 3.70894e-4, 1e-9));
  CHECK_THROWS_AS(aggregates_for_step(p, g, tail, 1), LengthMismatch);
  CHECK_THROWS_AS(aggregates_for_step(p, g, {}, 2), LengthMismatch);
}

TEST_CASE("b2 with the whole horizon remaining and k = 0") {
  const MarketParams p = table1();
  const TimeGrid g{5, 1.0};
  const DerivedConstants dc = derive_constants(p, g);
  const std::vector<double> tail{0.3, -0.2, 1.1, -0.7};
  const CorrelationAggregates agg = aggregates_for_step(p, g, tail, 5);
  const double sum = std::accumulate(tail.begin(), tail.end(), 0.0);
  const double expected = dc.theta3 * (dc.m_diff * p.a32 * 5 + p.sigma1 * p.a31 * sum);
  CHECK(near(agg.b2, expected, 1e-14));
}

TEST_CASE("caps for the two-step reference case") {
  const MarketParams p = table1();
  const TimeGrid g{2, 1.0};
  const double cap1 = csgp_cap(p, g, aggregates_for_step(p, g, {}, 1));
  CHECK(near(cap1, -0.123881, 1e-6));
  const std::vector<double> tail{cap1};
  CHECK(near(csgp_cap(p, g, aggregates_for_step(p, g, tail, 2)), -0.124643, 1e-6));
}

TEST_CASE("cap with b2 = 0 is symmetric") {
  const MarketParams p = table1();
  const TimeGrid g{3, 1.0};
  const CorrelationAggregates agg{0.0, 2e-4, 2};
  const QuadraticCap q = cap_quadratic(p, g, agg);
  CHECK(near(q.r_left, -p.delta * std::sqrt(agg.k2_sq) / std::sqrt(q.lead), 1e-15));
  CHECK(near(q.r_right, -q.r_left, 1e-15));
}

TEST_CASE("cap rejects a vanishing lead coefficient") {
  MarketParams p = table1();
  const TimeGrid g{2, 1.0};
  p.delta = derive_constants(p, g).admissibility_bound(2);
  CHECK_THROWS_AS(cap_quadratic(p, g, aggregates_for_step(p, g, std::vector<double>{0.0}, 2)), InadmissibleDelta);
}

TEST_CASE("CSGP reference values") {
  const StrategyVector s = csgp(table1(), {2, 1.0});
  REQUIRE(s.size() == 2);
  CHECK(s.kind == StrategyKind::CSGP);
  CHECK(near(s[0], -0.124643, 1e-6));
  CHECK(near(s[1], -0.123881, 1e-6));

  const StrategyVector s4 = csgp(table1(), {4, 1.0});
  const double expected4[] = {-0.126265, -0.125438, -0.124643, -0.123881};
  for (std::size_t i = 0; i < 4; ++i) CHECK(near(s4[i], expected4[i], 1e-6));
}

TEST_CASE("CSGP equals pi_bar when the constraint is slack") {
  const MarketParams p = slack_market();
  const TimeGrid g{6, 1.0};
  const double bar = pi_bar(p, g);
  for (double x : csgp(p, g).amounts) CHECK(x == bar);
  for (double x : cpc(p, g).amounts) CHECK(x == bar);
}

TEST_CASE("CPC reference values") {
  const MarketParams p = table1();
  const TimeGrid g{2, 1.0};
  const CpcIntermediates ci = cpc_intermediates(p, g);
  CHECK(near(ci.a, 0.953724, 1e-6));
  CHECK(near(ci.c, 0.2, 1e-12));
  CHECK(near(ci.eta_sq, 9.2551e-4, 1e-8));
  CHECK(near(ci.b_shift, -ci.c / (ci.a + 1.0), 1e-15));
  const StrategyVector s = cpc(p, g);
  CHECK(s.kind == StrategyKind::CPC);
  CHECK(near(s[0], -0.124262, 1e-6));
  CHECK(s[0] == s[1]);
  // Feasible branch: the sum stays below -b2/b1.
  CHECK(2.0 * s[0] <= -ci.c);

  CHECK(near(cpc(p, {4, 1.0})[0], -0.125056, 1e-6));
  CHECK(near(cpc(p, {8, 1.0})[0], -0.126781, 1e-6));
}

TEST_CASE("CPC over one step equals the one-step CSGP value") {
  const TimeGrid g{1, 1.0};
  CHECK(near(cpc(table1(), g)[0], csgp(table1(), g)[0], 1e-12));
  CHECK(near(cpc(table1(), g)[0], -0.123881, 1e-6));
}

TEST_CASE("unconditional correlation") {
  const MarketParams p = table1();
  const TimeGrid g{2, 1.0};
  CHECK(near(unconditional_correlation(p, g, csgp(p, g).view()), -0.09, 1e-9));
  CHECK(near(unconditional_correlation(p, {1, 1.0}, std::vector<double>{0.0}), 0.6, 1e-14));
  const double bar = pi_bar(p, g);
  const double rho = unconditional_correlation(p, g, std::vector<double>{bar, bar});
  CHECK(rho > 0.5);
  CHECK(rho < 1.0);
  CHECK_THROWS_AS(unconditional_correlation(p, g, std::vector<double>{bar}), LengthMismatch);
}

TEST_CASE("root ordering over random draws, both signs of b2") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> steps(1, 8);
  std::uniform_real_distribution<double> amount(-3.0, 3.0);
  int checked = 0;
  for (int t = 0; t < 10'000; ++t) {
    const int n = steps(rng);
    const auto d = testing_support::random_market(rng, n);
    std::vector<double> tail(static_cast<std::size_t>(n - 1));
    for (double& x : tail) x = amount(rng);
    for (double sign : {1.0, -1.0}) {
      CorrelationAggregates agg = aggregates_for_step(d.p, d.g, tail, n);
      agg.b2 *= sign;
      const QuadraticCap q = cap_quadratic(d.p, d.g, agg);
      const double vertex = -agg.b2 / derive_constants(d.p, d.g).b1;
      const double slack = 1e-12 * std::max({1.0, std::abs(q.r_left), std::abs(q.r_right)});
      CHECK(q.r_left <= q.r_right);
      CHECK(q.r_left <= vertex + slack);
      CHECK(vertex <= q.r_right + slack);
      ++checked;
    }
  }
  CHECK(checked == 20'000);
}

TEST_CASE("cap binds and the feasible set is the half-line left of it") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> steps(1, 6);
  std::uniform_real_distribution<double> amount(-2.0, 2.0);
  for (int t = 0; t < 300; ++t) {
    const int n = steps(rng);
    const auto d = testing_support::random_market(rng, n);
    std::vector<double> tail(static_cast<std::size_t>(n - 1));
    for (double& x : tail) x = amount(rng);
    const CorrelationAggregates agg = aggregates_for_step(d.p, d.g, tail, n);
    const QuadraticCap q = cap_quadratic(d.p, d.g, agg);
    CHECK(std::abs(conditional_correlation(d.p, d.g, q.r_left, agg) + d.p.delta) < 1e-10);
    const double lo = q.r_left - 1.0;
    const double hi = q.r_right + 1.0;
    const double scale = std::max(1e-9, 1e-9 * std::abs(q.r_left));
    for (int j = 0; j <= 400; ++j) {
      const double x = lo + (hi - lo) * j / 400.0;
      if (std::abs(x - q.r_left) < scale) continue;
      const bool feasible = conditional_correlation(d.p, d.g, x, agg) <= -d.p.delta;
      CHECK(feasible == (x < q.r_left));
    }
  }
}

TEST_CASE("one-step cap agrees with the single-period form") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 500; ++t) {
    auto d = testing_support::random_market(rng, 1 + t % 5);
    d.p.delta = std::min(d.p.delta, 0.99 * d.p.a31);
    const CorrelationAggregates agg = aggregates_for_step(d.p, d.g, std::vector<double>{}, 1);
    const double multi = csgp_cap(d.p, d.g, agg);
    const double single = single_period_cap(d.p, d.g);
    CHECK(std::abs(multi - single) <= 1e-12 * std::max(1.0, std::abs(single)));
    CHECK(std::abs(conditional_correlation(d.p, d.g, 0.37, agg) - single_period_correlation(d.p, d.g, 0.37)) <
          1e-12);
  }
}

TEST_CASE("half-sum single-period variant does not bind") {
  const MarketParams p = table1();
  const TimeGrid g{1, 1.0};
  const double cap = single_period_cap_half_sum(p, g);
  CHECK(std::abs(oracle::exact_correlation(p, g, std::vector<double>{cap}) + p.delta) > 1e-3);
  CHECK(std::abs(single_period_correlation_half_sum(p, g, cap) + p.delta) < 1e-12);
  MarketParams q = p;
  q.delta = 0.65;
  CHECK_THROWS_AS(single_period_cap(q, g), InadmissibleDelta);
}

TEST_CASE("steps-remaining invariance with k = 0") {
  std::mt19937_64 rng(19);
  for (int t = 0; t < 50; ++t) {
    auto d = testing_support::random_market(rng, 9);
    d.p.k = 0.0;
    const StrategyVector longer = csgp(d.p, {9, d.g.h});
    for (int n = 1; n < 9; ++n) {
      const StrategyVector shorter = csgp(d.p, {n, d.g.h});
      for (int j = 1; j <= n; ++j) {
        CHECK(std::abs(shorter.amounts[static_cast<std::size_t>(n - j)] -
                       longer.amounts[static_cast<std::size_t>(9 - j)]) < 1e-12);
      }
    }
  }
}

TEST_CASE("disabling the constraint gives pi_bar everywhere") {
  for (int n = 1; n <= 10; ++n) {
    const TimeGrid g{n, 1.0};
    const double bar = pi_bar(table1(), g);
    for (double x : csgp(table1(), g, Constraint::Disabled).amounts) CHECK(x == bar);
    for (double x : cpc(table1(), g, Constraint::Disabled).amounts) CHECK(x == bar);
    for (double x : unsgp(table1(), g).amounts) CHECK(x == bar);
  }
}

TEST_CASE("CPC is close to the time average of CSGP") {
  for (int n : {2, 4, 8}) {
    const TimeGrid g{n, 1.0};
    const auto s = csgp(table1(), g).amounts;
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
    const double c = cpc(table1(), g)[0];
    CHECK(std::abs(mean - c) / std::abs(c) < 0.01);
  }
}

TEST_CASE("caps scale with the income level") {
  std::mt19937_64 rng(101);
  for (int t = 0; t < 100; ++t) {
    const auto d = testing_support::random_market(rng, 5);
    for (double lambda : {0.5, 2.0, 3.0}) {
      MarketParams q = d.p;
      q.mu2 *= lambda;
      q.sigma2 *= lambda;
      try {
        validate(q, d.g);
      } catch (const InvalidParameter&) {
        continue;
      }
      // Only the caps scale; compare the raw caps rather than min(pi_bar, cap).
      std::vector<double> tail_p, tail_q;
      for (int n = 1; n <= 5; ++n) {
        const double cp = csgp_cap(d.p, d.g, aggregates_for_step(d.p, d.g, tail_p, n));
        const double cq = csgp_cap(q, d.g, aggregates_for_step(q, d.g, tail_q, n));
        CHECK(std::abs(cq - lambda * cp) <= 1e-10 * std::max(1.0, std::abs(cq)));
        tail_p.insert(tail_p.begin(), cp);
        tail_q.insert(tail_q.begin(), cq);
      }
      CHECK(pi_bar(q, d.g) == pi_bar(d.p, d.g));
    }
  }
}

TEST_CASE("strategy kind names") {
  for (auto k : {StrategyKind::UnSGP, StrategyKind::CSGP, StrategyKind::CPC, StrategyKind::Custom}) {
    CHECK(parse_strategy_kind(to_string(k)) == k);
  }
  CHECK_FALSE(parse_strategy_kind("csgp2").has_value());
}

}  // TEST_SUITE
