#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

#include "corrport/errors.hpp"
#include "corrport/montecarlo.hpp"
#include "corrport/oracle.hpp"
#include "corrport/philox.hpp"
#include "corrport/strategies.hpp"
#include "support.hpp"

using namespace corrport;
using testing_support::table1;

namespace {

bool same_bits(double a, double b) {
  if (std::isnan(a) && std::isnan(b)) return true;
  return std::memcmp(&a, &b, sizeof a) == 0;
}

void check_identical(const mc::EstimateReport& a, const mc::EstimateReport& b) {
  CHECK(same_bits(a.expected_utility, b.expected_utility));
  CHECK(same_bits(a.utility_stderr, b.utility_stderr));
  CHECK(same_bits(a.mean_wealth, b.mean_wealth));
  CHECK(same_bits(a.median_wealth, b.median_wealth));
  CHECK(same_bits(a.p05, b.p05));
  CHECK(same_bits(a.risk_shortfall, b.risk_shortfall));
  CHECK(same_bits(a.sample_correlation, b.sample_correlation));
}

}  // namespace

TEST_SUITE("montecarlo") {

TEST_CASE("Philox4x32-10 known-answer vectors") {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::generate(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(Philox4x32::generate(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, K{0xffffffffu, 0xffffffffu}) ==
        C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(Philox4x32::generate(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, K{0xa4093822u, 0x299f31d0u}) ==
        C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
  static_assert(Philox4x32::generate(C{0, 0, 0, 0}, K{0, 0})[0] == 0x6627e8d5u);
}

TEST_CASE("shocks are fair and independent across processes") {
  const int n = 200'000;
  double sum[3] = {0, 0, 0};
  double cross = 0.0;
  double serial = 0.0;
  for (int path = 0; path < n; ++path) {
    const ShockVector e = mc::shock_for(42, static_cast<std::uint64_t>(path), 0);
    const ShockVector f = mc::shock_for(42, static_cast<std::uint64_t>(path), 1);
    sum[0] += e.eps_s;
    sum[1] += e.eps_i;
    sum[2] += e.eps_b;
    cross += e.eps_s * e.eps_i;
    serial += e.eps_s * f.eps_s;
    CHECK((std::abs(e.eps_s) == 1 && std::abs(e.eps_i) == 1 && std::abs(e.eps_b) == 1));
  }
  const double limit = 5.0 * std::sqrt(static_cast<double>(n));
  for (double s : sum) CHECK(std::abs(s) < limit);
  CHECK(std::abs(cross) < limit);
  CHECK(std::abs(serial) < limit);
  CHECK(mc::shock_sign(42, 7, 3, mc::Process::Index) == mc::shock_for(42, 7, 3).eps_b);
}

TEST_CASE("percentile") {
  std::vector<double> hundred(100);
  std::iota(hundred.begin(), hundred.end(), 1.0);
  CHECK(mc::percentile(hundred, 0.05) == doctest::Approx(5.95).epsilon(1e-14));
  CHECK(mc::percentile(std::vector<double>{7.0}, 0.3) == 7.0);
  CHECK(mc::percentile(std::vector<double>{3.0, 1.0, 2.0}, 0.5) == 2.0);
  CHECK(mc::percentile(std::vector<double>{4.0, 1.0}, 0.25) == doctest::Approx(1.75));
  CHECK_THROWS_AS(mc::percentile(std::vector<double>{}, 0.5), InvalidParameter);
  CHECK_THROWS_AS(mc::percentile(hundred, 0.0), InvalidParameter);
  CHECK_THROWS_AS(mc::percentile(hundred, 1.0), InvalidParameter);
}

TEST_CASE("relative change") {
  CHECK(mc::relative_change(-0.5, -1.0) == doctest::Approx(0.5));
  CHECK(mc::relative_change(2.5 * 0.3, 0.3) == doctest::Approx(1.5));
  CHECK(mc::relative_change(0.42, 0.42) == 0.0);
  CHECK_THROWS_AS(mc::relative_change(1.0, 0.0), DomainError);
}

TEST_CASE("config validation") {
  mc::SimulationConfig c;
  c.n_sim = 0;
  CHECK_THROWS_AS(c.validate(), InvalidParameter);
  c.n_sim = 10;
  c.chunk_size = 0;
  CHECK_THROWS_AS(c.validate(), InvalidParameter);
  const StrategyVector s = csgp(table1(), {2, 1.0});
  mc::SimulationConfig ok;
  ok.n_sim = 10;
  CHECK_THROWS_AS(mc::run(table1(), {3, 1.0}, s.view(), ok), LengthMismatch);
}

TEST_CASE("reproducible across runs, thread counts and chunk sizes") {
  const MarketParams p = table1();
  const TimeGrid g{4, 1.0};
  const StrategyVector s = csgp(p, g);
  mc::SimulationConfig c;
  c.n_sim = 50'000;
  c.seed = 99;
  c.chunk_size = 4096;
  c.threads = 1;
  const auto a = mc::run(p, g, s.view(), c);
  const auto b = mc::run(p, g, s.view(), c);
  c.threads = 7;
  const auto d = mc::run(p, g, s.view(), c);
  check_identical(a, b);
  check_identical(a, d);
  CHECK(a.seed == 99);
  CHECK(a.n_sim == 50'000);

  // Streams are per path: a different partition keeps every terminal
  // wealth and hence the order statistics.
  c.chunk_size = 1000;
  const auto e = mc::run(p, g, s.view(), c);
  CHECK(same_bits(e.p05, a.p05));
  CHECK(same_bits(e.median_wealth, a.median_wealth));
  CHECK(std::abs(e.expected_utility - a.expected_utility) < 1e-12);
  const auto first = mc::terminal_wealths(p, g, s.view(), 99, 0, 100);
  const auto shifted = mc::terminal_wealths(p, g, s.view(), 99, 40, 60);
  for (std::size_t j = 0; j < 60; ++j) CHECK(same_bits(first[40 + j], shifted[j]));

  c.seed = 100;
  CHECK_FALSE(same_bits(mc::run(p, g, s.view(), c).expected_utility, a.expected_utility));
}

TEST_CASE("zero-volatility market is deterministic") {
  MarketParams p = table1();
  p.sigma1 = p.sigma2 = p.sigma3 = 0.0;
  const TimeGrid g{3, 1.0};
  const std::vector<double> pi{0.5, -0.25, 1.0};
  mc::SimulationConfig c;
  c.n_sim = 1000;
  c.chunk_size = 128;
  const auto r = mc::run(p, g, pi, c);
  const double w = p.x0 + p.mu1 * (0.5 - 0.25 + 1.0) + p.i0 + 3.0 * p.mu2;
  CHECK(r.p05 == doctest::Approx(w).epsilon(1e-14));
  CHECK(r.mean_wealth == doctest::Approx(w).epsilon(1e-14));
  CHECK(r.utility_stderr == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(r.utility_stderr < 1e-15);
  CHECK(std::isnan(r.sample_correlation));
}

TEST_CASE("report invariants") {
  const MarketParams p = table1();
  for (int n : {1, 2, 5}) {
    const TimeGrid g{n, 1.0};
    mc::SimulationConfig c;
    c.n_sim = 20'001;
    c.chunk_size = 3000;
    const auto r = mc::run(p, g, unsgp(p, g).view(), c);
    CHECK(r.p05 <= r.median_wealth);
    CHECK(r.utility_stderr >= 0.0);
    CHECK(r.risk_shortfall == p.x0 + p.i0 - r.p05);
  }
}

TEST_CASE("CSGP utility agrees with enumeration") {
  const MarketParams p = table1();
  const TimeGrid g{2, 1.0};
  const StrategyVector s = csgp(p, g);
  mc::SimulationConfig c;
  c.n_sim = 1'000'000;  // default seed
  const auto r = mc::run(p, g, s.view(), c);
  const double exact = oracle::exact_expected_utility(p, g, s.view());
  CHECK(std::abs(r.expected_utility - exact) < 3.0 * r.utility_stderr);
}

TEST_CASE("CSGP sample correlation sits at the bound") {
  const MarketParams p = table1();
  const TimeGrid g{8, 1.0};
  mc::SimulationConfig c;
  c.n_sim = 1'000'000;
  c.seed = 3;
  const auto r = mc::run(p, g, csgp(p, g).view(), c);
  CHECK(std::abs(r.sample_correlation + 0.09) < 0.005);
}

TEST_CASE("utility estimates cover the exact value") {
  const MarketParams p = table1();
  for (int n : {1, 3}) {
    const TimeGrid g{n, 1.0};
    const StrategyVector s = csgp(p, g);
    const double exact = oracle::exact_expected_utility(p, g, s.view());
    int inside = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      mc::SimulationConfig c;
      c.n_sim = 20'000;
      c.seed = seed;
      const auto r = mc::run(p, g, s.view(), c);
      if (std::abs(r.expected_utility - exact) < 4.0 * r.utility_stderr) ++inside;
    }
    CHECK(inside >= 99);
  }
}

}  // TEST_SUITE
