#include "corrport/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "corrport/errors.hpp"
#include "corrport/oracle.hpp"
#include "corrport/strategies.hpp"

namespace corrport::verify {

namespace {

std::string fmt(const char* pattern, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, pattern, a);
  return buf;
}

CheckResult make(std::string name, double error, double tolerance, std::string detail = {}) {
  CheckResult r;
  r.name = std::move(name);
  r.error = error;
  r.tolerance = tolerance;
  r.passed = std::isfinite(error) && error <= tolerance;
  r.detail = std::move(detail);
  return r;
}

CheckResult skipped(std::string name, const std::string& why) {
  CheckResult r;
  r.name = std::move(name);
  r.passed = true;
  r.detail = "skipped: " + why;
  return r;
}

template <typename F>
CheckResult guarded(const std::string& name, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    CheckResult r;
    r.name = name;
    r.passed = false;
    r.error = std::numeric_limits<double>::infinity();
    r.detail = std::string("exception: ") + e.what();
    return r;
  }
}

TimeGrid small_grid(const TimeGrid& g, int n) { return {std::min(g.n_steps, n), g.h}; }

bool admissible(const MarketParams& p, const TimeGrid& g) { return p.delta < admissibility_bound(p, g); }

// Random market with |theta sqrt(h)| < 1, positive dynamics and an
// admissible delta for `n_steps`.
struct Draw {
  MarketParams p;
  TimeGrid g;
};

Draw random_market(std::mt19937_64& rng, int n_steps) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto in = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  for (;;) {
    Draw d;
    MarketParams& p = d.p;
    d.g = {n_steps, u(rng) < 0.5 ? 1.0 : 0.5};
    p.mu1 = in(-0.10, 0.15);
    p.sigma1 = in(0.10, 0.40);
    p.mu2 = in(0.0, 0.06);
    p.sigma2 = in(0.02, 0.20);
    p.k = in(-0.05, 0.05);
    p.mu3 = in(0.0, 0.08);
    p.sigma3 = in(0.10, 0.30);
    p.a31 = in(0.30, 0.70);
    p.a32 = in(0.05, 0.95) * std::sqrt(1.0 - p.a31 * p.a31);
    p.gamma = in(0.2, 2.0);
    p.delta = 0.5;
    try {
      validate_dynamics(p, d.g);
      p.delta = in(0.01, 0.98) * admissibility_bound(p, d.g);
      validate(p, d.g);
      return d;
    } catch (const Error&) {
    }
  }
}

CheckResult check_pi_bar(const MarketParams& p, const TimeGrid& g, const Options& o) {
  const TimeGrid g1 = small_grid(g, 1);
  const double closed = pi_bar(p, g1);
  const double scanned = oracle::grid_search_single(p, g1, {}, oracle::default_grid(p, g1, o.resolution),
                                                    Constraint::Disabled);
  return make("pi_bar vs grid search", std::abs(closed - scanned), o.resolution,
              fmt("pi_bar = %.9g", closed) + fmt(", scan = %.9g", scanned));
}

CheckResult check_admissibility(const MarketParams& p, const TimeGrid& g) {
  const double bound = admissibility_bound(p, g);
  bool consistent = true;
  try {
    require_admissible(p, g);
    consistent = p.delta < bound;
  } catch (const InadmissibleDelta&) {
    consistent = p.delta >= bound;
  }
  CheckResult r = make("admissibility bound", consistent ? 0.0 : 1.0, 0.0, fmt("b1/k1,N = %.9g", bound));
  return r;
}

// Each CSGP entry against a one-dimensional scan with the closed-form tail.
CheckResult check_csgp_grid(const MarketParams& p, const TimeGrid& g, const Options& o) {
  const TimeGrid gs = small_grid(g, 4);
  if (!admissible(p, gs)) return skipped("CSGP vs grid search", "delta inadmissible");
  const StrategyVector s = csgp(p, gs);
  double worst = 0.0;
  for (int n = 1; n <= gs.n_steps; ++n) {
    const auto at = static_cast<std::size_t>(gs.n_steps - n);
    const std::span<const double> future(s.amounts.data() + at + 1, static_cast<std::size_t>(n - 1));
    const double scanned = oracle::grid_search_single(p, gs, future, oracle::default_grid(p, gs, o.resolution));
    worst = std::max(worst, std::abs(scanned - s.amounts[at]));
  }
  return make("CSGP vs grid search", worst, o.resolution, "N = " + std::to_string(gs.n_steps));
}

CheckResult check_cpc_grid(const MarketParams& p, const TimeGrid& g, const Options& o) {
  const TimeGrid g2 = small_grid(g, 2);
  if (!admissible(p, g2)) return skipped("CPC vs grid search", "delta inadmissible");
  const StrategyVector closed = cpc(p, g2);
  const StrategyVector scanned = oracle::grid_search_cpc(p, g2, oracle::default_grid(p, g2, o.resolution));
  double worst = 0.0;
  for (std::size_t i = 0; i < closed.size(); ++i) worst = std::max(worst, std::abs(closed[i] - scanned[i]));
  return make("CPC vs grid search", worst, o.resolution, "N = " + std::to_string(g2.n_steps));
}

// Binding caps reproduce corr = -delta exactly under enumeration.
CheckResult check_caps_binding(const MarketParams& p, const TimeGrid& g) {
  const TimeGrid gs = small_grid(g, 4);
  if (!admissible(p, gs)) return skipped("caps binding", "delta inadmissible");
  const double bar = pi_bar(p, gs);
  const PathState start = PathState::initial(p);
  double worst = 0.0;
  const StrategyVector s = csgp(p, gs);
  for (int n = 1; n <= gs.n_steps; ++n) {
    const int at = gs.n_steps - n;
    const double corr = oracle::exact_correlation(p, gs, s.view(), at, start);
    const double err = s.amounts[static_cast<std::size_t>(at)] < bar ? std::abs(corr + p.delta)
                                                                       : std::max(0.0, corr + p.delta);
    worst = std::max(worst, err);
  }
  const StrategyVector c = cpc(p, gs);
  const double corr0 = oracle::exact_correlation(p, gs, c.view());
  worst = std::max(worst, c[0] < bar ? std::abs(corr0 + p.delta) : std::max(0.0, corr0 + p.delta));
  return make("caps binding", worst, 1e-6, "N = " + std::to_string(gs.n_steps));
}

CheckResult check_lemma(const Options& o) {
  std::mt19937_64 rng(o.seed);
  std::uniform_int_distribution<int> steps(1, 4);
  std::uniform_int_distribution<int> extra(0, 2);
  std::uniform_real_distribution<double> amount(-2.0, 2.0);
  double worst = 0.0;
  for (int t = 0; t < o.random_sets; ++t) {
    const int n = steps(rng);
    const Draw d = random_market(rng, n + extra(rng));
    std::vector<double> strategy(static_cast<std::size_t>(d.g.n_steps));
    for (double& x : strategy) x = amount(rng);
    const int at = d.g.n_steps - n;
    const std::span<const double> future(strategy.data() + at + 1, static_cast<std::size_t>(n - 1));
    const double closed =
        conditional_correlation(d.p, d.g, strategy[static_cast<std::size_t>(at)],
                                aggregates_for_step(d.p, d.g, future, n));
    const double exact = oracle::exact_correlation(d.p, d.g, strategy, at, PathState::initial(d.p));
    worst = std::max(worst, std::abs(closed - exact));
  }
  return make("correlation closed form vs enumeration", worst, 1e-10,
              std::to_string(o.random_sets) + " random sets");
}

CheckResult check_roots(const Options& o) {
  std::mt19937_64 rng(o.seed + 1);
  std::uniform_int_distribution<int> steps(1, 8);
  std::uniform_real_distribution<double> amount(-2.0, 2.0);
  int failures = 0;
  for (int t = 0; t < o.root_draws; ++t) {
    const int n = steps(rng);
    const Draw d = random_market(rng, n);
    std::vector<double> future(static_cast<std::size_t>(n - 1));
    for (double& x : future) x = amount(rng);
    CorrelationAggregates agg = aggregates_for_step(d.p, d.g, future, n);
    if (t % 2 == 1) agg.b2 = -agg.b2;
    if (!oracle::verify_root_ordering(d.p, d.g, agg).ok) ++failures;
  }
  return make("root ordering", failures, 0.0, std::to_string(o.root_draws) + " draws, half with b2 negated");
}

CheckResult check_moments(const MarketParams& p, const TimeGrid& g) {
  const TimeGrid gm = small_grid(g, 4);
  const int n = gm.n_steps;
  const std::vector<double> zero(static_cast<std::size_t>(n), 0.0);
  const oracle::ExactDistribution dist =
      oracle::enumerate_terminal(p, gm, zero, 0, PathState::initial(p), true);
  const DerivedConstants dc = derive_constants(p, gm);
  const double mean_b = p.b0 * std::pow(dc.mu3_tilde, n);
  const double var_b = p.b0 * p.b0 *
                       (std::pow(dc.mu3_tilde * dc.mu3_tilde + p.sigma3 * p.sigma3 * gm.h, n) -
                        std::pow(dc.mu3_tilde, 2 * n));
  double income_var = 0.0;
  for (int s = 1; s <= n; ++s) income_var += std::exp(2.0 * p.k * gm.time(s));
  income_var *= dc.m_diff * dc.m_diff;
  double worst = std::abs(dist.total_probability() - 1.0);
  worst = std::max(worst, std::abs(dist.mean_index() - mean_b));
  worst = std::max(worst, std::abs(dist.variance_index() - var_b));
  // With no investment, W_N - x0 is the income level.
  worst = std::max(worst, std::abs(dist.variance_wealth() - income_var));
  return make("enumerated moments", worst, 1e-10, "N = " + std::to_string(n));
}

CheckResult check_unconstrained(const MarketParams& p, const TimeGrid& g) {
  const double bar = pi_bar(p, g);
  const StrategyVector a = csgp(p, g, Constraint::Disabled);
  const StrategyVector b = cpc(p, g, Constraint::Disabled);
  const StrategyVector c = unsgp(p, g);
  int mismatches = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != bar || b[i] != bar || c[i] != bar) ++mismatches;
  }
  return make("unconstrained equality", mismatches, 0.0, "N = " + std::to_string(g.n_steps));
}

}  // namespace

bool Report::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::string Report::text() const {
  std::ostringstream os;
  for (const CheckResult& c : checks) {
    char line[256];
    std::snprintf(line, sizeof line, "%-4s %-42s err=%-12.3g tol=%-10.3g ", c.passed ? "PASS" : "FAIL",
                  c.name.c_str(), c.error, c.tolerance);
    os << line << c.detail << '\n';
  }
  const auto passed = std::count_if(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  os << passed << '/' << checks.size() << " checks passed\n";
  return os.str();
}

nlohmann::json Report::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const CheckResult& c : checks) {
    arr.push_back({{"name", c.name},
                   {"passed", c.passed},
                   {"error", std::isfinite(c.error) ? nlohmann::json(c.error) : nlohmann::json(nullptr)},
                   {"tolerance", c.tolerance},
                   {"detail", c.detail}});
  }
  return {{"passed", all_passed()}, {"checks", arr}};
}

Report run(const MarketParams& p, const TimeGrid& g, const Options& o) {
  validate(p, g);
  Report r;
  r.checks.push_back(guarded("pi_bar vs grid search", [&] { return check_pi_bar(p, g, o); }));
  r.checks.push_back(guarded("admissibility bound", [&] { return check_admissibility(p, g); }));
  r.checks.push_back(guarded("CSGP vs grid search", [&] { return check_csgp_grid(p, g, o); }));
  r.checks.push_back(guarded("CPC vs grid search", [&] { return check_cpc_grid(p, g, o); }));
  r.checks.push_back(guarded("caps binding", [&] { return check_caps_binding(p, g); }));
  r.checks.push_back(guarded("correlation closed form vs enumeration", [&] { return check_lemma(o); }));
  r.checks.push_back(guarded("root ordering", [&] { return check_roots(o); }));
  r.checks.push_back(guarded("enumerated moments", [&] { return check_moments(p, g); }));
  r.checks.push_back(guarded("unconstrained equality", [&] { return check_unconstrained(p, g); }));
  return r;
}

}  // namespace corrport::verify
