#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "corrport/model.hpp"

namespace corrport {

enum class StrategyKind { UnSGP, CSGP, CPC, Custom };

std::string_view to_string(StrategyKind kind);
std::optional<StrategyKind> parse_strategy_kind(std::string_view name);

/// Deterministic wealth amount invested in the stock at each trading date
/// t_0 .. t_{N-1}.
struct StrategyVector {
  std::vector<double> amounts;
  StrategyKind kind = StrategyKind::Custom;

  std::size_t size() const { return amounts.size(); }
  double operator[](std::size_t i) const { return amounts[i]; }
  std::span<const double> view() const { return amounts; }
};

/// Whether the correlation constraint takes part in the optimization.
enum class Constraint { Enforced, Disabled };

/// Strategy-dependent parts of the conditional correlation with
/// `n_remaining` steps to go: the covariance-side sum `b2` and the
/// variance-side sum `k2_sq`, both absorbing the already-fixed future
/// investments.
struct CorrelationAggregates {
  double b2 = 0.0;
  double k2_sq = 0.0;
  int n_remaining = 1;
};

/// Q(x) = lead x^2 + mid x + constant, whose left root caps the investment.
struct QuadraticCap {
  double lead = 0.0;
  double mid = 0.0;
  double constant = 0.0;
  double r_left = 0.0;
  double r_right = 0.0;

  double operator()(double x) const { return (lead * x + mid) * x + constant; }
};

/// Building blocks of the equal-weight precommitment solution.
struct CpcIntermediates {
  double a = 0.0;       // 1 - delta^2 k1^2 / b1^2
  double c = 0.0;       // b2 / b1 with the income-only b2
  double eta_sq = 0.0;  // k2^2 delta^2 / b1^2
  double b_shift = 0.0; // -c / (a + N - 1)
};

/// Unconstrained optimal amount, constant over all dates.
double pi_bar(const MarketParams& p, const TimeGrid& g);

/// Largest admissible delta for the whole horizon, b1 / k_{1,N}.
double admissibility_bound(const MarketParams& p, const TimeGrid& g);

/// Throws InadmissibleDelta unless delta < admissibility_bound(p, g).
void require_admissible(const MarketParams& p, const TimeGrid& g);

/// Aggregates with `n_remaining` steps left, given the already-decided
/// amounts for the later dates (length n_remaining - 1).
CorrelationAggregates aggregates_for_step(const MarketParams& p, const TimeGrid& g,
                                          std::span<const double> future_strategy,
                                          int n_remaining);

/// Aggregates at n_remaining = N with no investment after t_0: the income
/// contribution only.
CorrelationAggregates income_only_aggregates(const MarketParams& p, const TimeGrid& g);

/// corr(W_N, B_N | F_{N-n}) = (b1 pi + b2) / sqrt(k1_sq(n) pi^2 + k2_sq).
double conditional_correlation(const MarketParams& p, const TimeGrid& g, double pi_now,
                               const CorrelationAggregates& agg);

QuadraticCap cap_quadratic(const MarketParams& p, const TimeGrid& g,
                           const CorrelationAggregates& agg);

/// Left root of the cap quadratic: the largest investment meeting the
/// constraint at this step.
double csgp_cap(const MarketParams& p, const TimeGrid& g, const CorrelationAggregates& agg);

StrategyVector unsgp(const MarketParams& p, const TimeGrid& g);

/// Constrained subgame perfect strategy by backward induction.
StrategyVector csgp(const MarketParams& p, const TimeGrid& g,
                    Constraint constraint = Constraint::Enforced);

CpcIntermediates cpc_intermediates(const MarketParams& p, const TimeGrid& g);

/// Constrained precommitment strategy (equal amounts on every date).
StrategyVector cpc(const MarketParams& p, const TimeGrid& g,
                   Constraint constraint = Constraint::Enforced);

/// Time-0 correlation of terminal wealth and index for a deterministic
/// strategy.
double unconditional_correlation(const MarketParams& p, const TimeGrid& g,
                                 std::span<const double> strategy);

// Last-step (single period) forms. The income scale is the half-difference
// m_diff times exp(k T); these agree with the n = 1 multi-period formulas.
double single_period_correlation(const MarketParams& p, const TimeGrid& g, double pi);
double single_period_cap(const MarketParams& p, const TimeGrid& g);

// Compatibility variants using the half-sum m_sum as income scale. They do
// not produce a binding correlation and are never used by csgp().
double single_period_correlation_half_sum(const MarketParams& p, const TimeGrid& g, double pi);
double single_period_cap_half_sum(const MarketParams& p, const TimeGrid& g);

}  // namespace corrport
