#include "corrport/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "corrport/errors.hpp"

namespace corrport {

namespace {

constexpr double kLeadTolerance = 1e-14;

double square(double v) { return v * v; }

// Sum of exp(p k t_s) over landing indices s = N-n+1 .. N.
double landing_sum(const MarketParams& p, const TimeGrid& g, int n_remaining, double power) {
  double total = 0.0;
  for (int s = g.n_steps - n_remaining + 1; s <= g.n_steps; ++s) {
    total += std::exp(power * p.k * g.time(s));
  }
  return total;
}

std::string fmt_bound(double bound) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", bound);
  return buf;
}

}  // namespace

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::UnSGP: return "UnSGP";
    case StrategyKind::CSGP: return "CSGP";
    case StrategyKind::CPC: return "CPC";
    case StrategyKind::Custom: return "Custom";
  }
  return "Custom";
}

std::optional<StrategyKind> parse_strategy_kind(std::string_view name) {
  for (auto kind : {StrategyKind::UnSGP, StrategyKind::CSGP, StrategyKind::CPC, StrategyKind::Custom}) {
    if (name == to_string(kind)) return kind;
  }
  return std::nullopt;
}

double pi_bar(const MarketParams& p, const TimeGrid& g) {
  if (!(p.sigma1 > 0.0) || !(p.gamma > 0.0) || !(g.h > 0.0)) {
    throw DomainError("pi_bar needs sigma1 > 0, gamma > 0 and h > 0");
  }
  const double sh = std::sqrt(g.h);
  const double x = p.mu1 / p.sigma1 * sh;
  if (!(std::abs(x) < 1.0)) throw DomainError("pi_bar needs |theta sqrt(h)| < 1");
  // ln((1+x)/(1-x)) = 2 atanh(x)
  return std::atanh(x) / (p.gamma * p.sigma1 * sh);
}

double admissibility_bound(const MarketParams& p, const TimeGrid& g) {
  return derive_constants(p, g).admissibility_bound(g.n_steps);
}

void require_admissible(const MarketParams& p, const TimeGrid& g) {
  const double bound = admissibility_bound(p, g);
  if (!(p.delta < bound)) {
    throw InadmissibleDelta("delta = " + fmt_bound(p.delta) + " is not below the admissibility bound b1/k1,N = " +
                                fmt_bound(bound) + " for N = " + std::to_string(g.n_steps),
                            bound);
  }
}

CorrelationAggregates aggregates_for_step(const MarketParams& p, const TimeGrid& g,
                                          std::span<const double> future_strategy,
                                          int n_remaining) {
  if (n_remaining < 1 || n_remaining > g.n_steps) {
    throw InvalidParameter("n_remaining must lie in [1, N]");
  }
  if (future_strategy.size() != static_cast<std::size_t>(n_remaining - 1)) {
    throw LengthMismatch("future strategy has length " + std::to_string(future_strategy.size()) +
                         ", expected n_remaining - 1 = " + std::to_string(n_remaining - 1));
  }
  const DerivedConstants dc = derive_constants(p, g);
  double sum_pi = 0.0;
  double sum_pi_sq = 0.0;
  for (double v : future_strategy) {
    sum_pi += v;
    sum_pi_sq += v * v;
  }
  const double sh = std::sqrt(g.h);
  CorrelationAggregates agg;
  agg.n_remaining = n_remaining;
  agg.b2 = dc.theta3 * (dc.m_diff * p.a32 * landing_sum(p, g, n_remaining, 1.0) +
                        p.sigma1 * p.a31 * sh * sum_pi);
  agg.k2_sq = dc.index_variance_factor(n_remaining) *
              (square(dc.m_diff) * landing_sum(p, g, n_remaining, 2.0) + dc.sigma1_sq_h * sum_pi_sq);
  return agg;
}

CorrelationAggregates income_only_aggregates(const MarketParams& p, const TimeGrid& g) {
  const std::vector<double> zeros(static_cast<std::size_t>(g.n_steps - 1), 0.0);
  return aggregates_for_step(p, g, zeros, g.n_steps);
}

double conditional_correlation(const MarketParams& p, const TimeGrid& g, double pi_now,
                               const CorrelationAggregates& agg) {
  const DerivedConstants dc = derive_constants(p, g);
  const double var = dc.k1_sq(agg.n_remaining) * pi_now * pi_now + agg.k2_sq;
  if (!(var > 0.0)) throw DegenerateVariance("terminal wealth has zero conditional variance");
  return (dc.b1 * pi_now + agg.b2) / std::sqrt(var);
}

QuadraticCap cap_quadratic(const MarketParams& p, const TimeGrid& g,
                           const CorrelationAggregates& agg) {
  const DerivedConstants dc = derive_constants(p, g);
  const double d2 = p.delta * p.delta;
  QuadraticCap q;
  q.lead = square(dc.b1) - dc.k1_sq(agg.n_remaining) * d2;
  q.mid = 2.0 * dc.b1 * agg.b2;
  q.constant = square(agg.b2) - d2 * agg.k2_sq;
  if (!(q.lead > kLeadTolerance)) {
    const double bound = dc.admissibility_bound(agg.n_remaining);
    throw InadmissibleDelta("delta = " + fmt_bound(p.delta) + " is not below b1/k1,n = " + fmt_bound(bound) +
                                " with n = " + std::to_string(agg.n_remaining) + " steps remaining",
                            bound);
  }
  // discriminant / 4 = b2^2 k1^2 d^2 + lead d^2 k2^2 >= 0
  const double disc = std::max(0.0, q.mid * q.mid - 4.0 * q.lead * q.constant);
  const double sq = std::sqrt(disc);
  if (q.mid == 0.0 && sq == 0.0) {
    q.r_left = q.r_right = 0.0;
    return q;
  }
  // Citardauq form avoids cancellation between -mid and sqrt(disc).
  const double t = -0.5 * (q.mid + std::copysign(sq, q.mid));
  const double r1 = t / q.lead;
  const double r2 = q.constant / t;
  q.r_left = std::min(r1, r2);
  q.r_right = std::max(r1, r2);
  return q;
}

double csgp_cap(const MarketParams& p, const TimeGrid& g, const CorrelationAggregates& agg) {
  return cap_quadratic(p, g, agg).r_left;
}

StrategyVector unsgp(const MarketParams& p, const TimeGrid& g) {
  validate(p, g);
  return {std::vector<double>(static_cast<std::size_t>(g.n_steps), pi_bar(p, g)), StrategyKind::UnSGP};
}

StrategyVector csgp(const MarketParams& p, const TimeGrid& g, Constraint constraint) {
  validate(p, g);
  const double unconstrained = pi_bar(p, g);
  const auto n_total = static_cast<std::size_t>(g.n_steps);
  StrategyVector out{std::vector<double>(n_total, unconstrained), StrategyKind::CSGP};
  if (constraint == Constraint::Disabled) return out;

  require_admissible(p, g);
  for (int n = 1; n <= g.n_steps; ++n) {
    const std::size_t at = n_total - static_cast<std::size_t>(n);
    const std::span<const double> tail(out.amounts.data() + at + 1, static_cast<std::size_t>(n - 1));
    const CorrelationAggregates agg = aggregates_for_step(p, g, tail, n);
    out.amounts[at] = std::min(unconstrained, csgp_cap(p, g, agg));
  }
  return out;
}

CpcIntermediates cpc_intermediates(const MarketParams& p, const TimeGrid& g) {
  require_admissible(p, g);
  const DerivedConstants dc = derive_constants(p, g);
  const CorrelationAggregates agg = income_only_aggregates(p, g);
  const double d2 = p.delta * p.delta;
  const double b1_sq = square(dc.b1);
  CpcIntermediates ci;
  ci.a = 1.0 - d2 * dc.k1_sq(g.n_steps) / b1_sq;
  ci.c = agg.b2 / dc.b1;
  ci.eta_sq = agg.k2_sq * d2 / b1_sq;
  ci.b_shift = -ci.c / (ci.a + g.n_steps - 1);
  return ci;
}

StrategyVector cpc(const MarketParams& p, const TimeGrid& g, Constraint constraint) {
  validate(p, g);
  const double unconstrained = pi_bar(p, g);
  const auto n_total = static_cast<std::size_t>(g.n_steps);
  if (constraint == Constraint::Disabled) {
    return {std::vector<double>(n_total, unconstrained), StrategyKind::CPC};
  }
  const CpcIntermediates ci = cpc_intermediates(p, g);
  const double n = g.n_steps;
  const double denom = ci.a + n - 1.0;
  // Lower branch: the feasible equal-weight root lies below b_shift.
  const double value =
      ci.b_shift - std::sqrt(ci.c * ci.c * (1.0 - ci.a) / (n * denom * denom) + ci.eta_sq / (n * denom));
  return {std::vector<double>(n_total, std::min(unconstrained, value)), StrategyKind::CPC};
}

double unconditional_correlation(const MarketParams& p, const TimeGrid& g,
                                 std::span<const double> strategy) {
  if (strategy.size() != static_cast<std::size_t>(g.n_steps)) {
    throw LengthMismatch("strategy length " + std::to_string(strategy.size()) + " != N = " +
                         std::to_string(g.n_steps));
  }
  const CorrelationAggregates agg = aggregates_for_step(p, g, strategy.subspan(1), g.n_steps);
  return conditional_correlation(p, g, strategy[0], agg);
}

namespace {

double single_period_corr_with_scale(const MarketParams& p, const TimeGrid& g, double pi,
                                     double income_scale) {
  const double sh = std::sqrt(g.h);
  const double var = pi * pi * p.sigma1 * p.sigma1 * g.h + income_scale * income_scale;
  if (!(var > 0.0)) throw DegenerateVariance("terminal wealth has zero conditional variance");
  return (pi * p.sigma1 * p.a31 * sh + income_scale * p.a32) / std::sqrt(var);
}

double single_period_cap_with_scale(const MarketParams& p, const TimeGrid& g, double income_scale) {
  validate(p, g);
  if (!(p.delta < p.a31)) {
    throw InadmissibleDelta("single-period constraint needs delta < a31 = " + fmt_bound(p.a31), p.a31);
  }
  const double sh = std::sqrt(g.h);
  const double a31_sq = p.a31 * p.a31;
  const double d2 = p.delta * p.delta;
  return income_scale / (p.sigma1 * sh * (a31_sq - d2)) *
         (-p.a31 * p.a32 - p.delta * std::sqrt(a31_sq + p.a32 * p.a32 - d2));
}

}  // namespace

double single_period_correlation(const MarketParams& p, const TimeGrid& g, double pi) {
  const DerivedConstants dc = derive_constants(p, g);
  return single_period_corr_with_scale(p, g, pi, dc.m_diff * std::exp(p.k * g.horizon()));
}

double single_period_cap(const MarketParams& p, const TimeGrid& g) {
  const DerivedConstants dc = derive_constants(p, g);
  return single_period_cap_with_scale(p, g, dc.m_diff * std::exp(p.k * g.horizon()));
}

double single_period_correlation_half_sum(const MarketParams& p, const TimeGrid& g, double pi) {
  const DerivedConstants dc = derive_constants(p, g);
  return single_period_corr_with_scale(p, g, pi, dc.m_sum * std::exp(p.k * g.horizon()));
}

double single_period_cap_half_sum(const MarketParams& p, const TimeGrid& g) {
  const DerivedConstants dc = derive_constants(p, g);
  return single_period_cap_with_scale(p, g, dc.m_sum * std::exp(p.k * g.horizon()));
}

}  // namespace corrport
