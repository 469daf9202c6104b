#pragma once

#include <span>
#include <string>
#include <vector>

#include "corrport/model.hpp"
#include "corrport/strategies.hpp"

/// Brute-force ground truth. Everything here enumerates the finite sample
/// space of the +/-1 shocks and never calls the closed-form correlation or
/// strategy formulas, so it can be used to check them.
namespace corrport::oracle {

struct Outcome {
  double wealth = 0.0;  // W_N = X_N + I_N
  double index = 0.0;   // B_N
  double probability = 0.0;
};

struct ExactDistribution {
  std::vector<Outcome> outcomes;

  double total_probability() const;
  double expected_utility(double gamma) const;
  double mean_wealth() const;
  double mean_index() const;
  double variance_wealth() const;
  double variance_index() const;
  /// Pearson correlation of (W_N, B_N); throws DegenerateVariance.
  double correlation() const;
};

/// Enumerates steps `from_step` .. N-1 starting from `state`. With
/// `include_index` every (eps_s, eps_i, eps_b) triple is visited (8^n
/// outcomes); otherwise the index shock is fixed at +1 and only the
/// wealth-relevant 4^n outcomes are produced. `strategy` has length N;
/// entries before `from_step` are unused.
ExactDistribution enumerate_terminal(const MarketParams& p, const TimeGrid& g,
                                     std::span<const double> strategy, int from_step,
                                     const PathState& state, bool include_index);

inline constexpr int kMaxUtilitySteps = 10;
inline constexpr int kMaxCorrelationSteps = 6;
inline constexpr int kMaxPrefixSteps = 4;

/// E[-exp(-gamma W_N)] at time 0 by enumeration (N <= 10).
double exact_expected_utility(const MarketParams& p, const TimeGrid& g,
                              std::span<const double> strategy);

/// corr(W_N, B_N | state at `condition_step`) by enumeration of the
/// remaining steps (N - condition_step <= 6).
double exact_correlation(const MarketParams& p, const TimeGrid& g,
                         std::span<const double> strategy, int condition_step,
                         const PathState& state);

/// Time-0 correlation by enumeration.
double exact_correlation(const MarketParams& p, const TimeGrid& g,
                         std::span<const double> strategy);

/// Conditional correlation at every node reachable at `condition_step`,
/// one entry per prefix shock history (8^condition_step nodes, N <= 4).
std::vector<double> node_correlations(const MarketParams& p, const TimeGrid& g,
                                      std::span<const double> strategy, int condition_step);

/// Scan box for the grid searches. The scan starts at step
/// resolution * refine_factor^levels over [lower, upper] and then refines
/// `levels` times around the incumbent, dividing the step by refine_factor.
struct GridSpec {
  double lower = -5.0;
  double upper = 5.0;
  double resolution = 1e-4;
  int refine_factor = 100;
  int levels = 2;

  void validate() const;
};

/// [pi_bar - 5, pi_bar + 5] at the given resolution.
GridSpec default_grid(const MarketParams& p, const TimeGrid& g, double resolution);

/// Best amount at date t_{N-n} with n = future.size() + 1 steps left, the
/// later dates fixed to `future`: maximizes the enumerated conditional
/// expected utility over grid points whose enumerated conditional
/// correlation is <= -delta. n <= 4.
double grid_search_single(const MarketParams& p, const TimeGrid& g,
                          std::span<const double> future, const GridSpec& spec,
                          Constraint constraint = Constraint::Enforced);

/// Backward induction with grid_search_single at every date.
StrategyVector grid_search_csgp(const MarketParams& p, const TimeGrid& g, const GridSpec& spec);

/// Best deterministic strategy over an N-dimensional grid (N <= 3) under
/// the enumerated time-0 correlation constraint.
StrategyVector grid_search_cpc(const MarketParams& p, const TimeGrid& g, const GridSpec& spec,
                               Constraint constraint = Constraint::Enforced);

/// Bisection for the amount at which the enumerated conditional
/// correlation equals -delta, on [lower, upper] where the correlation is
/// increasing in pi.
double bisect_binding_amount(const MarketParams& p, const TimeGrid& g,
                             std::span<const double> future, double lower, double upper,
                             double tolerance = 1e-12);

struct RootOrderingReport {
  bool ok = true;
  double r_left = 0.0;
  double vertex = 0.0;  // -b2 / b1
  double r_right = 0.0;
  double q_at_vertex = 0.0;
  std::vector<std::string> failures;
};

/// Checks r_left <= -b2/b1 <= r_right and Q(-b2/b1) <= 0.
RootOrderingReport verify_root_ordering(const MarketParams& p, const TimeGrid& g,
                                        const CorrelationAggregates& agg);

}  // namespace corrport::oracle
