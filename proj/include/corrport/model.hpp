#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace corrport {

/// Exogenous market coefficients. Rates are per unit time, volatilities
/// per square-root time; `gamma` is absolute risk aversion.
struct MarketParams {
  double mu1 = 0.07;     // stock drift
  double sigma1 = 0.30;  // stock volatility
  double mu2 = 0.03;     // income drift
  double sigma2 = 0.10;  // income volatility
  double k = 0.0;        // income growth exponent
  double mu3 = 0.05;     // index drift
  double sigma3 = 0.25;  // index volatility
  double a31 = 0.6;      // index loading on the stock shock
  double a32 = 0.6;      // index loading on the income shock
  double gamma = 0.5;
  double delta = 0.09;   // correlation bound, constraint is corr <= -delta
  double x0 = 1.0;
  double i0 = 1.0;
  double b0 = 1.0;

  /// Parameter set used for the reference experiments (N = 8, h = 1).
  static MarketParams table1() { return MarketParams{}; }
};

struct TimeGrid {
  int n_steps = 8;
  double h = 1.0;

  double time(int n) const { return n * h; }
  double horizon() const { return n_steps * h; }
};

/// Checks only what path simulation needs: loadings form a unit vector and
/// every one-step growth factor of stock and index is positive for all
/// shock signs. Zero volatilities are allowed here.
void validate_dynamics(const MarketParams& p, const TimeGrid& g);

/// Full check used before any strategy formula: dynamics plus
/// sigma1, sigma3, gamma > 0, delta in (0,1) and |theta sqrt(h)| < 1.
void validate(const MarketParams& p, const TimeGrid& g);

/// a33 completing (a31, a32, a33) to a unit vector.
double index_idiosyncratic_loading(const MarketParams& p);

struct DerivedConstants {
  double h = 1.0;
  int n_steps = 1;
  double theta = 0.0;       // mu1 / sigma1
  double mu3_tilde = 1.0;   // 1 + h mu3
  double theta3 = 0.0;      // sigma3 sqrt(h) / mu3_tilde
  double a33 = 0.0;
  double m_sum = 0.0;       // half-sum of the two income increment sizes
  double m_diff = 0.0;      // half-difference; the income/shock covariance
  double b1 = 0.0;          // theta3 sigma1 a31 sqrt(h)
  double sigma1_sq_h = 0.0;

  /// [(1 + theta3^2)^n - 1] sigma1^2 h for n steps remaining.
  double k1_sq(int n_remaining) const;
  /// (1 + theta3^2)^n - 1, the common variance factor of k1_sq and k2_sq.
  double index_variance_factor(int n_remaining) const;
  /// b1 / k1(n): largest admissible delta with n steps remaining.
  double admissibility_bound(int n_remaining) const;
};

DerivedConstants derive_constants(const MarketParams& p, const TimeGrid& g);

/// One step of the three Rademacher walks, each component exactly +/-1.
struct ShockVector {
  int eps_s = 1;
  int eps_i = 1;
  int eps_b = 1;
};

struct PathState {
  double s = 1.0;  // stock price
  double i = 1.0;  // income level
  double b = 1.0;  // index level
  double x = 1.0;  // investment wealth

  static PathState initial(const MarketParams& p) { return {1.0, p.i0, p.b0, p.x0}; }
};

/// Precomputed one-step coefficients for a fixed market and grid.
///
/// The income increment over [t_n, t_{n+1}] is scaled by exp(k t_{n+1}),
/// i.e. by the landing time of the step.
class MarketDynamics {
 public:
  MarketDynamics(const MarketParams& p, const TimeGrid& g);

  PathState step(const PathState& state, ShockVector shock, double pi, int n) const;

  /// Income increment at step n for income shock `eps_i`.
  double income_increment(int n, int eps_i) const {
    return income_scale_[static_cast<std::size_t>(n)] * (eps_i > 0 ? income_up_ : income_down_);
  }
  /// Per-unit-investment return at a step, mu1 h + sigma1 sqrt(h) eps.
  double stock_return(int eps_s) const { return eps_s > 0 ? stock_up_ : stock_down_; }
  /// Index growth factor 1 + mu3 h + sigma3 sqrt(h) (a31 es + a32 ei + a33 eb).
  double index_factor(ShockVector e) const;

  const MarketParams& params() const { return params_; }
  const TimeGrid& grid() const { return grid_; }

 private:
  MarketParams params_;
  TimeGrid grid_;
  double stock_up_ = 0.0;
  double stock_down_ = 0.0;
  double income_up_ = 0.0;
  double income_down_ = 0.0;
  std::array<double, 8> index_factor_{};
  std::vector<double> income_scale_;
};

/// Free-function form of one step; builds the coefficients each call.
PathState step(const MarketParams& p, const TimeGrid& g, const PathState& state,
               ShockVector shock, double pi, int n);

struct ScenarioPath {
  std::vector<ShockVector> shocks;
  std::vector<double> s, i, b, x;

  double terminal_wealth() const { return x.back() + i.back(); }
};

ScenarioPath simulate_path(const MarketParams& p, const TimeGrid& g,
                           std::span<const double> strategy,
                           std::span<const ShockVector> shocks);

}  // namespace corrport
