#include "corrport/model.hpp"

#include <cmath>
#include <string>

#include "corrport/errors.hpp"

namespace corrport {

namespace {

void require(bool ok, const std::string& invariant) {
  if (!ok) throw InvalidParameter("invalid parameter: " + invariant);
}

bool finite_all(const MarketParams& p) {
  for (double v : {p.mu1, p.sigma1, p.mu2, p.sigma2, p.k, p.mu3, p.sigma3, p.a31, p.a32,
                   p.gamma, p.delta, p.x0, p.i0, p.b0}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

double index_idiosyncratic_loading(const MarketParams& p) {
  const double rest = 1.0 - p.a31 * p.a31 - p.a32 * p.a32;
  // a31^2 + a32^2 == 1 can come out as -1e-17
  return rest <= 0.0 ? 0.0 : std::sqrt(rest);
}

void validate_dynamics(const MarketParams& p, const TimeGrid& g) {
  require(g.n_steps >= 1, "n_steps >= 1");
  require(std::isfinite(g.h) && g.h > 0.0, "h > 0");
  require(finite_all(p), "all parameters finite");
  require(p.sigma1 >= 0.0 && p.sigma2 >= 0.0 && p.sigma3 >= 0.0, "volatilities >= 0");
  require(p.b0 > 0.0, "b0 > 0");
  require(p.a31 > 0.0, "a31 > 0");
  require(p.a32 > 0.0, "a32 > 0");
  require(p.a31 * p.a31 + p.a32 * p.a32 <= 1.0 + 1e-12, "a31^2 + a32^2 <= 1");

  const double sh = std::sqrt(g.h);
  require(1.0 + p.mu1 * g.h - p.sigma1 * sh > 0.0, "1 + mu1 h - sigma1 sqrt(h) > 0 (stock positivity)");
  require(1.0 + p.mu1 * g.h + p.sigma1 * sh > 0.0, "1 + mu1 h + sigma1 sqrt(h) > 0 (stock positivity)");
  require(1.0 + p.mu3 * g.h > 0.0, "1 + mu3 h > 0");
  const double worst_index =
      1.0 + p.mu3 * g.h - p.sigma3 * sh * (p.a31 + p.a32 + index_idiosyncratic_loading(p));
  require(worst_index > 0.0,
          "1 + mu3 h - sigma3 sqrt(h) (a31 + a32 + a33) > 0 (index positivity)");
}

void validate(const MarketParams& p, const TimeGrid& g) {
  validate_dynamics(p, g);
  require(p.sigma1 > 0.0, "sigma1 > 0");
  require(p.sigma3 > 0.0, "sigma3 > 0");
  require(p.gamma > 0.0, "gamma > 0");
  require(p.delta > 0.0 && p.delta < 1.0, "delta in (0, 1)");
  const double theta_sh = p.mu1 / p.sigma1 * std::sqrt(g.h);
  require(std::abs(theta_sh) < 1.0, "|theta sqrt(h)| < 1");
}

double DerivedConstants::index_variance_factor(int n_remaining) const {
  // expm1/log1p keep precision when theta3 is small
  return std::expm1(n_remaining * std::log1p(theta3 * theta3));
}

double DerivedConstants::k1_sq(int n_remaining) const {
  return index_variance_factor(n_remaining) * sigma1_sq_h;
}

double DerivedConstants::admissibility_bound(int n_remaining) const {
  return b1 / std::sqrt(k1_sq(n_remaining));
}

DerivedConstants derive_constants(const MarketParams& p, const TimeGrid& g) {
  validate(p, g);
  DerivedConstants c;
  const double sh = std::sqrt(g.h);
  c.h = g.h;
  c.n_steps = g.n_steps;
  c.theta = p.mu1 / p.sigma1;
  c.mu3_tilde = 1.0 + g.h * p.mu3;
  c.theta3 = p.sigma3 * sh / c.mu3_tilde;
  c.a33 = index_idiosyncratic_loading(p);
  const double up = std::abs(p.mu2 * g.h + p.sigma2 * sh);
  const double down = std::abs(p.mu2 * g.h - p.sigma2 * sh);
  c.m_sum = 0.5 * (up + down);
  c.m_diff = 0.5 * (up - down);
  c.b1 = c.theta3 * p.sigma1 * p.a31 * sh;
  c.sigma1_sq_h = p.sigma1 * p.sigma1 * g.h;
  return c;
}

MarketDynamics::MarketDynamics(const MarketParams& p, const TimeGrid& g) : params_(p), grid_(g) {
  validate_dynamics(p, g);
  const double sh = std::sqrt(g.h);
  stock_up_ = p.mu1 * g.h + p.sigma1 * sh;
  stock_down_ = p.mu1 * g.h - p.sigma1 * sh;
  income_up_ = std::abs(p.mu2 * g.h + p.sigma2 * sh);
  income_down_ = std::abs(p.mu2 * g.h - p.sigma2 * sh);
  const double a33 = index_idiosyncratic_loading(p);
  for (int code = 0; code < 8; ++code) {
    const double es = (code & 4) ? 1.0 : -1.0;
    const double ei = (code & 2) ? 1.0 : -1.0;
    const double eb = (code & 1) ? 1.0 : -1.0;
    index_factor_[static_cast<std::size_t>(code)] =
        1.0 + p.mu3 * g.h + p.sigma3 * sh * (p.a31 * es + p.a32 * ei + a33 * eb);
  }
  income_scale_.resize(static_cast<std::size_t>(g.n_steps));
  for (int n = 0; n < g.n_steps; ++n) {
    income_scale_[static_cast<std::size_t>(n)] = std::exp(p.k * g.time(n + 1));
  }
}

double MarketDynamics::index_factor(ShockVector e) const {
  const int code = (e.eps_s > 0 ? 4 : 0) | (e.eps_i > 0 ? 2 : 0) | (e.eps_b > 0 ? 1 : 0);
  return index_factor_[static_cast<std::size_t>(code)];
}

PathState MarketDynamics::step(const PathState& state, ShockVector shock, double pi, int n) const {
  const double r = stock_return(shock.eps_s);
  PathState next;
  next.s = state.s * (1.0 + r);
  next.i = state.i + income_increment(n, shock.eps_i);
  next.b = state.b * index_factor(shock);
  next.x = state.x + pi * r;
  return next;
}

PathState step(const MarketParams& p, const TimeGrid& g, const PathState& state,
               ShockVector shock, double pi, int n) {
  if (n < 0 || n >= g.n_steps) throw InvalidParameter("step index outside [0, N)");
  return MarketDynamics(p, g).step(state, shock, pi, n);
}

ScenarioPath simulate_path(const MarketParams& p, const TimeGrid& g,
                           std::span<const double> strategy,
                           std::span<const ShockVector> shocks) {
  const auto n = static_cast<std::size_t>(g.n_steps);
  if (strategy.size() != n) {
    throw LengthMismatch("strategy length " + std::to_string(strategy.size()) +
                         " != N = " + std::to_string(n));
  }
  if (shocks.size() != n) {
    throw LengthMismatch("shock sequence length " + std::to_string(shocks.size()) +
                         " != N = " + std::to_string(n));
  }
  const MarketDynamics dyn(p, g);
  ScenarioPath path;
  path.shocks.assign(shocks.begin(), shocks.end());
  path.s.reserve(n + 1);
  path.i.reserve(n + 1);
  path.b.reserve(n + 1);
  path.x.reserve(n + 1);

  PathState state = PathState::initial(p);
  auto record = [&path](const PathState& st) {
    path.s.push_back(st.s);
    path.i.push_back(st.i);
    path.b.push_back(st.b);
    path.x.push_back(st.x);
  };
  record(state);
  for (std::size_t t = 0; t < n; ++t) {
    const ShockVector& e = shocks[t];
    if (std::abs(e.eps_s) != 1 || std::abs(e.eps_i) != 1 || std::abs(e.eps_b) != 1) {
      throw InvalidParameter("shock components must be exactly +1 or -1");
    }
    state = dyn.step(state, shocks[t], strategy[t], static_cast<int>(t));
    record(state);
  }
  return path;
}

}  // namespace corrport
