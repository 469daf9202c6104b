#pragma once

#include <cmath>
#include <random>

#include "corrport/errors.hpp"
#include "corrport/model.hpp"
#include "corrport/strategies.hpp"

namespace testing_support {

struct Draw {
  corrport::MarketParams p;
  corrport::TimeGrid g;
};

// Random valid market on an n-step grid with delta strictly inside the
// admissible range.
inline Draw random_market(std::mt19937_64& rng, int n_steps) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto in = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  for (;;) {
    Draw d;
    auto& p = d.p;
    d.g = {n_steps, u(rng) < 0.5 ? 1.0 : 0.25};
    p.mu1 = in(-0.15, 0.15);
    p.sigma1 = in(0.05, 0.45);
    p.mu2 = in(0.0, 0.08);
    p.sigma2 = in(0.01, 0.25);
    p.k = in(-0.1, 0.1);
    p.mu3 = in(-0.02, 0.10);
    p.sigma3 = in(0.05, 0.35);
    p.a31 = in(0.2, 0.8);
    p.a32 = in(0.05, 0.95) * std::sqrt(1.0 - p.a31 * p.a31);
    p.gamma = in(0.1, 3.0);
    p.x0 = in(0.5, 2.0);
    p.i0 = in(0.5, 2.0);
    p.b0 = in(0.5, 2.0);
    p.delta = 0.5;
    try {
      corrport::validate_dynamics(p, d.g);
      p.delta = in(0.01, 0.99) * corrport::admissibility_bound(p, d.g);
      corrport::validate(p, d.g);
      return d;
    } catch (const corrport::Error&) {
    }
  }
}

inline corrport::MarketParams table1() { return corrport::MarketParams::table1(); }

}  // namespace testing_support
