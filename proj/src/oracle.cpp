#include "corrport/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "corrport/errors.hpp"
#include "corrport/numeric.hpp"

namespace corrport::oracle {

namespace {

// Variances at rounding level of the mean count as zero.
bool negligible(double variance, double mean) {
  const double scale = 1e-13 * std::max(1.0, std::abs(mean));
  return !(variance > scale * scale);
}

std::size_t ipow(std::size_t base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

ShockVector decode(std::size_t digit, bool include_index) {
  if (include_index) {
    return {(digit & 4) ? 1 : -1, (digit & 2) ? 1 : -1, (digit & 1) ? 1 : -1};
  }
  return {(digit & 2) ? 1 : -1, (digit & 1) ? 1 : -1, 1};
}

// Reusable buffers for repeated enumeration inside the grid searches.
class Enumerator {
 public:
  Enumerator(const MarketParams& p, const TimeGrid& g) : dyn_(p, g), gamma_(p.gamma) {}

  // Fills wealth_/index_ for the remaining steps.
  void run(std::span<const double> strategy, int from_step, const PathState& state,
           bool include_index) {
    const int remaining = dyn_.grid().n_steps - from_step;
    const std::size_t base = include_index ? 8 : 4;
    const std::size_t count = ipow(base, remaining);
    wealth_.resize(count);
    index_.resize(count);
    for (std::size_t code = 0; code < count; ++code) {
      PathState st = state;
      std::size_t rest = code;
      for (int t = from_step; t < dyn_.grid().n_steps; ++t) {
        const ShockVector e = decode(rest % base, include_index);
        rest /= base;
        st = dyn_.step(st, e, strategy[static_cast<std::size_t>(t)], t);
      }
      wealth_[code] = st.x + st.i;
      index_[code] = st.b;
    }
  }

  double mean(const std::vector<double>& v) const {
    return pairwise_sum(v) / static_cast<double>(v.size());
  }

  double expected_utility() {
    scratch_.resize(wealth_.size());
    for (std::size_t j = 0; j < wealth_.size(); ++j) scratch_[j] = -std::exp(-gamma_ * wealth_[j]);
    return mean(scratch_);
  }

  double correlation() {
    const double mw = mean(wealth_);
    const double mb = mean(index_);
    const std::size_t m = wealth_.size();
    scratch_.resize(m);
    std::vector<double>& tmp = scratch_;
    for (std::size_t j = 0; j < m; ++j) tmp[j] = (wealth_[j] - mw) * (index_[j] - mb);
    const double cov = pairwise_sum(tmp);
    for (std::size_t j = 0; j < m; ++j) tmp[j] = (wealth_[j] - mw) * (wealth_[j] - mw);
    const double vw = pairwise_sum(tmp);
    for (std::size_t j = 0; j < m; ++j) tmp[j] = (index_[j] - mb) * (index_[j] - mb);
    const double vb = pairwise_sum(tmp);
    if (negligible(vw, mw) || negligible(vb, mb)) {
      throw DegenerateVariance("zero variance in enumerated terminal law");
    }
    return cov / std::sqrt(vw * vb);
  }

  const std::vector<double>& wealth() const { return wealth_; }
  const std::vector<double>& index() const { return index_; }
  const MarketDynamics& dynamics() const { return dyn_; }

 private:
  MarketDynamics dyn_;
  double gamma_;
  std::vector<double> wealth_, index_, scratch_;
};

void check_strategy_length(std::span<const double> strategy, const TimeGrid& g) {
  if (strategy.size() != static_cast<std::size_t>(g.n_steps)) {
    throw LengthMismatch("strategy length " + std::to_string(strategy.size()) + " != N = " +
                         std::to_string(g.n_steps));
  }
}

// Grid points lower + j*step with j in [j_lo, j_hi].
struct Axis {
  double origin;
  double step;
  long j_lo;
  long j_hi;
  double at(long j) const { return origin + static_cast<double>(j) * step; }
};

Axis make_axis(const GridSpec& spec, double step, double lo, double hi) {
  lo = std::max(lo, spec.lower);
  hi = std::min(hi, spec.upper);
  Axis a{spec.lower, step, 0, 0};
  a.j_lo = static_cast<long>(std::ceil((lo - spec.lower) / step - 1e-9));
  a.j_hi = static_cast<long>(std::floor((hi - spec.lower) / step + 1e-9));
  a.j_lo = std::max(a.j_lo, 0L);
  return a;
}

// Multi-level scan over a box of `dims` coordinates. `score` returns
// -infinity for infeasible points. Ties keep the first point visited.
template <typename Score>
std::vector<double> refine_scan(const GridSpec& spec, int dims, Score&& score) {
  double step = spec.resolution * std::pow(static_cast<double>(spec.refine_factor), spec.levels);
  std::vector<Axis> axes(static_cast<std::size_t>(dims), make_axis(spec, step, spec.lower, spec.upper));
  std::vector<double> best;
  for (int level = 0; level <= spec.levels; ++level) {
    std::vector<long> j(static_cast<std::size_t>(dims));
    for (int d = 0; d < dims; ++d) j[static_cast<std::size_t>(d)] = axes[static_cast<std::size_t>(d)].j_lo;
    std::vector<double> point(static_cast<std::size_t>(dims));
    double best_score = -std::numeric_limits<double>::infinity();
    std::vector<double> level_best;
    bool done = false;
    for (const Axis& a : axes) {
      if (a.j_lo > a.j_hi) done = true;
    }
    while (!done) {
      for (int d = 0; d < dims; ++d) {
        point[static_cast<std::size_t>(d)] = axes[static_cast<std::size_t>(d)].at(j[static_cast<std::size_t>(d)]);
      }
      const double s = score(point);
      if (s > best_score) {
        best_score = s;
        level_best = point;
      }
      int d = dims - 1;
      while (d >= 0) {
        auto& jd = j[static_cast<std::size_t>(d)];
        if (++jd <= axes[static_cast<std::size_t>(d)].j_hi) break;
        jd = axes[static_cast<std::size_t>(d)].j_lo;
        --d;
      }
      if (d < 0) done = true;
    }
    if (level_best.empty()) {
      if (!best.empty()) break;  // keep the coarser incumbent
      throw EmptyFeasibleSet("no grid point satisfies the correlation constraint");
    }
    best = level_best;
    if (level == spec.levels) break;
    const double next = step / spec.refine_factor;
    for (int d = 0; d < dims; ++d) {
      const double c = best[static_cast<std::size_t>(d)];
      axes[static_cast<std::size_t>(d)] = make_axis(spec, next, c - 2.0 * step, c + 2.0 * step);
    }
    step = next;
  }
  return best;
}

}  // namespace

double ExactDistribution::total_probability() const {
  std::vector<double> p(outcomes.size());
  std::transform(outcomes.begin(), outcomes.end(), p.begin(), [](const Outcome& o) { return o.probability; });
  return pairwise_sum(p);
}

namespace {

template <typename F>
double weighted_sum(const std::vector<Outcome>& outcomes, F&& f) {
  std::vector<double> terms(outcomes.size());
  std::transform(outcomes.begin(), outcomes.end(), terms.begin(),
                 [&](const Outcome& o) { return o.probability * f(o); });
  return pairwise_sum(terms);
}

}  // namespace

double ExactDistribution::expected_utility(double gamma) const {
  return weighted_sum(outcomes, [gamma](const Outcome& o) { return -std::exp(-gamma * o.wealth); });
}

double ExactDistribution::mean_wealth() const {
  return weighted_sum(outcomes, [](const Outcome& o) { return o.wealth; });
}

double ExactDistribution::mean_index() const {
  return weighted_sum(outcomes, [](const Outcome& o) { return o.index; });
}

double ExactDistribution::variance_wealth() const {
  const double m = mean_wealth();
  return weighted_sum(outcomes, [m](const Outcome& o) { return (o.wealth - m) * (o.wealth - m); });
}

double ExactDistribution::variance_index() const {
  const double m = mean_index();
  return weighted_sum(outcomes, [m](const Outcome& o) { return (o.index - m) * (o.index - m); });
}

double ExactDistribution::correlation() const {
  const double mw = mean_wealth();
  const double mb = mean_index();
  const double cov = weighted_sum(outcomes, [&](const Outcome& o) { return (o.wealth - mw) * (o.index - mb); });
  const double vw = variance_wealth();
  const double vb = variance_index();
  if (negligible(vw, mw) || negligible(vb, mb)) throw DegenerateVariance("zero variance in enumerated terminal law");
  return cov / std::sqrt(vw * vb);
}

ExactDistribution enumerate_terminal(const MarketParams& p, const TimeGrid& g,
                                     std::span<const double> strategy, int from_step,
                                     const PathState& state, bool include_index) {
  check_strategy_length(strategy, g);
  if (from_step < 0 || from_step > g.n_steps) throw InvalidParameter("from_step outside [0, N]");
  const int remaining = g.n_steps - from_step;
  const int cap = include_index ? kMaxCorrelationSteps : kMaxUtilitySteps;
  if (remaining > cap) {
    throw HorizonTooLarge("enumeration over " + std::to_string(remaining) + " steps exceeds limit " +
                          std::to_string(cap));
  }
  Enumerator en(p, g);
  en.run(strategy, from_step, state, include_index);
  ExactDistribution dist;
  const double prob = 1.0 / static_cast<double>(en.wealth().size());
  dist.outcomes.reserve(en.wealth().size());
  for (std::size_t j = 0; j < en.wealth().size(); ++j) {
    dist.outcomes.push_back({en.wealth()[j], en.index()[j], prob});
  }
  return dist;
}

double exact_expected_utility(const MarketParams& p, const TimeGrid& g,
                              std::span<const double> strategy) {
  check_strategy_length(strategy, g);
  if (g.n_steps > kMaxUtilitySteps) {
    throw HorizonTooLarge("exact expected utility supports N <= " + std::to_string(kMaxUtilitySteps));
  }
  Enumerator en(p, g);
  en.run(strategy, 0, PathState::initial(p), false);
  return en.expected_utility();
}

double exact_correlation(const MarketParams& p, const TimeGrid& g,
                         std::span<const double> strategy, int condition_step,
                         const PathState& state) {
  check_strategy_length(strategy, g);
  if (condition_step < 0 || condition_step >= g.n_steps) {
    throw InvalidParameter("condition_step outside [0, N)");
  }
  if (g.n_steps - condition_step > kMaxCorrelationSteps) {
    throw HorizonTooLarge("exact correlation supports at most " + std::to_string(kMaxCorrelationSteps) +
                          " remaining steps");
  }
  Enumerator en(p, g);
  en.run(strategy, condition_step, state, true);
  return en.correlation();
}

double exact_correlation(const MarketParams& p, const TimeGrid& g,
                         std::span<const double> strategy) {
  return exact_correlation(p, g, strategy, 0, PathState::initial(p));
}

std::vector<double> node_correlations(const MarketParams& p, const TimeGrid& g,
                                      std::span<const double> strategy, int condition_step) {
  check_strategy_length(strategy, g);
  if (g.n_steps > kMaxPrefixSteps) {
    throw HorizonTooLarge("node enumeration supports N <= " + std::to_string(kMaxPrefixSteps));
  }
  if (condition_step < 0 || condition_step >= g.n_steps) {
    throw InvalidParameter("condition_step outside [0, N)");
  }
  const MarketDynamics dyn(p, g);
  const std::size_t nodes = ipow(8, condition_step);
  std::vector<double> out;
  out.reserve(nodes);
  Enumerator en(p, g);
  for (std::size_t code = 0; code < nodes; ++code) {
    PathState st = PathState::initial(p);
    std::size_t rest = code;
    for (int t = 0; t < condition_step; ++t) {
      st = dyn.step(st, decode(rest % 8, true), strategy[static_cast<std::size_t>(t)], t);
      rest /= 8;
    }
    en.run(strategy, condition_step, st, true);
    out.push_back(en.correlation());
  }
  return out;
}

void GridSpec::validate() const {
  if (!(lower < upper)) throw InvalidParameter("grid needs lower < upper");
  if (!(resolution > 0.0)) throw InvalidParameter("grid needs resolution > 0");
  if (refine_factor < 2) throw InvalidParameter("grid needs refine_factor >= 2");
  if (levels < 0) throw InvalidParameter("grid needs levels >= 0");
}

GridSpec default_grid(const MarketParams& p, const TimeGrid& g, double resolution) {
  const double centre = pi_bar(p, g);
  GridSpec spec;
  spec.lower = centre - 5.0;
  spec.upper = centre + 5.0;
  spec.resolution = resolution;
  return spec;
}

double grid_search_single(const MarketParams& p, const TimeGrid& g,
                          std::span<const double> future, const GridSpec& spec,
                          Constraint constraint) {
  spec.validate();
  const int n_remaining = static_cast<int>(future.size()) + 1;
  if (n_remaining > g.n_steps) throw LengthMismatch("future strategy longer than N - 1");
  if (n_remaining > kMaxPrefixSteps) {
    throw HorizonTooLarge("single-date grid search supports at most " + std::to_string(kMaxPrefixSteps) +
                          " remaining steps");
  }
  const int at = g.n_steps - n_remaining;
  std::vector<double> strategy(static_cast<std::size_t>(g.n_steps), 0.0);
  std::copy(future.begin(), future.end(), strategy.begin() + at + 1);

  Enumerator en(p, g);
  const PathState start = PathState::initial(p);
  const bool enforce = constraint == Constraint::Enforced;
  auto score = [&](const std::vector<double>& point) {
    strategy[static_cast<std::size_t>(at)] = point[0];
    en.run(strategy, at, start, enforce);
    if (enforce) {
      double corr;
      try {
        corr = en.correlation();
      } catch (const DegenerateVariance&) {
        return -std::numeric_limits<double>::infinity();
      }
      if (!(corr <= -p.delta)) return -std::numeric_limits<double>::infinity();
    }
    return en.expected_utility();
  };
  return refine_scan(spec, 1, score)[0];
}

StrategyVector grid_search_csgp(const MarketParams& p, const TimeGrid& g, const GridSpec& spec) {
  StrategyVector out{std::vector<double>(static_cast<std::size_t>(g.n_steps), 0.0), StrategyKind::CSGP};
  for (int n = 1; n <= g.n_steps; ++n) {
    const std::size_t at = static_cast<std::size_t>(g.n_steps - n);
    const std::span<const double> future(out.amounts.data() + at + 1, static_cast<std::size_t>(n - 1));
    out.amounts[at] = grid_search_single(p, g, future, spec);
  }
  return out;
}

StrategyVector grid_search_cpc(const MarketParams& p, const TimeGrid& g, const GridSpec& spec,
                               Constraint constraint) {
  spec.validate();
  if (g.n_steps > 3) throw HorizonTooLarge("precommitment grid search supports N <= 3");
  Enumerator en(p, g);
  const PathState start = PathState::initial(p);
  const bool enforce = constraint == Constraint::Enforced;
  auto score = [&](const std::vector<double>& point) {
    en.run(point, 0, start, enforce);
    if (enforce) {
      double corr;
      try {
        corr = en.correlation();
      } catch (const DegenerateVariance&) {
        return -std::numeric_limits<double>::infinity();
      }
      if (!(corr <= -p.delta)) return -std::numeric_limits<double>::infinity();
    }
    return en.expected_utility();
  };
  return {refine_scan(spec, g.n_steps, score), StrategyKind::CPC};
}

double bisect_binding_amount(const MarketParams& p, const TimeGrid& g,
                             std::span<const double> future, double lower, double upper,
                             double tolerance) {
  const int n_remaining = static_cast<int>(future.size()) + 1;
  if (n_remaining > g.n_steps) throw LengthMismatch("future strategy longer than N - 1");
  const int at = g.n_steps - n_remaining;
  std::vector<double> strategy(static_cast<std::size_t>(g.n_steps), 0.0);
  std::copy(future.begin(), future.end(), strategy.begin() + at + 1);
  const PathState start = PathState::initial(p);
  auto excess = [&](double pi) {
    strategy[static_cast<std::size_t>(at)] = pi;
    return exact_correlation(p, g, strategy, at, start) + p.delta;
  };
  const double f_lo = excess(lower);
  const double f_hi = excess(upper);
  if (!(f_lo <= 0.0 && f_hi > 0.0)) {
    throw EmptyFeasibleSet("bisection bracket does not straddle corr = -delta");
  }
  while (upper - lower > tolerance) {
    const double mid = 0.5 * (lower + upper);
    const double f_mid = excess(mid);
    if (f_mid <= 0.0) {
      lower = mid;
    } else {
      upper = mid;
    }
  }
  return lower;
}

RootOrderingReport verify_root_ordering(const MarketParams& p, const TimeGrid& g,
                                        const CorrelationAggregates& agg) {
  const DerivedConstants dc = derive_constants(p, g);
  const QuadraticCap q = cap_quadratic(p, g, agg);
  RootOrderingReport r;
  r.r_left = q.r_left;
  r.r_right = q.r_right;
  r.vertex = -agg.b2 / dc.b1;
  r.q_at_vertex = q(r.vertex);
  const double slack = 1e-12 * std::max({1.0, std::abs(q.r_left), std::abs(q.r_right)});
  if (!(r.r_left <= r.vertex + slack)) r.failures.push_back("r_left > -b2/b1");
  if (!(r.vertex <= r.r_right + slack)) r.failures.push_back("-b2/b1 > r_right");
  const double q_scale = std::max({std::abs(q.lead * r.vertex * r.vertex), std::abs(q.mid * r.vertex),
                                   std::abs(q.constant), 1e-300});
  if (!(r.q_at_vertex <= 1e-12 * q_scale)) r.failures.push_back("Q(-b2/b1) > 0");
  r.ok = r.failures.empty();
  return r;
}

}  // namespace corrport::oracle
