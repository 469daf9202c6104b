#include "corrport/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include "corrport/errors.hpp"
#include "corrport/philox.hpp"

namespace corrport::mc {

namespace {

Philox4x32::Counter block_for(std::uint64_t seed, std::uint64_t path, std::uint32_t step) {
  const Philox4x32::Counter ctr{static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32), step,
                                0u};
  return Philox4x32::generate(ctr, Philox4x32::key_from_seed(seed));
}

int sign_of(std::uint32_t word) { return (word >> 31) ? 1 : -1; }

// Streaming first and second moments, merged with Chan's pairwise update.
struct Moments {
  double n = 0.0;
  double mean_u = 0.0, m2_u = 0.0;
  double mean_w = 0.0, m2_w = 0.0;
  double mean_b = 0.0, m2_b = 0.0;
  double c_wb = 0.0;

  void add(double u, double w, double b) {
    n += 1.0;
    const double du = u - mean_u;
    mean_u += du / n;
    m2_u += du * (u - mean_u);
    const double dw = w - mean_w;
    const double db = b - mean_b;
    mean_w += dw / n;
    mean_b += db / n;
    m2_w += dw * (w - mean_w);
    m2_b += db * (b - mean_b);
    c_wb += dw * (b - mean_b);
  }

  void merge(const Moments& o) {
    if (o.n == 0.0) return;
    if (n == 0.0) {
      *this = o;
      return;
    }
    const double total = n + o.n;
    const double du = o.mean_u - mean_u;
    const double dw = o.mean_w - mean_w;
    const double db = o.mean_b - mean_b;
    const double f = n * o.n / total;
    m2_u += o.m2_u + du * du * f;
    m2_w += o.m2_w + dw * dw * f;
    m2_b += o.m2_b + db * db * f;
    c_wb += o.c_wb + dw * db * f;
    mean_u += du * o.n / total;
    mean_w += dw * o.n / total;
    mean_b += db * o.n / total;
    n = total;
  }
};

}  // namespace

void SimulationConfig::validate() const {
  if (n_sim < 1) throw InvalidParameter("n_sim must be >= 1");
  if (chunk_size < 1) throw InvalidParameter("chunk_size must be >= 1");
}

int shock_sign(std::uint64_t seed, std::uint64_t path, std::uint32_t step, Process process) {
  return sign_of(block_for(seed, path, step)[static_cast<unsigned>(process)]);
}

ShockVector shock_for(std::uint64_t seed, std::uint64_t path, std::uint32_t step) {
  const auto block = block_for(seed, path, step);
  return {sign_of(block[static_cast<unsigned>(Process::Stock)]),
          sign_of(block[static_cast<unsigned>(Process::Income)]),
          sign_of(block[static_cast<unsigned>(Process::Index)])};
}

namespace {

void check_length(std::span<const double> strategy, const TimeGrid& g) {
  if (strategy.size() != static_cast<std::size_t>(g.n_steps)) {
    throw LengthMismatch("strategy length " + std::to_string(strategy.size()) + " != N = " +
                         std::to_string(g.n_steps));
  }
}

PathState simulate_one(const MarketDynamics& dyn, const PathState& start, std::span<const double> strategy,
                       std::uint64_t seed, std::uint64_t path) {
  PathState st = start;
  const int n_steps = dyn.grid().n_steps;
  for (int t = 0; t < n_steps; ++t) {
    st = dyn.step(st, shock_for(seed, path, static_cast<std::uint32_t>(t)), strategy[static_cast<std::size_t>(t)],
                  t);
  }
  return st;
}

}  // namespace

std::vector<double> terminal_wealths(const MarketParams& p, const TimeGrid& g,
                                     std::span<const double> strategy, std::uint64_t seed,
                                     std::uint64_t first, std::uint64_t count) {
  check_length(strategy, g);
  const MarketDynamics dyn(p, g);
  const PathState start = PathState::initial(p);
  std::vector<double> out(count);
  for (std::uint64_t j = 0; j < count; ++j) {
    const PathState st = simulate_one(dyn, start, strategy, seed, first + j);
    out[j] = st.x + st.i;
  }
  return out;
}

EstimateReport run(const MarketParams& p, const TimeGrid& g, std::span<const double> strategy,
                   const SimulationConfig& config) {
  config.validate();
  check_length(strategy, g);
  const MarketDynamics dyn(p, g);
  const PathState start = PathState::initial(p);
  const double gamma = p.gamma;

  const std::uint64_t n_chunks = (config.n_sim + config.chunk_size - 1) / config.chunk_size;
  std::vector<Moments> partial(n_chunks);
  std::vector<double> wealth(config.n_sim);

  std::atomic<std::uint64_t> next{0};
  auto worker = [&]() {
    for (std::uint64_t c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1)) {
      const std::uint64_t begin = c * config.chunk_size;
      const std::uint64_t end = std::min(config.n_sim, begin + config.chunk_size);
      Moments m;
      for (std::uint64_t path = begin; path < end; ++path) {
        const PathState st = simulate_one(dyn, start, strategy, config.seed, path);
        const double w = st.x + st.i;
        wealth[path] = w;
        m.add(-std::exp(-gamma * w), w, st.b);
      }
      partial[c] = m;
    }
  };

  unsigned threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, n_chunks));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  Moments total;
  for (const Moments& m : partial) total.merge(m);

  EstimateReport r;
  r.n_sim = config.n_sim;
  r.seed = config.seed;
  r.chunk_size = config.chunk_size;
  r.expected_utility = total.mean_u;
  r.utility_stderr = total.n > 1.0 ? std::sqrt(total.m2_u / (total.n - 1.0) / total.n) : 0.0;
  r.mean_wealth = total.mean_w;
  r.p05 = percentile(wealth, 0.05);
  r.median_wealth = percentile(wealth, 0.5);
  r.risk_shortfall = (p.x0 + p.i0) - r.p05;
  r.sample_correlation = (total.m2_w > 0.0 && total.m2_b > 0.0)
                             ? total.c_wb / std::sqrt(total.m2_w * total.m2_b)
                             : std::numeric_limits<double>::quiet_NaN();
  return r;
}

double percentile(std::span<const double> samples, double q) {
  if (samples.empty()) throw InvalidParameter("percentile of an empty sample");
  if (!(q > 0.0 && q < 1.0)) throw InvalidParameter("percentile fraction must lie in (0, 1)");
  std::vector<double> v(samples.begin(), samples.end());
  const double rank = static_cast<double>(v.size() - 1) * q;  // 0-based
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const double frac = rank - static_cast<double>(lo);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const double x_lo = v[lo];
  if (lo + 1 >= v.size() || frac == 0.0) return x_lo;
  const double x_hi = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
  return x_lo + frac * (x_hi - x_lo);
}

double relative_change(double current, double base) {
  if (base == 0.0) throw DomainError("relative change against a zero base");
  return (current - base) / std::abs(base);
}

}  // namespace corrport::mc
