#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "corrport/model.hpp"

namespace corrport::mc {

struct SimulationConfig {
  std::uint64_t n_sim = 1'000'000;
  std::uint64_t seed = 0;
  std::uint64_t chunk_size = 65'536;
  /// Worker threads; 0 means hardware concurrency. Never affects results.
  unsigned threads = 0;

  void validate() const;
};

struct EstimateReport {
  double expected_utility = 0.0;  // mean of -exp(-gamma W_N)
  double utility_stderr = 0.0;
  double mean_wealth = 0.0;
  double median_wealth = 0.0;
  double p05 = 0.0;               // 5th percentile of W_N
  double risk_shortfall = 0.0;    // (x0 + i0) - p05
  double sample_correlation = 0.0;  // Pearson corr(W_N, B_N); NaN if degenerate
  std::uint64_t n_sim = 0;
  std::uint64_t seed = 0;
  std::uint64_t chunk_size = 0;
};

/// Process tags selecting the output word of the per-(path, step) block.
enum class Process : unsigned { Stock = 0, Income = 1, Index = 2 };

/// Fair +/-1 draw for one process, keyed by (seed, path, step, process).
int shock_sign(std::uint64_t seed, std::uint64_t path, std::uint32_t step, Process process);

/// All three shocks of one (path, step).
ShockVector shock_for(std::uint64_t seed, std::uint64_t path, std::uint32_t step);

/// Simulates n_sim independent paths of the strategy and summarizes W_N.
/// Bit-identical for equal (seed, n_sim, chunk_size) whatever the thread
/// count.
EstimateReport run(const MarketParams& p, const TimeGrid& g, std::span<const double> strategy,
                   const SimulationConfig& config);

/// Terminal wealths of paths [first, first + count) in path order.
std::vector<double> terminal_wealths(const MarketParams& p, const TimeGrid& g,
                                     std::span<const double> strategy, std::uint64_t seed,
                                     std::uint64_t first, std::uint64_t count);

/// Linear-interpolation order statistic at rank (m - 1) q + 1 of the
/// sorted samples.
double percentile(std::span<const double> samples, double q);

/// (current - base) / |base|.
double relative_change(double current, double base);

}  // namespace corrport::mc
