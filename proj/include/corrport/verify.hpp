#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "corrport/model.hpp"

namespace corrport::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  double error = 0.0;      // largest observed deviation
  double tolerance = 0.0;
  std::string detail;
};

struct Report {
  std::vector<CheckResult> checks;

  bool all_passed() const;
  std::string text() const;
  nlohmann::json to_json() const;
};

struct Options {
  double resolution = 1e-4;     // grid-search step
  int random_sets = 100;        // random draws for the enumeration comparison
  int root_draws = 10'000;
  std::uint64_t seed = 0;
};

/// Runs the oracle suite on `p`: closed forms against enumeration and grid
/// search on small horizons (N <= 4 regardless of the configured grid,
/// which is used for the admissibility and moment checks).
Report run(const MarketParams& p, const TimeGrid& g, const Options& options = {});

}  // namespace corrport::verify
