#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "corrport/model.hpp"
#include "corrport/montecarlo.hpp"
#include "corrport/strategies.hpp"

namespace corrport::harness {

enum class SweepVariable { Delta, NSteps, Sigma13 };
enum class OutputFormat { Csv, Json };

std::string_view to_string(SweepVariable v);
std::string_view to_string(OutputFormat f);
std::optional<SweepVariable> parse_sweep_variable(std::string_view name);
std::optional<OutputFormat> parse_output_format(std::string_view name);

struct Sweep {
  SweepVariable variable = SweepVariable::Delta;
  std::vector<double> values;
};

struct ExperimentConfig {
  MarketParams market;
  TimeGrid grid;
  mc::SimulationConfig simulation;
  std::optional<Sweep> sweep;
  std::vector<StrategyKind> strategies;
  std::string output_path;
  OutputFormat format = OutputFormat::Csv;
};

/// Parses the JSON config document. Throws ConfigError on missing or
/// malformed fields.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& config);

enum class RowStatus { Ok, Skipped, Error };
std::string_view to_string(RowStatus s);

struct SweepRow {
  SweepVariable variable = SweepVariable::Delta;
  double value = 0.0;
  StrategyKind kind = StrategyKind::Custom;
  RowStatus status = RowStatus::Ok;
  std::string note;  // skip or error reason
  std::vector<double> amounts;
  double expected_utility = 0.0;
  double utility_stderr = 0.0;
  double p05 = 0.0;
  double risk_shortfall = 0.0;
  double sample_correlation = 0.0;
  double rho_unconstrained = 0.0;  // time-0 corr of W and B under pi_bar; sigma sweep only
  double rel_utility = 0.0;
  double rel_risk = 0.0;
  bool is_base = false;
};

/// Strategy of the requested kind for the given market.
StrategyVector compute_strategy(StrategyKind kind, const MarketParams& p, const TimeGrid& g);

/// Runs every (sweep value, strategy) pair. Inadmissible constrained pairs
/// become Skipped rows naming the bound. Throws InadmissibleDelta if no
/// row could be computed.
std::vector<SweepRow> run_config(const ExperimentConfig& config);

/// sigma1 = sigma3 = value for every sweep value; relative changes are
/// taken against the row with the smallest unconstrained correlation.
std::vector<SweepRow> sigma_sweep(const ExperimentConfig& config);

void write_csv(std::ostream& os, const std::vector<SweepRow>& rows);
nlohmann::json rows_to_json(const std::vector<SweepRow>& rows);
std::vector<SweepRow> rows_from_json(const nlohmann::json& doc);
std::string format_rows(const std::vector<SweepRow>& rows, OutputFormat format);

/// Writes the rows to `path`. Throws on empty input or I/O failure.
void emit(const std::vector<SweepRow>& rows, OutputFormat format, const std::string& path);

std::string format_number(double v);

}  // namespace corrport::harness
