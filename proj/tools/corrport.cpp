// Command-line front end: strategy, simulate, sweep and verify.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "corrport/errors.hpp"
#include "corrport/harness.hpp"
#include "corrport/montecarlo.hpp"
#include "corrport/strategies.hpp"
#include "corrport/verify.hpp"

namespace {

using namespace corrport;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitParams = 3;
constexpr int kExitVerify = 4;
constexpr int kExitOther = 1;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> nsim;
  std::optional<unsigned> threads;
  std::string out;
  std::string format;
};

harness::ExperimentConfig load(const Overrides& o) {
  harness::ExperimentConfig c = harness::load_config(o.config);
  if (o.seed) c.simulation.seed = *o.seed;
  if (o.nsim) {
    if (*o.nsim < 1) throw ConfigError("--nsim must be >= 1");
    c.simulation.n_sim = *o.nsim;
  }
  if (o.threads) c.simulation.threads = *o.threads;
  if (!o.out.empty()) c.output_path = o.out;
  if (!o.format.empty()) {
    const auto f = harness::parse_output_format(o.format);
    if (!f) throw ConfigError("--format must be csv or json");
    c.format = *f;
  }
  return c;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << text;
  if (!out.flush()) throw Error("write to '" + path + "' failed");
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "output path ('-' for stdout)");
  cmd->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
}

void add_simulation(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "64-bit seed");
  cmd->add_option("--nsim", o.nsim, "number of simulated paths");
  cmd->add_option("--threads", o.threads, "worker threads (0 = all cores)");
}

int cmd_strategy(const Overrides& o) {
  const harness::ExperimentConfig c = load(o);
  validate(c.market, c.grid);
  json doc = json::object();
  std::string csv = "strategy,step,amount\n";
  for (StrategyKind kind : c.strategies) {
    const StrategyVector s = harness::compute_strategy(kind, c.market, c.grid);
    json amounts = json::array();
    for (std::size_t i = 0; i < s.size(); ++i) {
      amounts.push_back(s[i]);
      csv += std::string(to_string(kind)) + ',' + std::to_string(i) + ',' + harness::format_number(s[i]) + '\n';
    }
    doc[std::string(to_string(kind))] = amounts;
  }
  write_text(o.out, c.format == harness::OutputFormat::Json ? doc.dump(2) + "\n" : csv);
  return kExitOk;
}

int cmd_simulate(const Overrides& o, const std::string& strategy_name) {
  const harness::ExperimentConfig c = load(o);
  validate(c.market, c.grid);
  StrategyKind kind = c.strategies.front();
  if (!strategy_name.empty()) {
    const auto parsed = parse_strategy_kind(strategy_name);
    if (!parsed || *parsed == StrategyKind::Custom) throw ConfigError("--strategy must be UnSGP, CSGP or CPC");
    kind = *parsed;
  }
  const StrategyVector s = harness::compute_strategy(kind, c.market, c.grid);
  const mc::EstimateReport r = mc::run(c.market, c.grid, s.view(), c.simulation);
  const auto num = harness::format_number;
  std::string text;
  if (c.format == harness::OutputFormat::Json) {
    json doc = {{"strategy", to_string(kind)},
                {"expected_utility", r.expected_utility},
                {"utility_stderr", r.utility_stderr},
                {"mean_wealth", r.mean_wealth},
                {"median_wealth", r.median_wealth},
                {"p05", r.p05},
                {"risk_shortfall", r.risk_shortfall},
                {"sample_correlation", std::isfinite(r.sample_correlation) ? json(r.sample_correlation) : json()},
                {"n_sim", r.n_sim},
                {"seed", r.seed},
                {"chunk_size", r.chunk_size}};
    text = doc.dump(2) + "\n";
  } else {
    text = "strategy,expected_utility,utility_stderr,mean_wealth,median_wealth,p05,risk_shortfall,"
           "sample_correlation,n_sim,seed,chunk_size\n" +
           std::string(to_string(kind)) + ',' + num(r.expected_utility) + ',' + num(r.utility_stderr) + ',' +
           num(r.mean_wealth) + ',' + num(r.median_wealth) + ',' + num(r.p05) + ',' + num(r.risk_shortfall) +
           ',' + num(r.sample_correlation) + ',' + std::to_string(r.n_sim) + ',' + std::to_string(r.seed) + ',' +
           std::to_string(r.chunk_size) + '\n';
  }
  write_text(o.out, text);
  return kExitOk;
}

int cmd_sweep(const Overrides& o) {
  const harness::ExperimentConfig c = load(o);
  if (!c.sweep) throw ConfigError("config: the sweep command needs a sweep section");
  const auto rows = harness::run_config(c);
  if (c.output_path.empty() || c.output_path == "-") {
    std::cout << harness::format_rows(rows, c.format);
  } else {
    harness::emit(rows, c.format, c.output_path);
    std::cerr << "wrote " << rows.size() << " rows to " << c.output_path << '\n';
  }
  return kExitOk;
}

int cmd_verify(const Overrides& o, std::uint64_t seed) {
  const harness::ExperimentConfig c = load(o);
  verify::Options opts;
  opts.seed = seed;
  const verify::Report report = verify::run(c.market, c.grid, opts);
  std::cout << report.text();
  if (!o.out.empty()) write_text(o.out, report.to_json().dump(2) + "\n");
  return report.all_passed() ? kExitOk : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Correlation-constrained portfolio strategies: closed forms, oracle and simulation"};
  app.require_subcommand(1);

  Overrides strat_o, sim_o, sweep_o, verify_o;
  std::string strategy_name;
  std::uint64_t verify_seed = 0;

  auto* strategy = app.add_subcommand("strategy", "print the strategy vectors for a config");
  add_common(strategy, strat_o);

  auto* simulate = app.add_subcommand("simulate", "simulate one strategy and print its estimate report");
  add_common(simulate, sim_o);
  add_simulation(simulate, sim_o);
  simulate->add_option("--strategy", strategy_name, "UnSGP, CSGP or CPC (default: first in config)");

  auto* sweep = app.add_subcommand("sweep", "run the configured parameter sweep");
  add_common(sweep, sweep_o);
  add_simulation(sweep, sweep_o);

  auto* verify_cmd = app.add_subcommand("verify", "check closed forms against the enumeration oracle");
  verify_cmd->add_option("--config", verify_o.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
  verify_cmd->add_option("--out", verify_o.out, "JSON result file");
  verify_cmd->add_option("--seed", verify_seed, "seed for the random draws");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*strategy) return cmd_strategy(strat_o);
    if (*simulate) return cmd_simulate(sim_o, strategy_name);
    if (*sweep) return cmd_sweep(sweep_o);
    if (*verify_cmd) return cmd_verify(verify_o, verify_seed);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InadmissibleDelta& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParams;
  } catch (const InvalidParameter& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParams;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOk;
}
