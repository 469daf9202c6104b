#include "corrport/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "corrport/errors.hpp"

namespace corrport::harness {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const json& require_field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ConfigError("config: missing field '" + where + "." + key + "'");
  }
  return obj.at(key);
}

double number_field(const json& obj, const char* key, const std::string& where) {
  const json& v = require_field(obj, key, where);
  if (!v.is_number()) throw ConfigError("config: field '" + where + "." + key + "' must be a number");
  return v.get<double>();
}

std::uint64_t count_field(const json& obj, const char* key, const std::string& where) {
  const json& v = require_field(obj, key, where);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0.0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
  }
  throw ConfigError("config: field '" + where + "." + key + "' must be a non-negative integer");
}

std::string join_amounts(const std::vector<double>& amounts) {
  std::string out;
  for (std::size_t i = 0; i < amounts.size(); ++i) {
    if (i) out += ';';
    out += format_number(amounts[i]);
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

// Round to the emitted precision so JSON and CSV carry the same values.
double rounded(double v) {
  if (!std::isfinite(v)) return v;
  return std::strtod(format_number(v).c_str(), nullptr);
}

json number_or_null(double v) { return std::isfinite(v) ? json(rounded(v)) : json(nullptr); }

double number_from(const json& v) { return v.is_null() ? kNaN : v.get<double>(); }

std::string describe(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void apply(SweepVariable variable, double value, MarketParams& p, TimeGrid& g) {
  switch (variable) {
    case SweepVariable::Delta: p.delta = value; break;
    case SweepVariable::NSteps:
      if (!(value >= 1.0) || value != std::floor(value)) {
        throw InvalidParameter("n_steps sweep value must be a positive integer");
      }
      g.n_steps = static_cast<int>(value);
      break;
    case SweepVariable::Sigma13:
      p.sigma1 = value;
      p.sigma3 = value;
      break;
  }
}

int kind_rank(StrategyKind k) { return static_cast<int>(k); }

std::vector<SweepRow> run_rows(const ExperimentConfig& config, const Sweep& sweep) {
  if (sweep.values.empty()) throw ConfigError("config: sweep.values is empty");
  if (config.strategies.empty()) throw ConfigError("config: strategies is empty");
  std::vector<SweepRow> rows;
  for (double value : sweep.values) {
    MarketParams p = config.market;
    TimeGrid g = config.grid;
    std::string invalid;
    double rho = kNaN;
    try {
      apply(sweep.variable, value, p, g);
      validate(p, g);
      if (sweep.variable == SweepVariable::Sigma13) {
        rho = unconditional_correlation(p, g, unsgp(p, g).view());
      }
    } catch (const Error& e) {
      invalid = e.what();
    }
    for (StrategyKind kind : config.strategies) {
      SweepRow row;
      row.variable = sweep.variable;
      row.value = value;
      row.kind = kind;
      row.rho_unconstrained = rho;
      if (!invalid.empty()) {
        row.status = RowStatus::Error;
        row.note = invalid;
        rows.push_back(std::move(row));
        continue;
      }
      StrategyVector strategy;
      try {
        strategy = compute_strategy(kind, p, g);
      } catch (const InadmissibleDelta& e) {
        row.status = RowStatus::Skipped;
        row.note = "inadmissible: delta = " + describe(p.delta) + " >= bound b1/k1,N = " + describe(e.bound()) +
                   " at N = " + std::to_string(g.n_steps);
        rows.push_back(std::move(row));
        continue;
      }
      const mc::EstimateReport est = mc::run(p, g, strategy.view(), config.simulation);
      row.amounts = strategy.amounts;
      row.expected_utility = est.expected_utility;
      row.utility_stderr = est.utility_stderr;
      row.p05 = est.p05;
      row.risk_shortfall = est.risk_shortfall;
      row.sample_correlation = est.sample_correlation;
      rows.push_back(std::move(row));
    }
  }

  const bool any_ok = std::any_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.status == RowStatus::Ok; });
  if (!any_ok) {
    const bool any_skip =
        std::any_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.status == RowStatus::Skipped; });
    if (any_skip) throw InadmissibleDelta("every sweep value is inadmissible", kNaN);
    throw InvalidParameter("every sweep value is invalid: " + rows.front().note);
  }

  // Base row per strategy: smallest sweep value, or smallest unconstrained
  // correlation for the volatility sweep.
  auto key = [&](const SweepRow& r) { return sweep.variable == SweepVariable::Sigma13 ? r.rho_unconstrained : r.value; };
  std::map<StrategyKind, std::size_t> base;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].status != RowStatus::Ok) continue;
    auto it = base.find(rows[i].kind);
    if (it == base.end() || key(rows[i]) < key(rows[it->second])) base[rows[i].kind] = i;
  }
  for (auto& [kind, idx] : base) {
    const SweepRow b = rows[idx];
    rows[idx].is_base = true;
    for (SweepRow& r : rows) {
      if (r.kind != kind) continue;
      if (r.status != RowStatus::Ok) {
        r.rel_utility = r.rel_risk = kNaN;
        continue;
      }
      auto safe = [](double cur, double ref) {
        try {
          return mc::relative_change(cur, ref);
        } catch (const DomainError&) {
          return kNaN;
        }
      };
      r.rel_utility = safe(r.expected_utility, b.expected_utility);
      r.rel_risk = safe(r.risk_shortfall, b.risk_shortfall);
    }
  }
  for (SweepRow& r : rows) {
    if (r.status != RowStatus::Ok) {
      r.expected_utility = r.utility_stderr = r.p05 = r.risk_shortfall = r.sample_correlation = kNaN;
      r.rel_utility = r.rel_risk = kNaN;
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.value != b.value) return a.value < b.value;
    return kind_rank(a.kind) < kind_rank(b.kind);
  });
  return rows;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string_view to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::Delta: return "delta";
    case SweepVariable::NSteps: return "n_steps";
    case SweepVariable::Sigma13: return "sigma13";
  }
  return "delta";
}

std::string_view to_string(OutputFormat f) { return f == OutputFormat::Csv ? "csv" : "json"; }

std::string_view to_string(RowStatus s) {
  switch (s) {
    case RowStatus::Ok: return "ok";
    case RowStatus::Skipped: return "skipped";
    case RowStatus::Error: return "error";
  }
  return "error";
}

std::optional<SweepVariable> parse_sweep_variable(std::string_view name) {
  for (auto v : {SweepVariable::Delta, SweepVariable::NSteps, SweepVariable::Sigma13}) {
    if (name == to_string(v)) return v;
  }
  return std::nullopt;
}

std::optional<OutputFormat> parse_output_format(std::string_view name) {
  if (name == "csv") return OutputFormat::Csv;
  if (name == "json") return OutputFormat::Json;
  return std::nullopt;
}

ExperimentConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config: top level must be a JSON object");
  ExperimentConfig c;

  const json& m = require_field(doc, "market", "");
  c.market.mu1 = number_field(m, "mu1", "market");
  c.market.sigma1 = number_field(m, "sigma1", "market");
  c.market.mu2 = number_field(m, "mu2", "market");
  c.market.sigma2 = number_field(m, "sigma2", "market");
  c.market.k = number_field(m, "k", "market");
  c.market.mu3 = number_field(m, "mu3", "market");
  c.market.sigma3 = number_field(m, "sigma3", "market");
  c.market.a31 = number_field(m, "a31", "market");
  c.market.a32 = number_field(m, "a32", "market");
  c.market.gamma = number_field(m, "gamma", "market");
  c.market.delta = number_field(m, "delta", "market");
  c.market.x0 = number_field(m, "x0", "market");
  c.market.i0 = number_field(m, "i0", "market");
  c.market.b0 = number_field(m, "b0", "market");

  const json& g = require_field(doc, "grid", "");
  const std::uint64_t n_steps = count_field(g, "n_steps", "grid");
  if (n_steps < 1 || n_steps > 100000) throw ConfigError("config: grid.n_steps out of range");
  c.grid.n_steps = static_cast<int>(n_steps);
  c.grid.h = number_field(g, "h", "grid");

  const json& s = require_field(doc, "simulation", "");
  c.simulation.n_sim = count_field(s, "n_sim", "simulation");
  c.simulation.chunk_size = count_field(s, "chunk_size", "simulation");
  c.simulation.seed = s.contains("seed") ? count_field(s, "seed", "simulation") : 0;
  if (s.contains("threads")) c.simulation.threads = static_cast<unsigned>(count_field(s, "threads", "simulation"));
  if (c.simulation.n_sim < 1) throw ConfigError("config: simulation.n_sim must be >= 1");
  if (c.simulation.chunk_size < 1) throw ConfigError("config: simulation.chunk_size must be >= 1");

  if (doc.contains("sweep")) {
    const json& sw = doc.at("sweep");
    const json& var = require_field(sw, "variable", "sweep");
    if (!var.is_string()) throw ConfigError("config: sweep.variable must be a string");
    const auto parsed = parse_sweep_variable(var.get<std::string>());
    if (!parsed) throw ConfigError("config: unknown sweep variable '" + var.get<std::string>() + "'");
    const json& vals = require_field(sw, "values", "sweep");
    if (!vals.is_array() || vals.empty()) throw ConfigError("config: sweep.values must be a non-empty array");
    Sweep sweep{*parsed, {}};
    for (const json& v : vals) {
      if (!v.is_number()) throw ConfigError("config: sweep.values must hold numbers");
      sweep.values.push_back(v.get<double>());
    }
    c.sweep = std::move(sweep);
  }

  const json& st = require_field(doc, "strategies", "");
  if (!st.is_array() || st.empty()) throw ConfigError("config: strategies must be a non-empty array");
  for (const json& v : st) {
    const auto kind = v.is_string() ? parse_strategy_kind(v.get<std::string>()) : std::nullopt;
    if (!kind || *kind == StrategyKind::Custom) {
      throw ConfigError("config: strategies entries must be UnSGP, CSGP or CPC");
    }
    if (std::find(c.strategies.begin(), c.strategies.end(), *kind) == c.strategies.end()) {
      c.strategies.push_back(*kind);
    }
  }

  const json& out = require_field(doc, "output", "");
  const json& path = require_field(out, "path", "output");
  if (!path.is_string()) throw ConfigError("config: output.path must be a string");
  c.output_path = path.get<std::string>();
  if (out.contains("format")) {
    const json& f = out.at("format");
    const auto fmt = f.is_string() ? parse_output_format(f.get<std::string>()) : std::nullopt;
    if (!fmt) throw ConfigError("config: output.format must be csv or json");
    c.format = *fmt;
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  return parse_config(doc);
}

json to_json(const ExperimentConfig& c) {
  json doc;
  const MarketParams& m = c.market;
  doc["market"] = {{"mu1", m.mu1},       {"sigma1", m.sigma1}, {"mu2", m.mu2},   {"sigma2", m.sigma2},
                   {"k", m.k},           {"mu3", m.mu3},       {"sigma3", m.sigma3}, {"a31", m.a31},
                   {"a32", m.a32},       {"gamma", m.gamma},   {"delta", m.delta},   {"x0", m.x0},
                   {"i0", m.i0},         {"b0", m.b0}};
  doc["grid"] = {{"n_steps", c.grid.n_steps}, {"h", c.grid.h}};
  doc["simulation"] = {{"n_sim", c.simulation.n_sim},
                       {"seed", c.simulation.seed},
                       {"chunk_size", c.simulation.chunk_size},
                       {"threads", c.simulation.threads}};
  if (c.sweep) doc["sweep"] = {{"variable", to_string(c.sweep->variable)}, {"values", c.sweep->values}};
  json st = json::array();
  for (auto k : c.strategies) st.push_back(std::string(to_string(k)));
  doc["strategies"] = st;
  doc["output"] = {{"path", c.output_path}, {"format", to_string(c.format)}};
  return doc;
}

StrategyVector compute_strategy(StrategyKind kind, const MarketParams& p, const TimeGrid& g) {
  switch (kind) {
    case StrategyKind::UnSGP: return unsgp(p, g);
    case StrategyKind::CSGP: return csgp(p, g);
    case StrategyKind::CPC: return cpc(p, g);
    case StrategyKind::Custom: break;
  }
  throw ConfigError("no closed form for a custom strategy");
}

std::vector<SweepRow> run_config(const ExperimentConfig& config) {
  if (!config.sweep) throw ConfigError("config: a sweep section is required");
  return run_rows(config, *config.sweep);
}

std::vector<SweepRow> sigma_sweep(const ExperimentConfig& config) {
  if (!config.sweep || config.sweep->variable != SweepVariable::Sigma13) {
    throw ConfigError("config: sigma_sweep needs sweep.variable = sigma13");
  }
  return run_rows(config, *config.sweep);
}

void write_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "variable,value,strategy,status,is_base,expected_utility,utility_stderr,p05,risk_shortfall,"
        "sample_correlation,rho_unconstrained,rel_utility,rel_risk,amounts,note\n";
  for (const SweepRow& r : rows) {
    os << to_string(r.variable) << ',' << format_number(r.value) << ',' << to_string(r.kind) << ','
       << to_string(r.status) << ',' << (r.is_base ? 1 : 0) << ',' << format_number(r.expected_utility) << ','
       << format_number(r.utility_stderr) << ',' << format_number(r.p05) << ',' << format_number(r.risk_shortfall)
       << ',' << format_number(r.sample_correlation) << ',' << format_number(r.rho_unconstrained) << ','
       << format_number(r.rel_utility) << ',' << format_number(r.rel_risk) << ',' << join_amounts(r.amounts) << ','
       << csv_field(r.note) << '\n';
  }
}

json rows_to_json(const std::vector<SweepRow>& rows) {
  json arr = json::array();
  for (const SweepRow& r : rows) {
    json amounts = json::array();
    for (double a : r.amounts) amounts.push_back(number_or_null(a));
    arr.push_back({{"variable", to_string(r.variable)},
                   {"value", number_or_null(r.value)},
                   {"strategy", to_string(r.kind)},
                   {"status", to_string(r.status)},
                   {"is_base", r.is_base},
                   {"expected_utility", number_or_null(r.expected_utility)},
                   {"utility_stderr", number_or_null(r.utility_stderr)},
                   {"p05", number_or_null(r.p05)},
                   {"risk_shortfall", number_or_null(r.risk_shortfall)},
                   {"sample_correlation", number_or_null(r.sample_correlation)},
                   {"rho_unconstrained", number_or_null(r.rho_unconstrained)},
                   {"rel_utility", number_or_null(r.rel_utility)},
                   {"rel_risk", number_or_null(r.rel_risk)},
                   {"amounts", amounts},
                   {"note", r.note}});
  }
  return arr;
}

std::vector<SweepRow> rows_from_json(const json& doc) {
  if (!doc.is_array()) throw ConfigError("rows: expected a JSON array");
  std::vector<SweepRow> rows;
  for (const json& o : doc) {
    SweepRow r;
    const auto var = parse_sweep_variable(o.at("variable").get<std::string>());
    const auto kind = parse_strategy_kind(o.at("strategy").get<std::string>());
    if (!var || !kind) throw ConfigError("rows: unknown variable or strategy");
    r.variable = *var;
    r.kind = *kind;
    const std::string status = o.at("status").get<std::string>();
    r.status = status == "ok" ? RowStatus::Ok : status == "skipped" ? RowStatus::Skipped : RowStatus::Error;
    r.value = number_from(o.at("value"));
    r.is_base = o.at("is_base").get<bool>();
    r.expected_utility = number_from(o.at("expected_utility"));
    r.utility_stderr = number_from(o.at("utility_stderr"));
    r.p05 = number_from(o.at("p05"));
    r.risk_shortfall = number_from(o.at("risk_shortfall"));
    r.sample_correlation = number_from(o.at("sample_correlation"));
    r.rho_unconstrained = number_from(o.at("rho_unconstrained"));
    r.rel_utility = number_from(o.at("rel_utility"));
    r.rel_risk = number_from(o.at("rel_risk"));
    for (const json& a : o.at("amounts")) r.amounts.push_back(number_from(a));
    r.note = o.at("note").get<std::string>();
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string format_rows(const std::vector<SweepRow>& rows, OutputFormat format) {
  if (format == OutputFormat::Csv) {
    std::ostringstream os;
    write_csv(os, rows);
    return os.str();
  }
  return rows_to_json(rows).dump(2) + "\n";
}

void emit(const std::vector<SweepRow>& rows, OutputFormat format, const std::string& path) {
  if (rows.empty()) throw Error("emit: no rows to write");
  const std::string text = format_rows(rows, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("emit: cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw Error("emit: write to '" + path + "' failed");
}

}  // namespace corrport::harness
