#include "keyflux/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "keyflux/reference.hpp"

namespace keyflux {

using nlohmann::json;

double round_significant(double value, int digits) {
  if (value == 0 || !std::isfinite(value)) return value;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, value);
  return std::strtod(buf, nullptr);
}

std::string format_number(double value) {
  char buf[64];
  // Counts stay exact.
  if (value == std::trunc(value) && std::abs(value) < 1e15)
    std::snprintf(buf, sizeof buf, "%.0f", value);
  else
    std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

void write_csv(std::ostream& out, const std::vector<CsvRow>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows) out << r.kind << ',' << r.threshold << ',' << r.metric << ',' << format_number(r.value) << '\n';
}

std::vector<CsvRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw InvalidArgument("unexpected CSV header");
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 4) throw InvalidArgument("malformed CSV line: " + line);
    CsvRow row{cells[0], 0, cells[2], 0};
    const auto& t = cells[1];
    if (std::from_chars(t.data(), t.data() + t.size(), row.threshold).ec != std::errc{})
      throw InvalidArgument("bad threshold in CSV line: " + line);
    char* end = nullptr;
    row.value = std::strtod(cells[3].c_str(), &end);
    if (end == cells[3].c_str()) throw InvalidArgument("bad value in CSV line: " + line);
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

template <class Fn>
std::vector<CsvRow> rows_for(const std::vector<StrategyResults>& results, Fn&& fn) {
  std::vector<CsvRow> rows;
  for (const auto& r : results)
    for (std::size_t i = 0; i < r.thresholds.size(); ++i) fn(std::string(to_string(r.kind)), r.thresholds[i], r.records[i], rows);
  return rows;
}

double number_field(const json& obj, const char* key) {
  if (!obj.contains(key) || !obj.at(key).is_number()) throw InvalidArgument(std::string("missing numeric field ") + key);
  return obj.at(key).get<double>();
}

int integer_field(const json& obj, const char* key) {
  if (!obj.contains(key) || !obj.at(key).is_number_integer())
    throw InvalidArgument(std::string("missing integer field ") + key);
  return obj.at(key).get<int>();
}

}  // namespace

std::vector<CsvRow> risk_table(const std::vector<StrategyResults>& results) {
  return rows_for(results, [](std::string kind, int t, const AnalysisRecord& rec, std::vector<CsvRow>& rows) {
    rows.push_back({kind, t, "risk_max", rec.risk.max_risk});
    rows.push_back({kind, t, "risk_average", rec.risk.steady_risk});
  });
}

std::vector<CsvRow> cost_table(const std::vector<StrategyResults>& results) {
  return rows_for(results, [](std::string kind, int t, const AnalysisRecord& rec, std::vector<CsvRow>& rows) {
    rows.push_back({kind, t, "cost_before", rec.cost.cost_pre_monthly});
    rows.push_back({kind, t, "cost_after", rec.cost.cost_post_monthly});
  });
}

std::vector<CsvRow> stabilisation_table(const std::vector<StrategyResults>& results) {
  return rows_for(results, [](std::string kind, int t, const AnalysisRecord& rec, std::vector<CsvRow>& rows) {
    rows.push_back({kind, t, "stabilisation_month", static_cast<double>(rec.risk.stabilisation_month)});
  });
}

std::vector<CsvRow> curve_rows(const std::vector<DesignCurve>& curves) {
  std::vector<CsvRow> rows;
  for (const auto& c : curves) {
    const std::string suffix = "_" + std::string(to_string(c.phase));
    for (const auto& p : c.points) {
      rows.push_back({std::string(to_string(c.kind)), p.threshold, "cost_per_month" + suffix, p.cost_per_month});
      rows.push_back({std::string(to_string(c.kind)), p.threshold, "risk_percent" + suffix, p.risk_percent});
    }
  }
  return rows;
}

json to_json(const CurvePoint& p) {
  return {{"threshold", p.threshold},
          {"costPerMonth", round_significant(p.cost_per_month)},
          {"riskPercent", round_significant(p.risk_percent)},
          {"stabilisationMonth", p.stabilisation_month}};
}

json to_json(const std::vector<DesignCurve>& curves) {
  json list = json::array();
  for (const auto& c : curves) {
    json points = json::array();
    for (const auto& p : c.points) points.push_back(to_json(p));
    list.push_back({{"kind", to_string(c.kind)}, {"phase", to_string(c.phase)}, {"points", std::move(points)}});
  }
  return {{"curves", std::move(list)}};
}

std::vector<DesignCurve> curves_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("curves") || !doc.at("curves").is_array())
    throw InvalidArgument("curves document needs a \"curves\" array");
  std::vector<DesignCurve> out;
  for (const auto& c : doc.at("curves")) {
    if (!c.is_object()) throw InvalidArgument("curve entries must be objects");
    DesignCurve curve;
    const auto kind = c.contains("kind") && c.at("kind").is_string() ? parse_kind(c.at("kind").get<std::string>())
                                                                     : std::nullopt;
    if (!kind) throw InvalidArgument("curve has an unknown kind");
    curve.kind = *kind;
    const std::string phase = c.value("phase", "");
    if (phase == "before")
      curve.phase = CurvePhase::before;
    else if (phase == "after")
      curve.phase = CurvePhase::after;
    else
      throw InvalidArgument("curve phase must be \"before\" or \"after\"");
    if (!c.contains("points") || !c.at("points").is_array()) throw InvalidArgument("curve needs a points array");
    for (const auto& p : c.at("points")) {
      CurvePoint point;
      point.threshold = integer_field(p, "threshold");
      point.cost_per_month = number_field(p, "costPerMonth");
      point.risk_percent = number_field(p, "riskPercent");
      point.stabilisation_month = p.contains("stabilisationMonth") ? integer_field(p, "stabilisationMonth") : 0;
      curve.points.push_back(point);
    }
    out.push_back(std::move(curve));
  }
  return out;
}

json to_json(const NetworkParams& p) {
  return {{"max", p.max}, {"rJoin", p.r_join}, {"rLeave", p.r_leave}, {"rMessage", p.r_message}, {"pComp", p.p_comp}};
}

void apply_params(const json& overrides, NetworkParams& params, int& erlang_k) {
  if (overrides.is_null()) return;
  if (!overrides.is_object()) throw InvalidArgument("params must be an object");
  for (const auto& [key, value] : overrides.items()) {
    if (key == "max" || key == "k") {
      if (!value.is_number_integer()) throw InvalidArgument(key + " must be an integer");
      (key == "max" ? params.max : erlang_k) = value.get<int>();
      continue;
    }
    if (!value.is_number()) throw InvalidArgument(key + " must be a number");
    const double v = value.get<double>();
    if (key == "rJoin")
      params.r_join = v;
    else if (key == "rLeave")
      params.r_leave = v;
    else if (key == "rMessage")
      params.r_message = v;
    else if (key == "pComp")
      params.p_comp = v;
    else
      throw InvalidArgument("unknown parameter " + key);
  }
}

void apply_config(const json& overrides, AnalysisConfig& cfg) {
  if (overrides.is_null()) return;
  if (!overrides.is_object()) throw InvalidArgument("config must be an object");
  for (const auto& [key, value] : overrides.items()) {
    if (key == "stabilisationMode") {
      const std::string mode = value.is_string() ? value.get<std::string>() : "";
      if (mode == to_string(StabilisationMode::persistent_band))
        cfg.mode = StabilisationMode::persistent_band;
      else if (mode == to_string(StabilisationMode::successive_difference))
        cfg.mode = StabilisationMode::successive_difference;
      else
        throw InvalidArgument("unknown stabilisation mode");
    } else if (key == "horizonMonths" || key == "observationMonths") {
      if (!value.is_number_integer()) throw InvalidArgument(key + " must be an integer");
      (key == "horizonMonths" ? cfg.horizon_months : cfg.observation_months) = value.get<int>();
    } else if (key == "stabilisationEpsilon" || key == "daysPerMonth") {
      if (!value.is_number()) throw InvalidArgument(key + " must be a number");
      (key == "stabilisationEpsilon" ? cfg.stabilisation_epsilon : cfg.days_per_month) = value.get<double>();
    } else {
      throw InvalidArgument("unknown config key " + key);
    }
  }
}

void apply_setting(std::string_view assignment, NetworkParams& params, int& erlang_k) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw InvalidArgument("expected key=value, got " + std::string(assignment));
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || *end != '\0') throw InvalidArgument("not a number: " + text);
  auto as_int = [&] {
    if (v != std::floor(v) || std::abs(v) > 1e9) throw InvalidArgument(key + " must be an integer");
    return static_cast<int>(v);
  };
  if (key == "max")
    params.max = as_int();
  else if (key == "k")
    erlang_k = as_int();
  else if (key == "r_join")
    params.r_join = v;
  else if (key == "r_leave")
    params.r_leave = v;
  else if (key == "r_message")
    params.r_message = v;
  else if (key == "p_comp")
    params.p_comp = v;
  else
    throw InvalidArgument("unknown parameter " + key);
}

json to_json(const AnalysisRecord& rec) {
  json monthly = json::array();
  for (double r : rec.risk.monthly_risk) monthly.push_back(round_significant(r));
  return {{"steadyRisk", round_significant(rec.risk.steady_risk)},
          {"maxRisk", round_significant(rec.risk.max_risk)},
          {"stabilisationMonth", rec.risk.stabilisation_month},
          {"monthlyRisk", std::move(monthly)},
          {"costPreMonthly", round_significant(rec.cost.cost_pre_monthly)},
          {"costPostMonthly", round_significant(rec.cost.cost_post_monthly)},
          {"steadyCostRate", round_significant(rec.steady_cost_rate)}};
}

}  // namespace keyflux
