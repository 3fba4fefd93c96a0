#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "keyflux/analysis.hpp"
#include "keyflux/models.hpp"

namespace keyflux {

/// Rounds to `digits` significant digits, the precision of every emitted number.
double round_significant(double value, int digits = 6);
std::string format_number(double value);

/// One line of the long-format tables: `kind,threshold,metric,value`.
struct CsvRow {
  std::string kind;
  int threshold = 0;
  std::string metric;
  double value = 0;

  friend bool operator==(const CsvRow&, const CsvRow&) = default;
};

inline constexpr std::string_view kCsvHeader = "kind,threshold,metric,value";

void write_csv(std::ostream& out, const std::vector<CsvRow>& rows);
/// Throws InvalidArgument on a wrong header or malformed line.
std::vector<CsvRow> read_csv(std::istream& in);

/// Rows shaped like the published risk, cost and stabilisation tables.
std::vector<CsvRow> risk_table(const std::vector<StrategyResults>& results);
std::vector<CsvRow> cost_table(const std::vector<StrategyResults>& results);
std::vector<CsvRow> stabilisation_table(const std::vector<StrategyResults>& results);
std::vector<CsvRow> curve_rows(const std::vector<DesignCurve>& curves);

nlohmann::json to_json(const std::vector<DesignCurve>& curves);
nlohmann::json to_json(const CurvePoint& point);
/// Throws InvalidArgument when the document does not follow the curves schema.
std::vector<DesignCurve> curves_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const NetworkParams& params);
/// Overrides from `{max, rJoin, rLeave, rMessage, pComp, k}`; unknown keys are rejected.
void apply_params(const nlohmann::json& overrides, NetworkParams& params, int& erlang_k);
/// Overrides from `{horizonMonths, observationMonths, stabilisationEpsilon,
/// stabilisationMode, daysPerMonth}`; unknown keys are rejected.
void apply_config(const nlohmann::json& overrides, AnalysisConfig& cfg);
/// `--set key=value` overrides: max, r_join, r_leave, r_message, p_comp, k.
void apply_setting(std::string_view assignment, NetworkParams& params, int& erlang_k);

/// Analysis summary with the field names of the service response.
nlohmann::json to_json(const AnalysisRecord& record);

}  // namespace keyflux
