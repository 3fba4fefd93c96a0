#include "keyflux/verification.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "keyflux/parallel.hpp"
#include "keyflux/reference.hpp"

namespace keyflux {

namespace {

constexpr std::array<std::pair<VerifyScope, std::string_view>, 7> kScopeNames{{
    {VerifyScope::statespace, "statespace"},
    {VerifyScope::risk_average, "risk-average"},
    {VerifyScope::risk_max, "risk-max"},
    {VerifyScope::cost_after, "cost-after"},
    {VerifyScope::cost_before, "cost-before"},
    {VerifyScope::stabilisation, "stabilisation"},
    {VerifyScope::curves, "curves"},
}};

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

VerificationEntry absolute(VerifyScope scope, StrategyKind kind, int threshold, std::string metric, double expected,
                           double computed, double tol) {
  VerificationEntry e{scope, kind, threshold, 50, std::move(metric), expected, computed, tol, false, EntryStatus::fail, {}};
  e.status = std::abs(computed - expected) <= tol ? EntryStatus::pass : EntryStatus::fail;
  return e;
}

VerificationEntry relative(VerifyScope scope, StrategyKind kind, int threshold, std::string metric, double expected,
                           double computed, double tol) {
  VerificationEntry e{scope, kind, threshold, 50, std::move(metric), expected, computed, tol, true, EntryStatus::fail, {}};
  e.status = std::abs(computed - expected) <= tol * std::abs(expected) ? EntryStatus::pass : EntryStatus::fail;
  return e;
}

bool wants(const std::vector<VerifyScope>& scopes, VerifyScope s) {
  return std::find(scopes.begin(), scopes.end(), s) != scopes.end();
}

/// Pre-stabilisation cost entry; divergent when the stabilisation months differ.
VerificationEntry cost_before_entry(VerifyScope scope, StrategyKind kind, int threshold, const AnalysisRecord& rec,
                                    double expected, double tol, std::string metric) {
  const int published = reference::stabilisation_month(kind, threshold).value_or(0);
  const int computed_s = rec.risk.stabilisation_month;
  VerificationEntry e = relative(scope, kind, threshold, std::move(metric), expected, rec.cost.cost_pre_monthly, tol);
  if (published != computed_s) {
    e.status = EntryStatus::divergent;
    e.note = "stabilisation month differs (computed " + std::to_string(computed_s) + ", published " +
             std::to_string(published) + ")";
    if (published >= 1 && static_cast<std::size_t>(published) <= rec.cumulative_updates.size()) {
      const double at_published = rec.cumulative_updates[static_cast<std::size_t>(published - 1)] / published;
      e.note += "; cost at published month " + fixed(at_published);
    }
  }
  return e;
}

}  // namespace

std::string_view to_string(VerifyScope scope) {
  for (const auto& [s, name] : kScopeNames)
    if (s == scope) return name;
  return "?";
}

std::optional<VerifyScope> parse_scope(std::string_view text) {
  for (const auto& [s, name] : kScopeNames)
    if (name == text) return s;
  return std::nullopt;
}

std::vector<VerifyScope> all_scopes() {
  std::vector<VerifyScope> out;
  for (const auto& [s, name] : kScopeNames) out.push_back(s);
  return out;
}

std::optional<Tolerances> parse_tolerance_profile(std::string_view name) {
  if (name == "acceptance") return Tolerances::acceptance();
  if (name == "strict") return Tolerances::strict();
  return std::nullopt;
}

std::string_view to_string(EntryStatus status) {
  switch (status) {
    case EntryStatus::pass: return "pass";
    case EntryStatus::fail: return "FAIL";
    case EntryStatus::divergent: return "divergent";
  }
  return "?";
}

std::size_t VerificationReport::count(EntryStatus status) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const auto& e) { return e.status == status; }));
}

void VerificationReport::append(const VerificationReport& other) {
  entries.insert(entries.end(), other.entries.begin(), other.entries.end());
}

VerificationReport verify_state_space(const std::vector<CurveRequest>& requests, const std::vector<int>& maxes,
                                      const BuildOptions& build, unsigned workers) {
  struct Cell {
    StrategyKind kind;
    int threshold;
    int max;
    StateSpaceSummary expected;
  };
  std::vector<Cell> cells;
  for (const auto& req : requests)
    for (int t : req.thresholds)
      for (int m : maxes)
        if (auto ref = reference::state_space(req.kind, t, m)) cells.push_back({req.kind, t, m, *ref});

  NetworkParams base;
  const auto computed = parallel_map(cells.size(), workers, [&](std::size_t i) -> std::optional<StateSpaceSummary> {
    NetworkParams p = base;
    p.max = cells[i].max;
    try {
      return state_space_summary({cells[i].kind, cells[i].threshold, 100}, p, build);
    } catch (const StateCapExceeded&) {
      return std::nullopt;
    }
  });

  VerificationReport report;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& c = cells[i];
    for (int which = 0; which < 2; ++which) {
      VerificationEntry e{VerifyScope::statespace, c.kind, c.threshold, c.max, which == 0 ? "states" : "transitions", 0, 0, 0, false, EntryStatus::fail, {}};
      e.expected = static_cast<double>(which == 0 ? c.expected.states : c.expected.merged_edges);
      if (computed[i]) {
        e.computed = static_cast<double>(which == 0 ? computed[i]->states : computed[i]->merged_edges);
        e.status = e.computed == e.expected ? EntryStatus::pass : EntryStatus::fail;
      } else {
        e.status = EntryStatus::fail;
        e.note = "state cap of " + std::to_string(build.state_cap) + " exceeded";
      }
      report.entries.push_back(std::move(e));
    }
  }
  return report;
}

VerificationReport verify_results(const std::vector<StrategyResults>& results, const std::vector<VerifyScope>& scopes,
                                  const Tolerances& tol) {
  VerificationReport report;
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.thresholds.size(); ++i) {
      const int t = r.thresholds[i];
      const AnalysisRecord& rec = r.records[i];
      const auto k = r.kind;
      if (wants(scopes, VerifyScope::risk_average))
        if (auto ref = reference::risk_average(k, t))
          report.entries.push_back(absolute(VerifyScope::risk_average, k, t, "risk_average", *ref,
                                            rec.risk.steady_risk, tol.risk_average_abs));
      if (wants(scopes, VerifyScope::risk_max))
        if (auto ref = reference::risk_max(k, t))
          report.entries.push_back(
              absolute(VerifyScope::risk_max, k, t, "risk_max", *ref, rec.risk.max_risk, tol.risk_max_abs));
      if (wants(scopes, VerifyScope::cost_after))
        if (auto ref = reference::cost_after(k, t)) {
          report.entries.push_back(relative(VerifyScope::cost_after, k, t, "cost_after", *ref,
                                            rec.cost.cost_post_monthly, tol.cost_after_rel));
          report.entries.push_back(relative(VerifyScope::cost_after, k, t, "cost_after_vs_steady_rate",
                                            rec.steady_cost_rate, rec.cost.cost_post_monthly, tol.steady_rate_rel));
        }
      if (wants(scopes, VerifyScope::cost_before))
        if (auto ref = reference::cost_before(k, t))
          report.entries.push_back(cost_before_entry(VerifyScope::cost_before, k, t, rec, *ref, tol.cost_before_rel, "cost_before"));
      if (wants(scopes, VerifyScope::stabilisation))
        if (auto ref = reference::stabilisation_month(k, t)) {
          // Capped entries must match exactly.
          const double band = *ref >= 120 ? 0.0 : tol.stabilisation_months;
          report.entries.push_back(absolute(VerifyScope::stabilisation, k, t, "stabilisation_month", *ref,
                                            rec.risk.stabilisation_month, band));
        }
      if (wants(scopes, VerifyScope::curves)) {
        if (auto cost = reference::cost_after(k, t); cost)
          report.entries.push_back(relative(VerifyScope::curves, k, t, "curve_after_cost", *cost,
                                            rec.cost.cost_post_monthly, tol.cost_after_rel));
        if (auto risk = reference::risk_average(k, t))
          report.entries.push_back(absolute(VerifyScope::curves, k, t, "curve_after_risk_percent", 100 * *risk,
                                            100 * rec.risk.steady_risk, 100 * tol.risk_average_abs));
        if (auto cost = reference::cost_before(k, t))
          report.entries.push_back(
              cost_before_entry(VerifyScope::curves, k, t, rec, *cost, tol.cost_before_rel, "curve_before_cost"));
        if (auto risk = reference::risk_max(k, t))
          report.entries.push_back(absolute(VerifyScope::curves, k, t, "curve_before_risk_percent", 100 * *risk,
                                            100 * rec.risk.max_risk, 100 * tol.risk_max_abs));
      }
    }
  }
  return report;
}

}  // namespace keyflux
