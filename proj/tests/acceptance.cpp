// Acceptance checks against the published tables and the independent oracles.
// Usage:
//   keyflux_acceptance sweep <results.json>            solve all 30 models once
//   keyflux_acceptance <criterion> [<results.json>]    one PASS/FAIL line
//   keyflux_acceptance all                             every criterion
// Criteria: statespace risk-average risk-max cost-after cost-before
//           stabilisation oracles curves

#include <chrono>
#include <cstdio>
#include <fstream>
#include <random>

#include "json.hpp"
#include "keyflux/analysis.hpp"
#include "keyflux/ctmc.hpp"
#include "keyflux/reference.hpp"
#include "keyflux/verification.hpp"
#include "support/oracles.hpp"

using namespace keyflux;
using nlohmann::json;

namespace {

// Tolerances of the acceptance criteria.
constexpr double kRiskAverageAbs = 0.001;
constexpr double kRiskMaxAbs = 0.004;
constexpr double kCostAfterRel = 0.01;
constexpr double kSteadyRateRel = 0.01;
constexpr double kCostBeforeRel = 0.05;
constexpr int kStabilisationMonths = 1;
constexpr double kDenseTol = 1e-8;
constexpr double kExpmTol = 1e-7;
constexpr std::size_t kMonteCarloTrials = 100000;
constexpr double kMonteCarloSigmas = 3;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<CurveRequest> table_requests() {
  std::vector<CurveRequest> out;
  for (auto kind : kAllKinds) out.push_back({kind, default_thresholds(kind)});
  return out;
}

bool report(const char* name, bool ok, const std::string& detail) {
  std::printf("%s  %-14s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  return ok;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// -- results file ------------------------------------------------------------

json record_json(const AnalysisRecord& r) {
  return {{"steady", r.risk.steady_risk},  {"monthly", r.risk.monthly_risk},        {"max", r.risk.max_risk},
          {"S", r.risk.stabilisation_month}, {"pre", r.cost.cost_pre_monthly},       {"post", r.cost.cost_post_monthly},
          {"rate", r.steady_cost_rate},     {"cumulative", r.cumulative_updates}};
}

AnalysisRecord record_from(const json& j) {
  AnalysisRecord r;
  r.risk.steady_risk = j.at("steady");
  r.risk.monthly_risk = j.at("monthly").get<std::vector<double>>();
  r.risk.max_risk = j.at("max");
  r.risk.stabilisation_month = j.at("S");
  r.cost.stabilisation_month = r.risk.stabilisation_month;
  r.cost.cost_pre_monthly = j.at("pre");
  r.cost.cost_post_monthly = j.at("post");
  r.steady_cost_rate = j.at("rate");
  r.cumulative_updates = j.at("cumulative").get<std::vector<double>>();
  return r;
}

std::vector<StrategyResults> run_tables(unsigned workers) {
  SweepOptions opts;
  opts.workers = workers;
  return run_sweep(table_requests(), NetworkParams{}, AnalysisConfig{}, opts);
}

void save(const std::vector<StrategyResults>& results, const std::string& path, double elapsed) {
  json doc{{"elapsedSeconds", elapsed}, {"results", json::array()}};
  for (const auto& r : results) {
    json rec = json::array();
    for (const auto& x : r.records) rec.push_back(record_json(x));
    doc["results"].push_back({{"kind", to_string(r.kind)}, {"thresholds", r.thresholds}, {"records", rec}});
  }
  std::ofstream(path) << doc.dump();
}

std::vector<StrategyResults> load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing results file " + path + "; run the sweep first");
  const json doc = json::parse(in);
  std::vector<StrategyResults> out;
  for (const auto& r : doc.at("results")) {
    StrategyResults s{*parse_kind(r.at("kind").get<std::string>()), r.at("thresholds").get<std::vector<int>>(), {}};
    for (const auto& x : r.at("records")) s.records.push_back(record_from(x));
    out.push_back(std::move(s));
  }
  return out;
}

// -- criteria ------------------------------------------------------------------

bool check_statespace(unsigned workers) {
  const auto t0 = Clock::now();
  const auto rep = verify_state_space(table_requests(), reference::table_max_values(), BuildOptions{}, workers);
  std::string detail = fmt("%zu/%zu cells exact (%.0f s)", rep.count(EntryStatus::pass), rep.entries.size(),
                           seconds_since(t0));
  for (const auto& e : rep.entries)
    if (e.status != EntryStatus::pass)
      detail += fmt("; %s %d max %d %s %.0f vs %.0f", std::string(to_string(e.kind)).c_str(), e.threshold, e.max,
                    e.metric.c_str(), e.computed, e.expected);
  return report("statespace", rep.passed() && rep.entries.size() == 180, detail);
}

std::string failures(const VerificationReport& rep) {
  std::string out;
  for (const auto& e : rep.entries)
    if (e.status == EntryStatus::fail)
      out += fmt("; %s %d %s %.6g vs %.6g", std::string(to_string(e.kind)).c_str(), e.threshold, e.metric.c_str(),
                 e.computed, e.expected);
  return out;
}

Tolerances tolerances() {
  Tolerances t;
  t.risk_average_abs = kRiskAverageAbs;
  t.risk_max_abs = kRiskMaxAbs;
  t.cost_after_rel = kCostAfterRel;
  t.cost_before_rel = kCostBeforeRel;
  t.steady_rate_rel = kSteadyRateRel;
  t.stabilisation_months = kStabilisationMonths;
  return t;
}

bool check_table(const char* name, VerifyScope scope, const std::vector<StrategyResults>& results,
                 std::size_t expected_entries) {
  const auto rep = verify_results(results, {scope}, tolerances());
  std::string detail = fmt("%zu/%zu within tolerance", rep.count(EntryStatus::pass), rep.entries.size());
  if (rep.count(EntryStatus::divergent) > 0) detail += fmt(", %zu divergent", rep.count(EntryStatus::divergent));
  return report(name, rep.passed() && rep.entries.size() == expected_entries, detail + failures(rep));
}

bool check_risk_max(const std::vector<StrategyResults>& results) {
  const auto rep = verify_results(results, {VerifyScope::risk_max}, tolerances());
  // Overshoot: max above the long-run value for TB with M >= 3 and for every MB row.
  std::string missing;
  for (const auto& r : results)
    for (std::size_t i = 0; i < r.thresholds.size(); ++i) {
      const bool expect = (r.kind == StrategyKind::TB && r.thresholds[i] >= 3) || r.kind == StrategyKind::MB;
      if (expect && !(r.records[i].risk.max_risk > r.records[i].risk.steady_risk))
        missing += fmt("; no overshoot for %s %d", std::string(to_string(r.kind)).c_str(), r.thresholds[i]);
    }
  return report("risk-max", rep.passed() && rep.entries.size() == 30 && missing.empty(),
                fmt("%zu/%zu within tolerance, overshoot pattern %s", rep.count(EntryStatus::pass), rep.entries.size(),
                    missing.empty() ? "reproduced" : "missing") +
                    failures(rep) + missing);
}

bool check_cost_before(const std::vector<StrategyResults>& results) {
  const auto rep = verify_results(results, {VerifyScope::cost_before}, tolerances());
  std::string detail = fmt("%zu/%zu comparable entries within tolerance, %zu divergent (stabilisation month differs)",
                           rep.count(EntryStatus::pass), rep.entries.size() - rep.count(EntryStatus::divergent),
                           rep.count(EntryStatus::divergent));
  for (const auto& e : rep.entries)
    if (e.status == EntryStatus::divergent)
      detail += fmt("; %s %d: %s", std::string(to_string(e.kind)).c_str(), e.threshold, e.note.c_str());
  return report("cost-before", rep.passed() && rep.entries.size() == 30, detail + failures(rep));
}

bool check_curves(const std::vector<StrategyResults>& results) {
  const auto curves = assemble_curves(results, {CurvePhase::after});
  std::size_t points = 0, ok = 0;
  std::string bad;
  for (const auto& c : curves)
    for (const auto& p : c.points) {
      ++points;
      const double cost = *reference::cost_after(c.kind, p.threshold);
      const double risk = 100 * *reference::risk_average(c.kind, p.threshold);
      const bool good = std::abs(p.cost_per_month - cost) <= kCostAfterRel * cost &&
                        std::abs(p.risk_percent - risk) <= 100 * kRiskAverageAbs;
      ok += good;
      if (!good)
        bad += fmt("; %s %d (%.4g, %.4g%%) vs (%.4g, %.4g%%)", std::string(to_string(c.kind)).c_str(), p.threshold,
                   p.cost_per_month, p.risk_percent, cost, risk);
    }
  return report("curves", curves.size() == 6 && points == 30 && ok == 30,
                fmt("%zu curves, %zu/%zu after-phase points match", curves.size(), ok, points) + bad);
}

// -- oracles ---------------------------------------------------------------------

double dense_vs_gauss_seidel() {
  double worst = 0;
  std::mt19937_64 rng(2024);
  for (auto kind : kAllKinds)
    for (int max : {2, 3, 4}) {
      NetworkParams p;
      p.max = max;
      p.p_comp = 0.01;
      const auto m = build_model({kind, 2, 3}, p);
      if (m.num_states() > 50) continue;
      const auto pi = steady_state(m, SolverConfig{});
      worst = std::max(worst, (pi - oracle::direct_steady_state(oracle::dense_generator(m))).cwiseAbs().maxCoeff());
    }
  return worst;
}

double expm_vs_uniformization() {
  double worst = 0;
  for (auto kind : kAllKinds)
    for (int max : {2, 4}) {
      NetworkParams p;
      p.max = max;
      p.p_comp = 0.01;
      const auto m = build_model({kind, 2, 3}, p);
      if (m.num_states() > 50) continue;
      for (double t : {1.0, 30.0, 180.0}) {
        const auto ref = oracle::transient(m, t);
        worst = std::max(worst, (transient_at(m, t, SolverConfig{}) - ref.dist).cwiseAbs().maxCoeff());
        worst = std::max(worst, std::abs(expected_reward(m, t, SolverConfig{}) - ref.reward) / std::max(1.0, ref.reward));
      }
    }
  return worst;
}

/// Largest |simulated - analytic| risk in units of the analytic standard error.
double monte_carlo_sigmas(unsigned workers, std::string& detail) {
  double worst = 0;
  for (auto kind : {StrategyKind::LB, StrategyKind::JB})
    for (int t : {1, 3}) {
      const auto m = build_model({kind, t}, NetworkParams{});
      const double risk = comp_mass(m, transient_at(m, 360.0, SolverConfig{}));
      const auto mc = monte_carlo_estimate({kind, t}, NetworkParams{}, {360.0}, kMonteCarloTrials, 20120701, workers);
      const double sigma = std::sqrt(risk * (1 - risk) / static_cast<double>(kMonteCarloTrials));
      const double z = std::abs(mc.risk[0] - risk) / sigma;
      worst = std::max(worst, z);
      detail += fmt(" %s%d:%.2f", std::string(to_string(kind)).c_str(), t, z);
    }
  return worst;
}

/// Flux conservation and reset invariants over every reachable state.
std::size_t structural_violations() {
  std::size_t bad = 0;
  const NetworkParams p;
  for (auto kind : kAllKinds)
    for (int t : default_thresholds(kind)) {
      const StrategySpec spec{kind, t};
      const auto m = explore(spec, p);
      std::vector<double> out(m.states.size(), 0.0);
      for (const auto& a : m.ctmc.actions()) {
        out[a.source] += a.rate;
        const auto& d = m.states[a.target];
        if (m.ctmc.is_reward(a.label)) {
          if (d.comp) ++bad;
          if (kind == StrategyKind::TB ? d.phase != 1 : d.counter != 0) ++bad;
          if (kind == StrategyKind::HY && (d.counter2 != 0 || d.phase != 1)) ++bad;
        }
      }
      for (std::size_t s = 0; s < m.states.size(); ++s) {
        const double n = m.states[s].size;
        double expected = p.r_join * (p.max - n) + p.r_leave * n + p.r_message * n;
        if (spec.uses_timer()) expected += spec.erlang_k / (30.0 * t);
        if (std::abs(out[s] - expected) > 1e-9 * std::max(1.0, expected)) ++bad;
      }
      // Probability flux balances at the stationary distribution.
      const auto pi = steady_state(m.ctmc, SolverConfig{});
      if (balance_residual(m.ctmc, pi) > 1e-7) ++bad;
    }
  return bad;
}

bool check_oracles(unsigned workers) {
  const auto t0 = Clock::now();
  const double dense = dense_vs_gauss_seidel();
  const double expm = expm_vs_uniformization();
  std::string mc_detail;
  const double z = monte_carlo_sigmas(workers, mc_detail);
  const std::size_t structural = structural_violations();
  const bool ok = dense <= kDenseTol && expm <= kExpmTol && z <= kMonteCarloSigmas && structural == 0;
  return report("oracles", ok,
                fmt("dense %.1e (<= %.0e), expm %.1e (<= %.0e), monte carlo max %.2f sigma (<= %.0f):", dense,
                    kDenseTol, expm, kExpmTol, z, kMonteCarloSigmas) +
                    mc_detail + fmt(", structural violations %zu (%.0f s)", structural, seconds_since(t0)));
}

}  // namespace

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "all";
  const std::string path = argc > 2 ? argv[2] : "acceptance_results.json";
  const unsigned workers = 0;
  try {
    if (mode == "sweep") {
      const auto t0 = Clock::now();
      const auto results = run_tables(workers);
      save(results, path, seconds_since(t0));
      std::printf("solved 30 models in %.0f s\n", seconds_since(t0));
      return 0;
    }
    if (mode == "statespace") return check_statespace(workers) ? 0 : 1;
    if (mode == "oracles") return check_oracles(workers) ? 0 : 1;

    std::vector<StrategyResults> results;
    if (mode == "all") {
      bool ok = check_statespace(workers);
      ok = check_oracles(workers) && ok;
      const auto t0 = Clock::now();
      results = run_tables(workers);
      std::printf("(30 analyses in %.0f s)\n", seconds_since(t0));
      ok = check_table("risk-average", VerifyScope::risk_average, results, 30) && ok;
      ok = check_risk_max(results) && ok;
      ok = check_table("cost-after", VerifyScope::cost_after, results, 60) && ok;
      ok = check_cost_before(results) && ok;
      ok = check_table("stabilisation", VerifyScope::stabilisation, results, 30) && ok;
      ok = check_curves(results) && ok;
      return ok ? 0 : 1;
    }
    results = load(path);
    if (mode == "risk-average") return check_table("risk-average", VerifyScope::risk_average, results, 30) ? 0 : 1;
    if (mode == "risk-max") return check_risk_max(results) ? 0 : 1;
    if (mode == "cost-after") return check_table("cost-after", VerifyScope::cost_after, results, 60) ? 0 : 1;
    if (mode == "cost-before") return check_cost_before(results) ? 0 : 1;
    if (mode == "stabilisation") return check_table("stabilisation", VerifyScope::stabilisation, results, 30) ? 0 : 1;
    if (mode == "curves") return check_curves(results) ? 0 : 1;
    std::fprintf(stderr, "unknown criterion %s\n", mode.c_str());
    return 2;
  } catch (const std::exception& e) {
    std::printf("FAIL  %-14s %s\n", mode.c_str(), e.what());
    return 1;
  }
}
