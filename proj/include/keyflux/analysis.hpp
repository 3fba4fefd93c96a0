#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "keyflux/ctmc/ctmc.hpp"
#include "keyflux/models.hpp"

namespace keyflux {

/// How the stabilisation month is detected from the monthly risk series.
enum class StabilisationMode {
  /// Risk stays within epsilon of the steady-state risk from month S onward.
  persistent_band,
  /// Successive monthly risks differ by less than epsilon from month S onward.
  successive_difference,
};

std::string_view to_string(StabilisationMode mode);

struct AnalysisConfig {
  double days_per_month = 30;
  int horizon_months = 120;
  double stabilisation_epsilon = 0.001;
  int observation_months = 12;
  StabilisationMode mode = StabilisationMode::persistent_band;
  SolverConfig solver;

  void validate() const;
};

struct RiskProfile {
  double steady_risk = 0;
  /// monthly_risk[m - 1] is the compromise probability at the end of month m.
  std::vector<double> monthly_risk;
  /// Largest monthly risk over months 1..S.
  double max_risk = 0;
  int stabilisation_month = 1;
};

struct CostProfile {
  int stabilisation_month = 1;
  /// Expected key updates in [0, S months].
  double cumulative_at_s = 0;
  /// Expected key updates in [0, S + observation months].
  double cumulative_after_observation = 0;
  double cost_pre_monthly = 0;
  double cost_post_monthly = 0;
};

struct AnalysisRecord {
  RiskProfile risk;
  CostProfile cost;
  /// Long-run updates per month from the stationary distribution.
  double steady_cost_rate = 0;
  /// Expected updates in [0, m months] for m = 1..horizon + observation.
  std::vector<double> cumulative_updates;
};

int stabilisation_month(std::span<const double> monthly_risk, double steady_risk, const AnalysisConfig& cfg);

RiskProfile risk_profile(const SparseCtmc& model, const AnalysisConfig& cfg);

CostProfile cost_profile(const SparseCtmc& model, int stabilisation, const AnalysisConfig& cfg);

double steady_cost_rate(const SparseCtmc& model, const AnalysisConfig& cfg);

/// Risk and cost in one forward transient pass over months
/// 1..horizon + observation, plus one steady-state solve.
AnalysisRecord analyze(const SparseCtmc& model, const AnalysisConfig& cfg);

enum class CurvePhase { before, after };

std::string_view to_string(CurvePhase phase);

struct CurvePoint {
  int threshold = 0;
  double cost_per_month = 0;
  double risk_percent = 0;
  int stabilisation_month = 0;

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct DesignCurve {
  StrategyKind kind = StrategyKind::LB;
  CurvePhase phase = CurvePhase::after;
  std::vector<CurvePoint> points;

  friend bool operator==(const DesignCurve&, const DesignCurve&) = default;
};

struct CurveRequest {
  StrategyKind kind;
  std::vector<int> thresholds;
};

/// Per-threshold results of one strategy, in threshold order.
struct StrategyResults {
  StrategyKind kind;
  std::vector<int> thresholds;
  std::vector<AnalysisRecord> records;
};

/// Before: (pre-stabilisation cost, 100 * max risk). After: (post-stabilisation
/// cost, 100 * steady risk). Points are sorted by threshold.
std::vector<DesignCurve> assemble_curves(const std::vector<StrategyResults>& results,
                                         const std::vector<CurvePhase>& phases = {CurvePhase::before,
                                                                                 CurvePhase::after});

struct SweepOptions {
  unsigned workers = 0;
  int erlang_k = 100;
  BuildOptions build;
  /// Called after each finished (kind, threshold) job, possibly from a worker thread.
  std::function<void(StrategyKind, int, const AnalysisRecord&)> on_point;
};

/// Analyzes every (kind, threshold) pair; output order follows the request.
std::vector<StrategyResults> run_sweep(const std::vector<CurveRequest>& requests, const NetworkParams& params,
                                       const AnalysisConfig& cfg, const SweepOptions& opts = {});

std::vector<DesignCurve> build_curves(const std::vector<CurveRequest>& requests, const NetworkParams& params,
                                      const AnalysisConfig& cfg, const SweepOptions& opts = {},
                                      const std::vector<CurvePhase>& phases = {CurvePhase::before,
                                                                              CurvePhase::after});

struct MonteCarloResult {
  std::vector<double> checkpoints;
  /// Fraction of trials compromised at each checkpoint.
  std::vector<double> risk;
  /// 95% confidence half-widths of `risk`.
  std::vector<double> risk_half_width;
  /// Mean number of key updates up to the last checkpoint.
  double mean_updates = 0;
  double updates_half_width = 0;
  std::size_t trials = 0;
};

/// Event-driven simulation of the strategy's transition rules. Each trial
/// draws from its own generator derived from `seed`, so results do not
/// depend on the worker count.
MonteCarloResult monte_carlo_estimate(const StrategySpec& spec, const NetworkParams& params,
                                      const std::vector<double>& checkpoints_days, std::size_t trials,
                                      std::uint64_t seed, unsigned workers = 1);

}  // namespace keyflux
