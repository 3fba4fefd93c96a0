#include "keyflux/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "keyflux/ctmc.hpp"
#include "keyflux/parallel.hpp"

namespace keyflux {

std::string_view to_string(StabilisationMode mode) {
  return mode == StabilisationMode::persistent_band ? "persistent-band" : "successive-difference";
}

std::string_view to_string(CurvePhase phase) { return phase == CurvePhase::before ? "before" : "after"; }

void AnalysisConfig::validate() const {
  if (!(days_per_month > 0) || !std::isfinite(days_per_month)) throw InvalidArgument("days per month must be positive");
  if (observation_months < 1) throw InvalidArgument("observation months must be at least 1");
  if (horizon_months < observation_months) throw InvalidArgument("horizon must cover the observation period");
  if (!(stabilisation_epsilon > 0) || !std::isfinite(stabilisation_epsilon))
    throw InvalidArgument("stabilisation epsilon must be positive");
  solver.validate();
}

int stabilisation_month(std::span<const double> monthly_risk, double steady_risk, const AnalysisConfig& cfg) {
  const auto horizon = static_cast<std::size_t>(cfg.horizon_months);
  const std::size_t n = std::min(monthly_risk.size(), horizon);
  const double eps = cfg.stabilisation_epsilon;
  // Months are 1-based; monthly_risk[m - 1] belongs to month m.
  for (std::size_t m = n; m >= 1; --m) {
    bool outside;
    if (cfg.mode == StabilisationMode::persistent_band) {
      outside = !(std::abs(monthly_risk[m - 1] - steady_risk) < eps);
      if (outside) return static_cast<int>(std::min(m + 1, horizon));
    } else {
      if (m == 1) break;
      outside = !(std::abs(monthly_risk[m - 1] - monthly_risk[m - 2]) < eps);
      if (outside) return static_cast<int>(m);
    }
  }
  return 1;
}

namespace {

double max_until(const std::vector<double>& monthly, int stabilisation) {
  const auto end = monthly.begin() + std::min<std::ptrdiff_t>(stabilisation, std::ssize(monthly));
  return monthly.empty() ? 0.0 : *std::max_element(monthly.begin(), end);
}

std::vector<double> month_ends(int months, double days_per_month) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(months));
  for (int m = 1; m <= months; ++m) out.push_back(days_per_month * m);
  return out;
}

CostProfile costs_from(double at_s, double after, int stabilisation, const AnalysisConfig& cfg) {
  CostProfile c;
  c.stabilisation_month = stabilisation;
  c.cumulative_at_s = at_s;
  c.cumulative_after_observation = after;
  c.cost_pre_monthly = at_s / stabilisation;
  c.cost_post_monthly = (after - at_s) / cfg.observation_months;
  return c;
}

}  // namespace

RiskProfile risk_profile(const SparseCtmc& model, const AnalysisConfig& cfg) {
  cfg.validate();
  RiskProfile risk;
  risk.steady_risk = comp_mass(model, steady_state(model, cfg.solver));
  transient_sweep(model, month_ends(cfg.horizon_months, cfg.days_per_month), cfg.solver,
                  [&](std::size_t, const Distribution<double>& d, double) {
                    risk.monthly_risk.push_back(comp_mass(model, d));
                  });
  risk.stabilisation_month = stabilisation_month(risk.monthly_risk, risk.steady_risk, cfg);
  risk.max_risk = max_until(risk.monthly_risk, risk.stabilisation_month);
  return risk;
}

CostProfile cost_profile(const SparseCtmc& model, int stabilisation, const AnalysisConfig& cfg) {
  cfg.validate();
  if (stabilisation < 1 || stabilisation > cfg.horizon_months)
    throw InvalidArgument("stabilisation month must lie in [1, horizon]");
  const std::vector<double> checkpoints{cfg.days_per_month * stabilisation,
                                        cfg.days_per_month * (stabilisation + cfg.observation_months)};
  std::vector<double> cumulative;
  transient_sweep(model, checkpoints, cfg.solver,
                  [&](std::size_t, const Distribution<double>&, double reward) { cumulative.push_back(reward); });
  return costs_from(cumulative[0], cumulative[1], stabilisation, cfg);
}

double steady_cost_rate(const SparseCtmc& model, const AnalysisConfig& cfg) {
  cfg.validate();
  if (model.reward_labels().empty()) return 0;
  return cfg.days_per_month * steady_state(model, cfg.solver).dot(reward_rates(model));
}

AnalysisRecord analyze(const SparseCtmc& model, const AnalysisConfig& cfg) {
  cfg.validate();
  AnalysisRecord rec;
  const Distribution<double> pi = steady_state(model, cfg.solver);
  rec.risk.steady_risk = comp_mass(model, pi);
  rec.steady_cost_rate = cfg.days_per_month * pi.dot(reward_rates(model));

  const int months = cfg.horizon_months + cfg.observation_months;
  std::vector<double> risk;
  std::vector<double> cumulative;
  transient_sweep(model, month_ends(months, cfg.days_per_month), cfg.solver,
                  [&](std::size_t, const Distribution<double>& d, double reward) {
                    risk.push_back(comp_mass(model, d));
                    cumulative.push_back(reward);
                  });

  rec.risk.monthly_risk.assign(risk.begin(), risk.begin() + cfg.horizon_months);
  const int s = stabilisation_month(rec.risk.monthly_risk, rec.risk.steady_risk, cfg);
  rec.risk.stabilisation_month = s;
  rec.risk.max_risk = max_until(rec.risk.monthly_risk, s);
  rec.cost = costs_from(cumulative[static_cast<std::size_t>(s - 1)],
                        cumulative[static_cast<std::size_t>(s + cfg.observation_months - 1)], s, cfg);
  rec.cumulative_updates = std::move(cumulative);
  return rec;
}

std::vector<DesignCurve> assemble_curves(const std::vector<StrategyResults>& results,
                                         const std::vector<CurvePhase>& phases) {
  std::vector<DesignCurve> curves;
  for (const auto& r : results) {
    for (CurvePhase phase : phases) {
      DesignCurve curve{r.kind, phase, {}};
      for (std::size_t i = 0; i < r.thresholds.size(); ++i) {
        const AnalysisRecord& rec = r.records[i];
        const bool before = phase == CurvePhase::before;
        curve.points.push_back({r.thresholds[i], before ? rec.cost.cost_pre_monthly : rec.cost.cost_post_monthly,
                                100.0 * (before ? rec.risk.max_risk : rec.risk.steady_risk),
                                rec.risk.stabilisation_month});
      }
      std::stable_sort(curve.points.begin(), curve.points.end(),
                       [](const CurvePoint& a, const CurvePoint& b) { return a.threshold < b.threshold; });
      curves.push_back(std::move(curve));
    }
  }
  return curves;
}

std::vector<StrategyResults> run_sweep(const std::vector<CurveRequest>& requests, const NetworkParams& params,
                                       const AnalysisConfig& cfg, const SweepOptions& opts) {
  cfg.validate();
  params.validate();
  struct Job {
    std::size_t request;
    int threshold;
  };
  std::vector<Job> jobs;
  for (std::size_t r = 0; r < requests.size(); ++r) {
    if (requests[r].thresholds.empty()) throw InvalidArgument("every strategy needs at least one threshold");
    for (int t : requests[r].thresholds) jobs.push_back({r, t});
  }
  const auto records = parallel_map(jobs.size(), opts.workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    const StrategySpec spec{requests[job.request].kind, job.threshold, opts.erlang_k};
    AnalysisRecord rec = analyze(build_model(spec, params, opts.build), cfg);
    if (opts.on_point) opts.on_point(spec.kind, spec.threshold, rec);
    return rec;
  });

  std::vector<StrategyResults> out;
  for (const auto& req : requests) out.push_back({req.kind, req.thresholds, {}});
  for (std::size_t i = 0; i < jobs.size(); ++i) out[jobs[i].request].records.push_back(records[i]);
  return out;
}

std::vector<DesignCurve> build_curves(const std::vector<CurveRequest>& requests, const NetworkParams& params,
                                      const AnalysisConfig& cfg, const SweepOptions& opts,
                                      const std::vector<CurvePhase>& phases) {
  if (requests.empty()) throw InvalidArgument("no strategies requested");
  return assemble_curves(run_sweep(requests, params, cfg, opts), phases);
}

}  // namespace keyflux
