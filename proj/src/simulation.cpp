#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "keyflux/analysis.hpp"
#include "keyflux/parallel.hpp"

namespace keyflux {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Per-state race tables. Self-loops matter only when they earn reward.
struct JumpTable {
  std::vector<std::size_t> offsets;
  std::vector<double> cumulative;
  std::vector<StateIndex> targets;
  std::vector<std::uint8_t> rewarded;

  explicit JumpTable(const SparseCtmc& model) {
    const auto n = static_cast<std::size_t>(model.num_states());
    std::vector<std::vector<const Action<double>*>> by_source(n);
    for (const auto& a : model.actions())
      if (a.source != a.target || model.is_reward(a.label)) by_source[a.source].push_back(&a);
    offsets.push_back(0);
    for (const auto& list : by_source) {
      double acc = 0;
      for (const auto* a : list) {
        acc += a->rate;
        cumulative.push_back(acc);
        targets.push_back(a->target);
        rewarded.push_back(model.is_reward(a->label) ? 1 : 0);
      }
      offsets.push_back(cumulative.size());
    }
  }

  double total(StateIndex s) const {
    const std::size_t b = offsets[s], e = offsets[s + 1];
    return b == e ? 0.0 : cumulative[e - 1];
  }
};

struct Tally {
  std::vector<std::uint64_t> compromised;
  std::uint64_t updates = 0;
  double updates_sq = 0;
};

}  // namespace

MonteCarloResult monte_carlo_estimate(const StrategySpec& spec, const NetworkParams& params,
                                      const std::vector<double>& checkpoints_days, std::size_t trials,
                                      std::uint64_t seed, unsigned workers) {
  if (trials < 1) throw InvalidArgument("at least one trial is required");
  if (checkpoints_days.empty()) throw InvalidArgument("at least one checkpoint is required");
  for (std::size_t k = 0; k < checkpoints_days.size(); ++k) {
    if (!(checkpoints_days[k] >= 0) || !std::isfinite(checkpoints_days[k]))
      throw InvalidArgument("checkpoints must be finite and non-negative");
    if (k > 0 && checkpoints_days[k] < checkpoints_days[k - 1])
      throw InvalidArgument("checkpoints must be ascending");
  }

  const SparseCtmc model = build_model(spec, params);
  const JumpTable table(model);
  const double horizon = checkpoints_days.back();
  const std::size_t cps = checkpoints_days.size();

  const unsigned chunks = std::max(1u, workers == 0 ? default_workers() : workers);
  const std::size_t per_chunk = (trials + chunks - 1) / chunks;

  const auto tallies = parallel_map(chunks, workers, [&](std::size_t chunk) {
    Tally tally;
    tally.compromised.assign(cps, 0);
    const std::size_t begin = chunk * per_chunk;
    const std::size_t end = std::min(trials, begin + per_chunk);
    for (std::size_t trial = begin; trial < end; ++trial) {
      std::mt19937_64 rng(splitmix64(seed ^ splitmix64(trial)));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      StateIndex s = model.initial_state();
      double t = 0;
      std::size_t next_cp = 0;
      std::uint64_t updates = 0;
      for (;;) {
        const double rate = table.total(s);
        const double dt = rate > 0 ? -std::log1p(-unit(rng)) / rate : INFINITY;
        while (next_cp < cps && t + dt > checkpoints_days[next_cp]) {
          if (model.comp(s)) ++tally.compromised[next_cp];
          ++next_cp;
        }
        if (t + dt > horizon) break;
        t += dt;
        const double pick = unit(rng) * rate;
        const std::size_t b = table.offsets[s], e = table.offsets[s + 1];
        std::size_t k = static_cast<std::size_t>(
            std::upper_bound(table.cumulative.begin() + static_cast<std::ptrdiff_t>(b),
                             table.cumulative.begin() + static_cast<std::ptrdiff_t>(e), pick) -
            table.cumulative.begin());
        k = std::min(k, e - 1);
        if (table.rewarded[k]) ++updates;
        s = table.targets[k];
      }
      tally.updates += updates;
      tally.updates_sq += static_cast<double>(updates) * static_cast<double>(updates);
    }
    return tally;
  });

  MonteCarloResult out;
  out.trials = trials;
  out.checkpoints = checkpoints_days;
  const double n = static_cast<double>(trials);
  std::uint64_t total_updates = 0;
  double total_sq = 0;
  std::vector<std::uint64_t> comp(cps, 0);
  for (const auto& t : tallies) {
    for (std::size_t k = 0; k < cps; ++k) comp[k] += t.compromised[k];
    total_updates += t.updates;
    total_sq += t.updates_sq;
  }
  constexpr double z95 = 1.959963984540054;
  for (std::size_t k = 0; k < cps; ++k) {
    const double p = static_cast<double>(comp[k]) / n;
    out.risk.push_back(p);
    out.risk_half_width.push_back(z95 * std::sqrt(p * (1 - p) / n));
  }
  out.mean_updates = static_cast<double>(total_updates) / n;
  const double var = trials > 1 ? std::max(0.0, (total_sq - n * out.mean_updates * out.mean_updates) / (n - 1)) : 0.0;
  out.updates_half_width = z95 * std::sqrt(var / n);
  return out;
}

}  // namespace keyflux
