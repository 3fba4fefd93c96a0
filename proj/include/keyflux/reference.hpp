#pragma once

#include <optional>
#include <vector>

#include "keyflux/models.hpp"

namespace keyflux::reference {

/// Published results at the default scenario (max = 50), keyed by strategy
/// and threshold. Lookups outside the tables return nullopt.
std::optional<double> risk_max(StrategyKind kind, int threshold);
std::optional<double> risk_average(StrategyKind kind, int threshold);
std::optional<double> cost_before(StrategyKind kind, int threshold);
std::optional<double> cost_after(StrategyKind kind, int threshold);
std::optional<int> stabilisation_month(StrategyKind kind, int threshold);

/// Reachable states and distinct transitions for max in {50, 100, 500}.
std::optional<StateSpaceSummary> state_space(StrategyKind kind, int threshold, int max);

std::vector<int> table_max_values();

}  // namespace keyflux::reference
