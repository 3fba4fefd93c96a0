#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "keyflux/analysis.hpp"
#include "keyflux/models.hpp"

namespace keyflux {

enum class VerifyScope { statespace, risk_average, risk_max, cost_after, cost_before, stabilisation, curves };

std::string_view to_string(VerifyScope scope);
std::optional<VerifyScope> parse_scope(std::string_view text);
std::vector<VerifyScope> all_scopes();

/// Comparison bands against the published tables.
struct Tolerances {
  double risk_average_abs = 0.001;
  double risk_max_abs = 0.004;
  double cost_after_rel = 0.01;
  double cost_before_rel = 0.05;
  /// Internal agreement of the post-stabilisation cost with the long-run rate.
  double steady_rate_rel = 0.01;
  int stabilisation_months = 1;

  static Tolerances acceptance() { return {}; }
  /// Agreement at the published rounding (three decimals).
  static Tolerances strict() { return {0.0005, 0.0005, 0.005, 0.05, 0.01, 0}; }
};

std::optional<Tolerances> parse_tolerance_profile(std::string_view name);

enum class EntryStatus { pass, fail, divergent };

std::string_view to_string(EntryStatus status);

struct VerificationEntry {
  VerifyScope scope;
  StrategyKind kind;
  int threshold = 0;
  int max = 0;
  std::string metric;
  double expected = 0;
  double computed = 0;
  double tolerance = 0;
  bool relative = false;
  EntryStatus status = EntryStatus::pass;
  std::string note;
};

struct VerificationReport {
  std::vector<VerificationEntry> entries;

  std::size_t count(EntryStatus status) const;
  /// True iff no entry failed; divergent entries are reported, not failed.
  bool passed() const { return count(EntryStatus::fail) == 0; }
  void append(const VerificationReport& other);
};

/// Exact state and transition counts for every listed (kind, threshold, max)
/// cell present in the reference tables.
VerificationReport verify_state_space(const std::vector<CurveRequest>& requests, const std::vector<int>& maxes,
                                      const BuildOptions& build = {}, unsigned workers = 0);

/// Compares analysis results at the default scenario with the published
/// tables. Pre-stabilisation costs are compared only where the computed
/// stabilisation month equals the published one; elsewhere the entry is
/// marked divergent and the note records both months and the cost at the
/// published month.
VerificationReport verify_results(const std::vector<StrategyResults>& results, const std::vector<VerifyScope>& scopes,
                                  const Tolerances& tol = Tolerances::acceptance());

}  // namespace keyflux
