#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "keyflux/ctmc/ctmc.hpp"

namespace keyflux {

enum class StrategyKind { LB, JB, JLB, TB, MB, HY };

inline constexpr std::array<StrategyKind, 6> kAllKinds{StrategyKind::LB, StrategyKind::JB, StrategyKind::JLB,
                                                       StrategyKind::TB, StrategyKind::MB, StrategyKind::HY};

std::string_view to_string(StrategyKind kind);
/// Accepts the short names in any letter case, plus "Hy/MB".
std::optional<StrategyKind> parse_kind(std::string_view text);
/// Threshold unit as a designer reads it ("Device", "Month", ...).
std::string_view threshold_unit(StrategyKind kind);
/// The five thresholds studied for each strategy.
std::vector<int> default_thresholds(StrategyKind kind);
/// Whether the counter-based strategies accept arbitrary thresholds; MB is
/// restricted to its message-count grid unless explicitly overridden.
bool is_standard_threshold(StrategyKind kind, int threshold);

/// Network scenario constants. Rates are per day.
struct NetworkParams {
  int max = 50;
  double r_join = 0.5;
  double r_leave = 0.00274;
  double r_message = 1.0;
  double p_comp = 0.0001;

  void validate() const;
  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

struct StrategySpec {
  StrategyKind kind = StrategyKind::LB;
  /// Devices (LB, JB, JLB), months (TB), messages (MB), or devices and months (HY).
  int threshold = 1;
  /// Erlang phase count of the update timer (TB and HY only).
  int erlang_k = 100;

  bool uses_timer() const { return kind == StrategyKind::TB || kind == StrategyKind::HY; }
  void validate() const;
  friend bool operator==(const StrategySpec&, const StrategySpec&) = default;
};

/// Variables of the composed device/coordinator system. Fields a strategy
/// does not use stay at 0 (counters) or 1 (phase).
struct StrategyState {
  int size = 0;
  bool comp = false;
  int counter = 0;
  int counter2 = 0;
  int phase = 1;

  friend bool operator==(const StrategyState&, const StrategyState&) = default;
};

enum class ActionLabel : LabelId { join, joinR, leave, leaveC, leaveR, message, messageC, messageR, tick, reset };

inline constexpr std::size_t kLabelCount = 10;
std::string_view to_string(ActionLabel label);

struct Transition {
  ActionLabel label;
  double rate;
  StrategyState target;
};

/// Appends every enabled synchronized action of `state` to `out`. Zero-rate
/// actions are omitted.
void enabled_transitions(const StrategySpec& spec, const NetworkParams& params, const StrategyState& state,
                         std::vector<Transition>& out);

/// Labels that earn one unit of reward per firing.
std::vector<ActionLabel> reward_labels(StrategyKind kind);

StrategyState initial_state(const NetworkParams& params);

struct BuildOptions {
  std::size_t state_cap = 10'000'000;
};

/// The chain together with the decoded state of every index.
struct StrategyModel {
  SparseCtmc ctmc;
  std::vector<StrategyState> states;
};

/// Breadth-first reachability from the initial state; indices follow
/// discovery order.
StrategyModel explore(const StrategySpec& spec, const NetworkParams& params, const BuildOptions& opts = {});

SparseCtmc build_model(const StrategySpec& spec, const NetworkParams& params, const BuildOptions& opts = {});

struct StateSpaceSummary {
  std::size_t states = 0;
  std::size_t merged_edges = 0;

  friend bool operator==(const StateSpaceSummary&, const StateSpaceSummary&) = default;
};

/// Counts reachable states and distinct (source, target) pairs without
/// materializing the chain.
StateSpaceSummary state_space_summary(const StrategySpec& spec, const NetworkParams& params,
                                      const BuildOptions& opts = {});

}  // namespace keyflux
