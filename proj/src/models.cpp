#include "keyflux/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace keyflux {

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::LB: return "LB";
    case StrategyKind::JB: return "JB";
    case StrategyKind::JLB: return "JLB";
    case StrategyKind::TB: return "TB";
    case StrategyKind::MB: return "MB";
    case StrategyKind::HY: return "HY";
  }
  return "?";
}

std::optional<StrategyKind> parse_kind(std::string_view text) {
  std::string upper(text);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (upper == "HY/MB") return StrategyKind::HY;
  for (StrategyKind k : kAllKinds)
    if (upper == to_string(k)) return k;
  return std::nullopt;
}

std::string_view threshold_unit(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::TB: return "Month";
    case StrategyKind::MB: return "Message";
    case StrategyKind::HY: return "Device and Month";
    default: return "Device";
  }
}

std::vector<int> default_thresholds(StrategyKind kind) {
  if (kind == StrategyKind::MB) return {500, 1000, 1500, 2000, 2500};
  return {1, 2, 3, 4, 5};
}

bool is_standard_threshold(StrategyKind kind, int threshold) {
  if (kind != StrategyKind::MB) return threshold >= 1;
  const auto grid = default_thresholds(kind);
  return std::find(grid.begin(), grid.end(), threshold) != grid.end();
}

void NetworkParams::validate() const {
  auto rate_ok = [](double r) { return std::isfinite(r) && r >= 0; };
  if (max < 1) throw InvalidArgument("max must be at least 1");
  if (!rate_ok(r_join)) throw InvalidArgument("r_join must be a finite non-negative rate");
  if (!rate_ok(r_leave)) throw InvalidArgument("r_leave must be a finite non-negative rate");
  if (!rate_ok(r_message)) throw InvalidArgument("r_message must be a finite non-negative rate");
  if (!(p_comp >= 0 && p_comp <= 1)) throw InvalidArgument("p_comp must lie in [0, 1]");
}

void StrategySpec::validate() const {
  if (threshold < 1) throw InvalidArgument("threshold must be at least 1");
  if (uses_timer() && erlang_k < 1) throw InvalidArgument("Erlang phase count must be at least 1");
}

std::string_view to_string(ActionLabel label) {
  switch (label) {
    case ActionLabel::join: return "join";
    case ActionLabel::joinR: return "joinR";
    case ActionLabel::leave: return "leave";
    case ActionLabel::leaveC: return "leaveC";
    case ActionLabel::leaveR: return "leaveR";
    case ActionLabel::message: return "message";
    case ActionLabel::messageC: return "messageC";
    case ActionLabel::messageR: return "messageR";
    case ActionLabel::tick: return "tick";
    case ActionLabel::reset: return "reset";
  }
  return "?";
}

std::vector<ActionLabel> reward_labels(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::LB: return {ActionLabel::leaveR};
    case StrategyKind::JB: return {ActionLabel::joinR};
    case StrategyKind::JLB: return {ActionLabel::leaveR, ActionLabel::joinR};
    case StrategyKind::TB: return {ActionLabel::reset};
    case StrategyKind::MB: return {ActionLabel::messageR};
    case StrategyKind::HY: return {ActionLabel::joinR, ActionLabel::leaveR, ActionLabel::reset};
  }
  return {};
}

StrategyState initial_state(const NetworkParams& params) { return {params.max, false, 0, 0, 1}; }

namespace {

StrategyState with_size(StrategyState s, int size) {
  s.size = size;
  return s;
}

StrategyState compromised(StrategyState s) {
  s.comp = true;
  return s;
}

/// Clears the key and every counter, as after a hybrid key update.
StrategyState full_reset(StrategyState s) {
  s.comp = false;
  s.counter = 0;
  s.counter2 = 0;
  s.phase = 1;
  return s;
}

}  // namespace

void enabled_transitions(const StrategySpec& spec, const NetworkParams& p, const StrategyState& s,
                         std::vector<Transition>& out) {
  auto emit = [&out](ActionLabel label, double rate, const StrategyState& target) {
    if (rate > 0) out.push_back({label, rate, target});
  };

  const int n = spec.threshold;
  const double size = s.size;
  const bool can_join = s.size < p.max;
  const bool can_leave = s.size > 0;
  const double join_rate = p.r_join * (p.max - s.size);
  const double leave_rate = p.r_leave * (1 - p.p_comp) * size;
  const double leave_c_rate = p.r_leave * p.p_comp * size;
  const double leave_r_rate = p.r_leave * size;
  const double message_rate = p.r_message * (1 - p.p_comp) * size;
  const double message_c_rate = p.r_message * p.p_comp * size;
  const double message_r_rate = p.r_message * size;
  const double phase_rate = spec.uses_timer() ? spec.erlang_k / (30.0 * n) : 0.0;

  const StrategyState up = with_size(s, s.size + 1);
  const StrategyState down = with_size(s, s.size - 1);

  // Messages that never touch a counter.
  auto plain_messages = [&] {
    if (!can_leave) return;
    emit(ActionLabel::message, message_rate, s);
    emit(ActionLabel::messageC, message_c_rate, compromised(s));
  };
  auto plain_leaves = [&] {
    if (!can_leave) return;
    emit(ActionLabel::leave, leave_rate, down);
    emit(ActionLabel::leaveC, leave_c_rate, compromised(down));
  };
  auto plain_join = [&] {
    if (can_join) emit(ActionLabel::join, join_rate, up);
  };
  auto timer = [&] {
    if (s.phase < spec.erlang_k) {
      StrategyState next = s;
      ++next.phase;
      emit(ActionLabel::tick, phase_rate, next);
    }
    if (s.phase == spec.erlang_k) {
      StrategyState next = spec.kind == StrategyKind::HY ? full_reset(s) : s;
      next.phase = 1;
      next.comp = false;
      emit(ActionLabel::reset, 1.0 * phase_rate, next);
    }
  };
  // Leaves counted on `counter`; the N-th leave updates the key.
  auto counted_leaves = [&](int StrategyState::*field, bool full) {
    if (!can_leave) return;
    if (s.*field < n - 1) {
      StrategyState next = down;
      ++(next.*field);
      emit(ActionLabel::leave, leave_rate, next);
      emit(ActionLabel::leaveC, leave_c_rate, compromised(next));
    }
    if (s.*field == n - 1) {
      StrategyState next = full ? full_reset(down) : down;
      next.*field = 0;
      next.comp = false;
      emit(ActionLabel::leaveR, leave_r_rate, next);
    }
  };
  auto counted_joins = [&](bool full) {
    if (!can_join) return;
    if (s.counter < n - 1) {
      StrategyState next = up;
      ++next.counter;
      emit(ActionLabel::join, join_rate, next);
    }
    if (s.counter == n - 1) {
      StrategyState next = full ? full_reset(up) : up;
      next.counter = 0;
      next.comp = false;
      emit(ActionLabel::joinR, join_rate, next);
    }
  };

  switch (spec.kind) {
    case StrategyKind::LB:
      plain_join();
      counted_leaves(&StrategyState::counter, false);
      plain_messages();
      break;
    case StrategyKind::JB:
      counted_joins(false);
      plain_leaves();
      plain_messages();
      break;
    case StrategyKind::JLB:
      counted_joins(false);
      counted_leaves(&StrategyState::counter, false);
      plain_messages();
      break;
    case StrategyKind::TB:
      plain_join();
      plain_leaves();
      plain_messages();
      timer();
      break;
    case StrategyKind::MB:
      plain_join();
      plain_leaves();
      if (can_leave) {
        if (s.counter < n - 1) {
          StrategyState next = s;
          ++next.counter;
          emit(ActionLabel::message, message_rate, next);
          emit(ActionLabel::messageC, message_c_rate, compromised(next));
        }
        if (s.counter == n - 1) {
          StrategyState next = s;
          next.counter = 0;
          next.comp = false;
          emit(ActionLabel::messageR, message_r_rate, next);
        }
      }
      break;
    case StrategyKind::HY:
      counted_joins(true);
      counted_leaves(&StrategyState::counter2, true);
      plain_messages();
      timer();
      break;
  }
}

namespace {

/// Maps states to dense indices. Uses a flat table over the declared variable
/// box when it is small enough, a hash map otherwise.
class StateTable {
 public:
  StateTable(const StrategySpec& spec, const NetworkParams& params) {
    const bool counted = spec.kind != StrategyKind::TB;
    counter_span_ = counted ? spec.threshold : 1;
    counter2_span_ = spec.kind == StrategyKind::HY ? spec.threshold : 1;
    phase_span_ = spec.uses_timer() ? spec.erlang_k : 1;
    size_span_ = params.max + 1;
    const double box = 2.0 * size_span_ * counter_span_ * counter2_span_ * phase_span_;
    if (box <= kFlatLimit) flat_.assign(static_cast<std::size_t>(box), -1);
  }

  /// Index of `s`, or -1 if unseen.
  StateIndex find(const StrategyState& s) const {
    const std::uint64_t key = encode(s);
    if (!flat_.empty()) return flat_[key];
    auto it = hashed_.find(key);
    return it == hashed_.end() ? -1 : it->second;
  }

  void insert(const StrategyState& s, StateIndex index) {
    const std::uint64_t key = encode(s);
    if (!flat_.empty())
      flat_[key] = index;
    else
      hashed_.emplace(key, index);
  }

 private:
  static constexpr double kFlatLimit = 64.0 * 1024 * 1024;

  std::uint64_t encode(const StrategyState& s) const {
    if (s.size < 0 || s.size >= size_span_ || s.counter < 0 || s.counter >= counter_span_ || s.counter2 < 0 ||
        s.counter2 >= counter2_span_ || s.phase < 1 || s.phase > phase_span_)
      throw std::logic_error("strategy state outside its variable ranges");
    std::uint64_t key = static_cast<std::uint64_t>(s.size);
    key = key * 2 + (s.comp ? 1 : 0);
    key = key * static_cast<std::uint64_t>(counter_span_) + static_cast<std::uint64_t>(s.counter);
    key = key * static_cast<std::uint64_t>(counter2_span_) + static_cast<std::uint64_t>(s.counter2);
    key = key * static_cast<std::uint64_t>(phase_span_) + static_cast<std::uint64_t>(s.phase - 1);
    return key;
  }

  int size_span_ = 1;
  int counter_span_ = 1;
  int counter2_span_ = 1;
  int phase_span_ = 1;
  std::vector<StateIndex> flat_;
  std::unordered_map<std::uint64_t, StateIndex> hashed_;
};

/// Breadth-first exploration; `visit(source, state, transitions, targets)` is
/// called once per state in discovery order with resolved target indices.
template <class Visit>
std::vector<StrategyState> breadth_first(const StrategySpec& spec, const NetworkParams& params,
                                         const BuildOptions& opts, Visit&& visit) {
  spec.validate();
  params.validate();
  StateTable table(spec, params);
  std::vector<StrategyState> order{initial_state(params)};
  table.insert(order.front(), 0);
  std::vector<Transition> transitions;
  std::vector<StateIndex> targets;

  for (std::size_t head = 0; head < order.size(); ++head) {
    const StrategyState current = order[head];
    transitions.clear();
    targets.clear();
    enabled_transitions(spec, params, current, transitions);
    for (const auto& t : transitions) {
      StateIndex idx = table.find(t.target);
      if (idx < 0) {
        if (order.size() >= opts.state_cap) throw StateCapExceeded(opts.state_cap);
        idx = static_cast<StateIndex>(order.size());
        table.insert(t.target, idx);
        order.push_back(t.target);
      }
      targets.push_back(idx);
    }
    visit(static_cast<StateIndex>(head), current, transitions, targets);
  }
  return order;
}

}  // namespace

StrategyModel explore(const StrategySpec& spec, const NetworkParams& params, const BuildOptions& opts) {
  std::vector<Action<double>> actions;
  std::vector<std::uint8_t> used(kLabelCount, 0);
  auto states = breadth_first(
      spec, params, opts,
      [&](StateIndex source, const StrategyState&, const std::vector<Transition>& ts,
          const std::vector<StateIndex>& targets) {
        for (std::size_t i = 0; i < ts.size(); ++i) {
          const auto label = static_cast<LabelId>(ts[i].label);
          actions.push_back({source, targets[i], ts[i].rate, label});
          used[label] = 1;
        }
      });

  std::vector<std::string> labels;
  for (std::size_t i = 0; i < kLabelCount; ++i) labels.emplace_back(to_string(static_cast<ActionLabel>(i)));
  std::vector<std::uint8_t> comp(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) comp[i] = states[i].comp ? 1 : 0;
  std::vector<LabelId> rewards;
  for (ActionLabel l : reward_labels(spec.kind))
    if (used[static_cast<LabelId>(l)]) rewards.push_back(static_cast<LabelId>(l));

  SparseCtmc ctmc(static_cast<StateIndex>(states.size()), 0, std::move(labels), std::move(actions), std::move(comp),
                  std::move(rewards));
  return {std::move(ctmc), std::move(states)};
}

SparseCtmc build_model(const StrategySpec& spec, const NetworkParams& params, const BuildOptions& opts) {
  return explore(spec, params, opts).ctmc;
}

StateSpaceSummary state_space_summary(const StrategySpec& spec, const NetworkParams& params,
                                      const BuildOptions& opts) {
  StateSpaceSummary summary;
  std::vector<StateIndex> scratch;
  auto states = breadth_first(
      spec, params, opts,
      [&](StateIndex, const StrategyState&, const std::vector<Transition>&, const std::vector<StateIndex>& targets) {
        scratch.assign(targets.begin(), targets.end());
        std::sort(scratch.begin(), scratch.end());
        summary.merged_edges +=
            static_cast<std::size_t>(std::unique(scratch.begin(), scratch.end()) - scratch.begin());
      });
  summary.states = states.size();
  return summary;
}

}  // namespace keyflux
