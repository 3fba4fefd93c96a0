#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "keyflux/errors.hpp"

namespace keyflux {

using StateIndex = std::int32_t;
using LabelId = std::uint16_t;

template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Probability vector over the states of a chain, indexed like the chain.
template <class Scalar>
using Distribution = Vector<Scalar>;

template <class Scalar>
using RowSparse = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, StateIndex>;

/// One labeled transition. Parallel actions between the same pair of states
/// are kept apart so that per-label rewards stay observable.
template <class Scalar>
struct Action {
  StateIndex source;
  StateIndex target;
  Scalar rate;
  LabelId label;
};

template <class Scalar>
struct MergedEdge {
  StateIndex source;
  StateIndex target;
  Scalar rate;

  friend bool operator==(const MergedEdge&, const MergedEdge&) = default;
};

/// Action-labeled sparse CTMC with a boolean compromise labeling and a set of
/// reward-bearing labels (each firing earns 1). Immutable after construction.
template <class Scalar>
class BasicCtmc {
 public:
  using scalar_type = Scalar;

  BasicCtmc(StateIndex num_states, StateIndex initial_state,
            std::vector<std::string> labels, std::vector<Action<Scalar>> actions,
            std::vector<std::uint8_t> comp, std::vector<LabelId> reward_labels)
      : num_states_(num_states),
        initial_state_(initial_state),
        labels_(std::move(labels)),
        actions_(std::move(actions)),
        comp_(std::move(comp)),
        reward_labels_(std::move(reward_labels)) {
    validate();
    std::sort(reward_labels_.begin(), reward_labels_.end());
    reward_labels_.erase(std::unique(reward_labels_.begin(), reward_labels_.end()),
                         reward_labels_.end());
    is_reward_.assign(labels_.size(), 0);
    for (LabelId id : reward_labels_) is_reward_[id] = 1;
  }

  StateIndex num_states() const { return num_states_; }
  StateIndex initial_state() const { return initial_state_; }
  const std::vector<Action<Scalar>>& actions() const { return actions_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label_name(LabelId id) const { return labels_.at(id); }
  const std::vector<LabelId>& reward_labels() const { return reward_labels_; }
  bool is_reward(LabelId id) const { return is_reward_[id] != 0; }
  bool comp(StateIndex s) const { return comp_[static_cast<std::size_t>(s)] != 0; }
  const std::vector<std::uint8_t>& comp_flags() const { return comp_; }

  /// Label id for `name`, or -1 when the label does not occur.
  int find_label(std::string_view name) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] == name) return static_cast<int>(i);
    return -1;
  }

 private:
  void validate() const {
    if (num_states_ < 1) throw InvalidArgument("a chain needs at least one state");
    if (initial_state_ < 0 || initial_state_ >= num_states_)
      throw InvalidArgument("initial state out of range");
    if (comp_.size() != static_cast<std::size_t>(num_states_))
      throw InvalidArgument("compromise labeling does not cover every state");
    if (labels_.size() > std::numeric_limits<LabelId>::max())
      throw InvalidArgument("too many action labels");
    std::vector<std::uint8_t> used(labels_.size(), 0);
    for (const auto& a : actions_) {
      if (a.source < 0 || a.source >= num_states_ || a.target < 0 || a.target >= num_states_)
        throw InvalidArgument("action endpoint out of range");
      if (!(a.rate > 0) || !std::isfinite(static_cast<double>(a.rate)))
        throw InvalidArgument("action rates must be positive and finite");
      if (a.label >= labels_.size()) throw InvalidArgument("action label out of range");
      used[a.label] = 1;
    }
    for (LabelId id : reward_labels_)
      if (id >= labels_.size() || !used[id])
        throw InvalidArgument("reward label does not label any action");
    if (!all_reachable()) throw InvalidArgument("chain contains states unreachable from the initial state");
  }

  bool all_reachable() const {
    std::vector<StateIndex> offsets(static_cast<std::size_t>(num_states_) + 1, 0);
    for (const auto& a : actions_) ++offsets[static_cast<std::size_t>(a.source) + 1];
    for (std::size_t i = 1; i < offsets.size(); ++i) offsets[i] += offsets[i - 1];
    std::vector<StateIndex> targets(actions_.size());
    std::vector<StateIndex> fill(offsets.begin(), offsets.end() - 1);
    for (const auto& a : actions_) targets[static_cast<std::size_t>(fill[a.source]++)] = a.target;

    std::vector<std::uint8_t> seen(static_cast<std::size_t>(num_states_), 0);
    std::vector<StateIndex> stack{initial_state_};
    seen[initial_state_] = 1;
    StateIndex count = 1;
    while (!stack.empty()) {
      StateIndex s = stack.back();
      stack.pop_back();
      for (StateIndex k = offsets[s]; k < offsets[s + 1]; ++k) {
        StateIndex t = targets[static_cast<std::size_t>(k)];
        if (!seen[t]) {
          seen[t] = 1;
          ++count;
          stack.push_back(t);
        }
      }
    }
    return count == num_states_;
  }

  StateIndex num_states_;
  StateIndex initial_state_;
  std::vector<std::string> labels_;
  std::vector<Action<Scalar>> actions_;
  std::vector<std::uint8_t> comp_;
  std::vector<LabelId> reward_labels_;
  std::vector<std::uint8_t> is_reward_;
};

using SparseCtmc = BasicCtmc<double>;

/// Incremental construction of a BasicCtmc with labels given by name.
template <class Scalar>
class CtmcBuilder {
 public:
  explicit CtmcBuilder(StateIndex num_states, StateIndex initial_state = 0)
      : num_states_(num_states), initial_state_(initial_state), comp_(static_cast<std::size_t>(num_states), 0) {}

  CtmcBuilder& action(StateIndex source, StateIndex target, Scalar rate, std::string_view label) {
    actions_.push_back({source, target, rate, intern(label)});
    return *this;
  }
  CtmcBuilder& comp(StateIndex s, bool flag = true) {
    comp_.at(static_cast<std::size_t>(s)) = flag ? 1 : 0;
    return *this;
  }
  CtmcBuilder& reward(std::string_view label) {
    rewards_.push_back(intern(label));
    return *this;
  }

  BasicCtmc<Scalar> build() const {
    return BasicCtmc<Scalar>(num_states_, initial_state_, labels_, actions_, comp_, rewards_);
  }

 private:
  LabelId intern(std::string_view label) {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] == label) return static_cast<LabelId>(i);
    labels_.emplace_back(label);
    return static_cast<LabelId>(labels_.size() - 1);
  }

  StateIndex num_states_;
  StateIndex initial_state_;
  std::vector<std::uint8_t> comp_;
  std::vector<std::string> labels_;
  std::vector<Action<Scalar>> actions_;
  std::vector<LabelId> rewards_;
};

/// Numerical knobs shared by the transient and steady-state solvers.
template <class Scalar>
struct BasicSolverConfig {
  Scalar truncation_tolerance = Scalar(1e-10);
  Scalar convergence_tolerance = Scalar(1e-9);
  std::size_t max_iterations = 1'000'000;
  Scalar uniformization_slack = Scalar(1.02);
  /// Stop iterating once successive uniformization vectors agree.
  bool steady_state_detection = true;

  void validate() const {
    auto in_unit = [](Scalar v) { return v > 0 && v < 1; };
    if (!in_unit(truncation_tolerance)) throw InvalidArgument("truncation tolerance must lie in (0, 1)");
    if (!in_unit(convergence_tolerance)) throw InvalidArgument("convergence tolerance must lie in (0, 1)");
    if (max_iterations < 1) throw InvalidArgument("max iterations must be at least 1");
    if (!(uniformization_slack >= 1) || !std::isfinite(static_cast<double>(uniformization_slack)))
      throw InvalidArgument("uniformization slack must be a finite multiplier >= 1");
  }
};

using SolverConfig = BasicSolverConfig<double>;

/// Parallel actions collapsed per (source, target), sorted by source then
/// target. Self-loops are kept.
template <class Scalar>
std::vector<MergedEdge<Scalar>> merged_edges(const BasicCtmc<Scalar>& model) {
  std::vector<MergedEdge<Scalar>> edges;
  edges.reserve(model.actions().size());
  for (const auto& a : model.actions()) edges.push_back({a.source, a.target, a.rate});
  std::stable_sort(edges.begin(), edges.end(), [](const auto& x, const auto& y) {
    return x.source != y.source ? x.source < y.source : x.target < y.target;
  });
  std::vector<MergedEdge<Scalar>> merged;
  merged.reserve(edges.size());
  for (const auto& e : edges) {
    if (!merged.empty() && merged.back().source == e.source && merged.back().target == e.target)
      merged.back().rate += e.rate;
    else
      merged.push_back(e);
  }
  return merged;
}

/// Total rate of leaving each state; self-loops do not count.
template <class Scalar>
Vector<Scalar> exit_rates(const BasicCtmc<Scalar>& model) {
  Vector<Scalar> exits = Vector<Scalar>::Zero(model.num_states());
  for (const auto& a : model.actions())
    if (a.source != a.target) exits[a.source] += a.rate;
  return exits;
}

/// Rate at which reward-labeled actions fire in each state (self-loops included).
template <class Scalar>
Vector<Scalar> reward_rates(const BasicCtmc<Scalar>& model) {
  Vector<Scalar> rewards = Vector<Scalar>::Zero(model.num_states());
  for (const auto& a : model.actions())
    if (model.is_reward(a.label)) rewards[a.source] += a.rate;
  return rewards;
}

/// Infinitesimal generator Q with Q(s,s) = -exit(s).
template <class Scalar>
RowSparse<Scalar> generator(const BasicCtmc<Scalar>& model) {
  std::vector<Eigen::Triplet<Scalar, StateIndex>> triplets;
  triplets.reserve(model.actions().size() + static_cast<std::size_t>(model.num_states()));
  for (const auto& a : model.actions())
    if (a.source != a.target) triplets.emplace_back(a.source, a.target, a.rate);
  const Vector<Scalar> exits = exit_rates(model);
  for (StateIndex s = 0; s < model.num_states(); ++s) triplets.emplace_back(s, s, -exits[s]);
  RowSparse<Scalar> q(model.num_states(), model.num_states());
  q.setFromTriplets(triplets.begin(), triplets.end());
  return q;
}

/// Probability mass on states labeled Comp.
template <class Scalar, class Derived>
Scalar comp_mass(const BasicCtmc<Scalar>& model, const Eigen::MatrixBase<Derived>& dist) {
  Scalar mass = 0;
  for (StateIndex s = 0; s < model.num_states(); ++s)
    if (model.comp(s)) mass += dist[s];
  return mass;
}

template <class Scalar>
Distribution<Scalar> point_mass(const BasicCtmc<Scalar>& model) {
  Distribution<Scalar> d = Distribution<Scalar>::Zero(model.num_states());
  d[model.initial_state()] = 1;
  return d;
}

/// Number of strongly connected components of the transition digraph
/// (self-loops ignored), by an iterative Tarjan traversal.
template <class Scalar>
std::size_t scc_count(const BasicCtmc<Scalar>& model) {
  const auto n = static_cast<std::size_t>(model.num_states());
  std::vector<StateIndex> offsets(n + 1, 0);
  for (const auto& a : model.actions())
    if (a.source != a.target) ++offsets[static_cast<std::size_t>(a.source) + 1];
  for (std::size_t i = 1; i <= n; ++i) offsets[i] += offsets[i - 1];
  std::vector<StateIndex> adj(static_cast<std::size_t>(offsets[n]));
  std::vector<StateIndex> fill(offsets.begin(), offsets.end() - 1);
  for (const auto& a : model.actions())
    if (a.source != a.target) adj[static_cast<std::size_t>(fill[a.source]++)] = a.target;

  constexpr StateIndex unvisited = -1;
  std::vector<StateIndex> index(n, unvisited), low(n, 0), cursor(n, 0);
  std::vector<std::uint8_t> on_stack(n, 0);
  std::vector<StateIndex> stack, call;
  StateIndex next_index = 0;
  std::size_t components = 0;

  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != unvisited) continue;
    call.push_back(static_cast<StateIndex>(root));
    while (!call.empty()) {
      const StateIndex v = call.back();
      if (index[v] == unvisited) {
        index[v] = low[v] = next_index++;
        cursor[v] = offsets[v];
        stack.push_back(v);
        on_stack[v] = 1;
      }
      bool descended = false;
      while (cursor[v] < offsets[v + 1]) {
        const StateIndex w = adj[static_cast<std::size_t>(cursor[v]++)];
        if (index[w] == unvisited) {
          call.push_back(w);
          descended = true;
          break;
        }
        if (on_stack[w]) low[v] = std::min(low[v], index[w]);
      }
      if (descended) continue;
      call.pop_back();
      if (!call.empty()) low[call.back()] = std::min(low[call.back()], low[v]);
      if (low[v] == index[v]) {
        ++components;
        StateIndex w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
        } while (w != v);
      }
    }
  }
  return components;
}

template <class Scalar>
bool strongly_connected(const BasicCtmc<Scalar>& model) {
  return scc_count(model) == 1;
}

}  // namespace keyflux
