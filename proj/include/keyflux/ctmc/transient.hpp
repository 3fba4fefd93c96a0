#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "keyflux/ctmc/ctmc.hpp"
#include "keyflux/ctmc/fp_env.hpp"
#include "keyflux/ctmc/poisson.hpp"

namespace keyflux {

/// The uniformized chain P = I + Q/q, stored transposed so that one step of a
/// distribution is a single sparse matrix-vector product.
template <class Scalar>
class Uniformized {
 public:
  Uniformized(const BasicCtmc<Scalar>& model, const BasicSolverConfig<Scalar>& cfg)
      : rewards_(keyflux::reward_rates(model)) {
    cfg.validate();
    const Vector<Scalar> exits = exit_rates(model);
    rate_ = model.num_states() > 0 ? cfg.uniformization_slack * exits.maxCoeff() : Scalar(0);
    has_rewards_ = rewards_.size() > 0 && rewards_.cwiseAbs().maxCoeff() > 0;
    const StateIndex n = model.num_states();
    transposed_.resize(n, n);
    if (rate_ <= 0) {
      transposed_.setIdentity();
      return;
    }
    std::vector<Eigen::Triplet<Scalar, StateIndex>> triplets;
    triplets.reserve(model.actions().size() + static_cast<std::size_t>(n));
    for (const auto& a : model.actions())
      if (a.source != a.target) triplets.emplace_back(a.target, a.source, a.rate / rate_);
    for (StateIndex s = 0; s < n; ++s) triplets.emplace_back(s, s, 1 - exits[s] / rate_);
    transposed_.setFromTriplets(triplets.begin(), triplets.end());
    transposed_.makeCompressed();
  }

  /// Uniformization rate q.
  Scalar rate() const { return rate_; }
  const RowSparse<Scalar>& transposed() const { return transposed_; }
  const Vector<Scalar>& reward_rates() const { return rewards_; }
  bool has_rewards() const { return has_rewards_; }

  /// One step next = v P, fused with `acc += weight * v`. Returns ||next - v||_inf.
  Scalar step(const Distribution<Scalar>& v, Distribution<Scalar>& next, Scalar weight,
              Distribution<Scalar>& acc) const {
    const StateIndex n = transposed_.rows();
    const StateIndex* __restrict outer = transposed_.outerIndexPtr();
    const StateIndex* __restrict inner = transposed_.innerIndexPtr();
    const Scalar* __restrict values = transposed_.valuePtr();
    const Scalar* __restrict in = v.data();
    Scalar* __restrict out = next.data();
    Scalar* __restrict sum = acc.data();
    Scalar change = 0;
    StateIndex k = outer[0];
    for (StateIndex j = 0; j < n; ++j) {
      const StateIndex end = outer[j + 1];
      Scalar x = 0;
      for (; k < end; ++k) x += values[k] * in[inner[k]];
      out[j] = x;
      const Scalar d = x - in[j];
      change = std::max(change, d < 0 ? -d : d);
      sum[j] += weight * in[j];
    }
    return change;
  }

 private:
  Scalar rate_ = 0;
  bool has_rewards_ = false;
  Vector<Scalar> rewards_;
  RowSparse<Scalar> transposed_;
};

/// Advances `dist` by `duration` days in place and returns the reward
/// accumulated along the way:
///   dist <- sum_i w_i v_i,   reward = (1/q) sum_i P(N > i) (v_i . r),
/// with v_i = dist P^i and N ~ Poisson(q * duration). When successive v_i
/// stop changing, the remaining Poisson mass is assigned to the last vector.
template <class Scalar>
Scalar advance(const Uniformized<Scalar>& chain, Distribution<Scalar>& dist, Scalar duration,
               const BasicSolverConfig<Scalar>& cfg) {
  if (!(duration >= 0) || !std::isfinite(static_cast<double>(duration)))
    throw InvalidArgument("time must be finite and non-negative");
  if (duration == 0) return 0;
  const Vector<Scalar>& r = chain.reward_rates();
  if (chain.rate() <= 0) return chain.has_rewards() ? duration * dist.dot(r) : Scalar(0);

  const FlushSubnormals flush;
  const Scalar q = chain.rate();
  const PoissonWeights<Scalar> pw = poisson_weights(q * duration, cfg.truncation_tolerance);
  const Scalar kept = pw.total();
  const std::size_t left = pw.left;
  const std::size_t right = pw.right;

  // ccdf[i] = P(N > i) / kept for i in [0, right], restricted to the window.
  std::vector<Scalar> ccdf;
  if (chain.has_rewards()) {
    ccdf.assign(right + 1, 0);
    Scalar tail = 0;
    for (std::size_t i = right; i-- > 0;) {
      if (i + 1 >= left) tail += pw[i + 1];
      ccdf[i] = tail / kept;
    }
  }

  Distribution<Scalar> v = dist;
  Distribution<Scalar> next(v.size());
  Distribution<Scalar> acc = Distribution<Scalar>::Zero(v.size());
  Scalar reward = 0;

  for (std::size_t i = 0;; ++i) {
    if (chain.has_rewards()) reward += ccdf[i] * v.dot(r);
    const Scalar weight = i >= left ? pw[i] : Scalar(0);
    if (i == right) {
      acc.noalias() += weight * v;
      break;
    }
    const Scalar change = chain.step(v, next, weight, acc);
    if (cfg.steady_state_detection && change < cfg.convergence_tolerance) {
      Scalar remaining_weight = 0;
      for (std::size_t j = std::max(i + 1, left); j <= right; ++j) remaining_weight += pw[j];
      acc.noalias() += remaining_weight * next;
      if (chain.has_rewards()) {
        Scalar remaining_ccdf = 0;
        for (std::size_t j = i + 1; j <= right; ++j) remaining_ccdf += ccdf[j];
        reward += remaining_ccdf * next.dot(r);
      }
      break;
    }
    v.swap(next);
  }

  dist = acc / kept;
  return reward / q;
}

/// Walks ascending checkpoints in one forward pass; `visit(k, dist, reward)`
/// receives the distribution at checkpoint k and the reward accumulated on
/// [0, checkpoint k].
template <class Scalar, class Visitor>
void transient_sweep(const BasicCtmc<Scalar>& model, const std::vector<Scalar>& checkpoints,
                     const BasicSolverConfig<Scalar>& cfg, Visitor&& visit) {
  for (std::size_t k = 0; k < checkpoints.size(); ++k) {
    if (!(checkpoints[k] >= 0) || !std::isfinite(static_cast<double>(checkpoints[k])))
      throw InvalidArgument("checkpoints must be finite and non-negative");
    if (k > 0 && checkpoints[k] < checkpoints[k - 1]) throw InvalidArgument("checkpoints must be ascending");
  }
  if (checkpoints.empty()) return;
  const Uniformized<Scalar> chain(model, cfg);
  Distribution<Scalar> dist = point_mass(model);
  Scalar now = 0;
  Scalar reward = 0;
  for (std::size_t k = 0; k < checkpoints.size(); ++k) {
    reward += advance(chain, dist, checkpoints[k] - now, cfg);
    now = checkpoints[k];
    visit(k, std::as_const(dist), reward);
  }
}

template <class Scalar>
Distribution<Scalar> transient_at(const BasicCtmc<Scalar>& model, Scalar days,
                                  const BasicSolverConfig<Scalar>& cfg) {
  const Uniformized<Scalar> chain(model, cfg);
  Distribution<Scalar> dist = point_mass(model);
  advance(chain, dist, days, cfg);
  return dist;
}

template <class Scalar>
std::vector<Distribution<Scalar>> transient_series(const BasicCtmc<Scalar>& model,
                                                   const std::vector<Scalar>& checkpoints,
                                                   const BasicSolverConfig<Scalar>& cfg) {
  std::vector<Distribution<Scalar>> out;
  out.reserve(checkpoints.size());
  transient_sweep(model, checkpoints, cfg,
                  [&](std::size_t, const Distribution<Scalar>& d, Scalar) { out.push_back(d); });
  return out;
}

/// Expected number of reward-labeled firings in [0, days].
template <class Scalar>
Scalar expected_reward(const BasicCtmc<Scalar>& model, Scalar days, const BasicSolverConfig<Scalar>& cfg) {
  const Uniformized<Scalar> chain(model, cfg);
  Distribution<Scalar> dist = point_mass(model);
  return advance(chain, dist, days, cfg);
}

}  // namespace keyflux
