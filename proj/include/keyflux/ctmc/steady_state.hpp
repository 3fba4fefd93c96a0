#pragma once

#include <cmath>
#include <vector>

#include "keyflux/ctmc/ctmc.hpp"
#include "keyflux/ctmc/fp_env.hpp"

namespace keyflux {

struct SteadyStateInfo {
  std::size_t iterations = 0;
  double residual = 0;
};

/// ||pi Q||_inf: the largest imbalance between inflow and outflow of a state.
template <class Scalar>
Scalar balance_residual(const BasicCtmc<Scalar>& model, const Distribution<Scalar>& pi) {
  Vector<Scalar> flux = Vector<Scalar>::Zero(model.num_states());
  for (const auto& a : model.actions()) {
    if (a.source == a.target) continue;
    flux[a.target] += pi[a.source] * a.rate;
    flux[a.source] -= pi[a.source] * a.rate;
  }
  return flux.cwiseAbs().maxCoeff();
}

/// Stationary distribution by Gauss-Seidel sweeps over the balance equations
///   pi(s) exit(s) = sum over incoming edges of pi(s') rate(s', s),
/// in state-index order with in-place updates and renormalization after every
/// sweep. Only single-component (ergodic) chains are accepted.
template <class Scalar>
Distribution<Scalar> steady_state(const BasicCtmc<Scalar>& model, const BasicSolverConfig<Scalar>& cfg,
                                  SteadyStateInfo* info = nullptr) {
  cfg.validate();
  if (const std::size_t parts = scc_count(model); parts != 1) throw NotErgodic(parts);
  const StateIndex n = model.num_states();
  if (n == 1) {
    if (info) *info = {};
    return Distribution<Scalar>::Ones(1);
  }

  std::vector<Eigen::Triplet<Scalar, StateIndex>> triplets;
  triplets.reserve(model.actions().size());
  for (const auto& a : model.actions())
    if (a.source != a.target) triplets.emplace_back(a.target, a.source, a.rate);
  RowSparse<Scalar> incoming(n, n);
  incoming.setFromTriplets(triplets.begin(), triplets.end());
  incoming.makeCompressed();
  const Vector<Scalar> exits = exit_rates(model);

  const FlushSubnormals flush;
  Distribution<Scalar> pi = Distribution<Scalar>::Constant(n, Scalar(1) / static_cast<Scalar>(n));
  Distribution<Scalar> previous(n);
  Scalar residual = 0;
  const Scalar tol = cfg.convergence_tolerance;

  for (std::size_t iter = 1; iter <= cfg.max_iterations; ++iter) {
    previous = pi;
    for (StateIndex s = 0; s < n; ++s) {
      Scalar inflow = 0;
      for (typename RowSparse<Scalar>::InnerIterator it(incoming, s); it; ++it) inflow += pi[it.col()] * it.value();
      pi[s] = inflow / exits[s];
    }
    pi /= pi.sum();
    const Scalar change = (pi - previous).cwiseAbs().maxCoeff();
    if (change < tol) {
      residual = balance_residual(model, pi);
      if (residual < 10 * tol) {
        if (info) *info = {iter, static_cast<double>(residual)};
        return pi;
      }
    } else if (iter == cfg.max_iterations) {
      residual = balance_residual(model, pi);
    }
  }
  throw NonConvergence(cfg.max_iterations, static_cast<double>(residual));
}

}  // namespace keyflux
