#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>

#include "keyflux/ctmc/ctmc.hpp"

namespace keyflux {

/// Poisson(qt) probabilities on the index window [left, right]; mass outside
/// the window is at most the requested tolerance.
template <class Scalar>
struct PoissonWeights {
  std::size_t left = 0;
  std::size_t right = 0;
  Vector<Scalar> weights;

  Scalar operator[](std::size_t i) const { return weights[static_cast<Eigen::Index>(i - left)]; }
  Scalar total() const { return weights.sum(); }
};

/// Weights are built outward from the mode with ratio recurrences, so no
/// factorial or exponential of qt is ever formed. Exploration continues until
/// the geometric bound on each remaining tail is negligible against the mass
/// seen so far; the normalized weights are then trimmed to `tol`.
template <class Scalar>
PoissonWeights<Scalar> poisson_weights(Scalar qt, Scalar tol) {
  if (!(qt >= 0) || !std::isfinite(static_cast<double>(qt)))
    throw InvalidArgument("Poisson parameter must be finite and non-negative");
  if (!(tol > 0 && tol < 1)) throw InvalidArgument("Poisson truncation tolerance must lie in (0, 1)");

  PoissonWeights<Scalar> out;
  if (qt == 0) {
    out.weights = Vector<Scalar>::Ones(1);
    return out;
  }

  const Scalar negligible = std::min(tol * Scalar(1e-6), Scalar(1e-20));
  const auto mode = static_cast<std::size_t>(std::floor(qt));

  std::deque<Scalar> w{Scalar(1)};
  Scalar sum = 1;
  std::size_t lo = mode;
  std::size_t hi = mode;

  for (;;) {
    const Scalar ratio = qt / static_cast<Scalar>(hi + 1);
    const Scalar next = w.back() * ratio;
    w.push_back(next);
    sum += next;
    ++hi;
    const Scalar r = qt / static_cast<Scalar>(hi + 1);
    if (r < 1 && next * r / (1 - r) < negligible * sum) break;
    if (next == 0) break;
  }
  while (lo > 0) {
    const Scalar next = w.front() * static_cast<Scalar>(lo) / qt;
    w.push_front(next);
    sum += next;
    --lo;
    const Scalar r = static_cast<Scalar>(lo) / qt;
    if (r < 1 && next * r / (1 - r) < negligible * sum) break;
    if (next == 0) break;
  }

  for (auto& v : w) v /= sum;

  std::size_t first = 0;
  std::size_t last = w.size() - 1;
  const Scalar half = tol / 2;
  Scalar dropped = 0;
  while (lo + first < mode && dropped + w[first] <= half) dropped += w[first++];
  dropped = 0;
  while (lo + last > mode && dropped + w[last] <= half) dropped += w[last--];

  out.left = lo + first;
  out.right = lo + last;
  out.weights.resize(static_cast<Eigen::Index>(last - first + 1));
  for (std::size_t i = first; i <= last; ++i) out.weights[static_cast<Eigen::Index>(i - first)] = w[i];
  return out;
}

}  // namespace keyflux
