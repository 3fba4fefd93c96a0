#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace keyflux {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller-supplied value is outside its documented range.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The model violates a structural precondition of a solver.
class NotErgodic : public Error {
 public:
  NotErgodic(std::size_t components)
      : Error("model is not strongly connected (" + std::to_string(components) +
              " components); steady-state analysis requires a single component"),
        components_(components) {}

  std::size_t components() const { return components_; }

 private:
  std::size_t components_;
};

/// An iterative solver stopped at its iteration limit.
class NonConvergence : public Error {
 public:
  NonConvergence(std::size_t iterations, double residual)
      : Error("no convergence after " + std::to_string(iterations) +
              " iterations (last residual " + std::to_string(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}

  std::size_t iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  std::size_t iterations_;
  double residual_;
};

/// State-space exploration hit the configured state cap.
class StateCapExceeded : public Error {
 public:
  explicit StateCapExceeded(std::size_t cap)
      : Error("state space exceeds the cap of " + std::to_string(cap) + " states"),
        cap_(cap) {}

  std::size_t cap() const { return cap_; }

 private:
  std::size_t cap_;
};

}  // namespace keyflux
