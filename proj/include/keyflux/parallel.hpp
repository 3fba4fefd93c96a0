#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <optional>
#include <thread>
#include <vector>

namespace keyflux {

/// Worker count to use when the caller asks for 0.
inline unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Evaluates fn(0..count-1) on up to `workers` threads. Results keep index
/// order; if any call throws, the exception of the lowest failing index is
/// rethrown after all workers finish.
template <class Fn>
auto parallel_map(std::size_t count, unsigned workers, Fn&& fn) {
  using Result = decltype(fn(std::size_t{}));
  std::vector<std::optional<Result>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};

  auto drain = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const unsigned n = std::max(1u, std::min<unsigned>(workers == 0 ? default_workers() : workers,
                                                     static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (n == 1) {
    drain();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(drain);
  }

  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<Result> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace keyflux
