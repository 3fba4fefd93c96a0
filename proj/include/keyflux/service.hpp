#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "keyflux/analysis.hpp"
#include "keyflux/models.hpp"

namespace keyflux {

struct ServiceOptions {
  std::string bind_address = "127.0.0.1";
  int port = 8080;
  unsigned max_concurrent_solves = 4;
  std::size_t cache_entries = 64;
  BuildOptions build;
};

/// Counting semaphore that admits waiters strictly in arrival order.
class FifoSemaphore {
 public:
  explicit FifoSemaphore(unsigned capacity) : capacity_(capacity) {}
  void acquire();
  void release();

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::uint64_t capacity_;
  std::uint64_t next_ticket_ = 0;
  std::uint64_t released_ = 0;
};

struct SolvedPoint {
  AnalysisRecord record;
  std::size_t states = 0;
  std::size_t merged_edges = 0;
  double solve_milliseconds = 0;
};

/// Least-recently-used map from a canonical request key to a solved point.
class SolveCache {
 public:
  explicit SolveCache(std::size_t capacity) : capacity_(capacity) {}
  std::optional<std::shared_ptr<const SolvedPoint>> find(const std::string& key);
  void insert(const std::string& key, std::shared_ptr<const SolvedPoint> value);
  std::size_t size() const;

 private:
  using Entry = std::pair<std::string, std::shared_ptr<const SolvedPoint>>;
  mutable std::mutex mutex_;
  std::size_t capacity_;
  std::list<Entry> order_;
  std::unordered_map<std::string, std::list<Entry>::iterator> index_;
};

struct HttpReply {
  int status = 200;
  std::string body;
};

/// JSON facade over the analysis pipeline. Handlers are plain functions of
/// the request body so they can run without a socket.
class Service {
 public:
  explicit Service(ServiceOptions opts = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  HttpReply strategies() const;
  HttpReply analyze(std::string_view body);
  /// `on_line` receives one JSON line per finished point when the request
  /// asks for streaming; the returned body is the full curves document.
  HttpReply curves(std::string_view body, const std::function<void(const std::string&)>& on_line = {});

  /// Binds the listening socket; returns the bound port or -1.
  int bind();
  /// Serves until stop(); call after bind().
  bool listen();
  void stop();
  const ServiceOptions& options() const { return opts_; }
  std::size_t cached_points() const { return cache_.size(); }

 private:
  std::shared_ptr<const SolvedPoint> solve(const StrategySpec& spec, const NetworkParams& params,
                                           const AnalysisConfig& cfg);

  ServiceOptions opts_;
  FifoSemaphore slots_;
  SolveCache cache_;
  struct Server;
  std::unique_ptr<Server> server_;
};

}  // namespace keyflux
