#include "keyflux/service.hpp"

#include <chrono>

#include "httplib.h"
#include "keyflux/io.hpp"
#include "keyflux/parallel.hpp"

namespace keyflux {

using nlohmann::json;

void FifoSemaphore::acquire() {
  std::unique_lock lock(mutex_);
  const std::uint64_t ticket = next_ticket_++;
  cv_.wait(lock, [&] { return ticket < released_ + capacity_; });
}

void FifoSemaphore::release() {
  {
    std::lock_guard lock(mutex_);
    ++released_;
  }
  cv_.notify_all();
}

std::optional<std::shared_ptr<const SolvedPoint>> SolveCache::find(const std::string& key) {
  std::lock_guard lock(mutex_);
  const auto it = index_.find(key);
  if (it == index_.end()) return std::nullopt;
  order_.splice(order_.begin(), order_, it->second);
  return it->second->second;
}

void SolveCache::insert(const std::string& key, std::shared_ptr<const SolvedPoint> value) {
  std::lock_guard lock(mutex_);
  if (capacity_ == 0) return;
  if (const auto it = index_.find(key); it != index_.end()) {
    it->second->second = std::move(value);
    order_.splice(order_.begin(), order_, it->second);
    return;
  }
  order_.emplace_front(key, std::move(value));
  index_[key] = order_.begin();
  if (order_.size() > capacity_) {
    index_.erase(order_.back().first);
    order_.pop_back();
  }
}

std::size_t SolveCache::size() const {
  std::lock_guard lock(mutex_);
  return order_.size();
}

namespace {

/// Malformed body: 400.
struct BadRequest : Error {
  using Error::Error;
};

/// Well-formed but outside the accepted ranges: 422.
struct OutOfRange : Error {
  using Error::Error;
};

HttpReply error_reply(int status, std::string_view message) {
  return {status, json{{"error", message}}.dump()};
}

json parse_body(std::string_view body) {
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded()) throw BadRequest("request body is not valid JSON");
  if (!doc.is_object()) throw BadRequest("request body must be a JSON object");
  return doc;
}

StrategyKind kind_field(const json& value) {
  if (!value.is_string()) throw BadRequest("kind must be a string");
  const auto kind = parse_kind(value.get<std::string>());
  if (!kind) throw BadRequest("unknown strategy kind " + value.get<std::string>());
  return *kind;
}

struct Common {
  NetworkParams params;
  AnalysisConfig cfg;
  int erlang_k = 100;
  bool allow_nonstandard = false;
};

Common common_fields(const json& doc) {
  Common c;
  try {
    if (doc.contains("params")) apply_params(doc.at("params"), c.params, c.erlang_k);
    if (doc.contains("config")) apply_config(doc.at("config"), c.cfg);
  } catch (const InvalidArgument& e) {
    throw BadRequest(e.what());
  }
  if (doc.contains("allowNonstandard")) {
    if (!doc.at("allowNonstandard").is_boolean()) throw BadRequest("allowNonstandard must be a boolean");
    c.allow_nonstandard = doc.at("allowNonstandard").get<bool>();
  }
  try {
    c.params.validate();
    c.cfg.validate();
  } catch (const InvalidArgument& e) {
    throw OutOfRange(e.what());
  }
  return c;
}

StrategySpec checked_spec(StrategyKind kind, int threshold, const Common& c) {
  StrategySpec spec{kind, threshold, c.erlang_k};
  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw OutOfRange(e.what());
  }
  if (!c.allow_nonstandard && !is_standard_threshold(kind, threshold))
    throw OutOfRange(std::string(to_string(kind)) + " threshold " + std::to_string(threshold) +
                     " is not a supported value");
  return spec;
}

std::string cache_key(const StrategySpec& spec, const NetworkParams& p, const AnalysisConfig& cfg) {
  const json key{to_string(spec.kind),
                 spec.threshold,
                 spec.uses_timer() ? spec.erlang_k : 0,
                 to_json(p),
                 cfg.days_per_month,
                 cfg.horizon_months,
                 cfg.stabilisation_epsilon,
                 cfg.observation_months,
                 to_string(cfg.mode),
                 cfg.solver.truncation_tolerance,
                 cfg.solver.convergence_tolerance,
                 cfg.solver.max_iterations,
                 cfg.solver.uniformization_slack,
                 cfg.solver.steady_state_detection};
  return key.dump();
}

json analyze_json(StrategyKind kind, int threshold, const SolvedPoint& p) {
  json out = to_json(p.record);
  out["kind"] = to_string(kind);
  out["threshold"] = threshold;
  out["stateCount"] = p.states;
  out["mergedEdgeCount"] = p.merged_edges;
  out["solveMilliseconds"] = round_significant(p.solve_milliseconds);
  return out;
}

/// Maps the pipeline's exceptions onto status codes.
template <class Fn>
HttpReply guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const BadRequest& e) {
    return error_reply(400, e.what());
  } catch (const OutOfRange& e) {
    return error_reply(422, e.what());
  } catch (const StateCapExceeded& e) {
    return error_reply(507, e.what());
  } catch (const InvalidArgument& e) {
    return error_reply(422, e.what());
  } catch (const std::exception& e) {
    return error_reply(500, std::string("solver failure: ") + e.what());
  }
}

}  // namespace

struct Service::Server {
  httplib::Server http;
};

Service::Service(ServiceOptions opts)
    : opts_(std::move(opts)), slots_(std::max(1u, opts_.max_concurrent_solves)), cache_(opts_.cache_entries) {}

Service::~Service() { stop(); }

std::shared_ptr<const SolvedPoint> Service::solve(const StrategySpec& spec, const NetworkParams& params,
                                                  const AnalysisConfig& cfg) {
  const std::string key = cache_key(spec, params, cfg);
  if (auto hit = cache_.find(key)) return *hit;
  slots_.acquire();
  struct Release {
    FifoSemaphore& s;
    ~Release() { s.release(); }
  } release{slots_};
  if (auto hit = cache_.find(key)) return *hit;
  const auto t0 = std::chrono::steady_clock::now();
  const SparseCtmc model = build_model(spec, params, opts_.build);
  auto point = std::make_shared<SolvedPoint>();
  point->record = keyflux::analyze(model, cfg);
  point->states = static_cast<std::size_t>(model.num_states());
  point->merged_edges = merged_edges(model).size();
  point->solve_milliseconds = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  cache_.insert(key, point);
  return point;
}

HttpReply Service::strategies() const {
  json list = json::array();
  for (auto kind : kAllKinds)
    list.push_back({{"kind", to_string(kind)},
                    {"thresholdUnit", threshold_unit(kind)},
                    {"defaultThresholds", default_thresholds(kind)}});
  return {200, json{{"strategies", std::move(list)}}.dump()};
}

HttpReply Service::analyze(std::string_view body) {
  return guarded([&] {
    const json doc = parse_body(body);
    for (const auto& [key, value] : doc.items())
      if (key != "kind" && key != "threshold" && key != "params" && key != "config" && key != "allowNonstandard")
        throw BadRequest("unknown field " + key);
    if (!doc.contains("kind")) throw BadRequest("missing field kind");
    if (!doc.contains("threshold") || !doc.at("threshold").is_number_integer())
      throw BadRequest("threshold must be an integer");
    const StrategyKind kind = kind_field(doc.at("kind"));
    const Common c = common_fields(doc);
    const StrategySpec spec = checked_spec(kind, doc.at("threshold").get<int>(), c);
    const auto point = solve(spec, c.params, c.cfg);
    return HttpReply{200, analyze_json(kind, spec.threshold, *point).dump()};
  });
}

HttpReply Service::curves(std::string_view body, const std::function<void(const std::string&)>& on_line) {
  return guarded([&] {
    const json doc = parse_body(body);
    for (const auto& [key, value] : doc.items())
      if (key != "kinds" && key != "thresholds" && key != "params" && key != "config" && key != "phases" &&
          key != "allowNonstandard" && key != "stream")
        throw BadRequest("unknown field " + key);
    if (!doc.contains("kinds") || !doc.at("kinds").is_array() || doc.at("kinds").empty())
      throw BadRequest("kinds must be a non-empty array");
    const Common c = common_fields(doc);

    std::vector<CurvePhase> phases{CurvePhase::before, CurvePhase::after};
    if (doc.contains("phases")) {
      const json& ph = doc.at("phases");
      if (!ph.is_array() || ph.empty()) throw BadRequest("phases must be a non-empty array");
      phases.clear();
      for (const auto& p : ph) {
        const std::string name = p.is_string() ? p.get<std::string>() : "";
        if (name == "before")
          phases.push_back(CurvePhase::before);
        else if (name == "after")
          phases.push_back(CurvePhase::after);
        else
          throw BadRequest("phases entries must be \"before\" or \"after\"");
      }
    }

    std::vector<CurveRequest> requests;
    for (const auto& k : doc.at("kinds")) {
      const StrategyKind kind = kind_field(k);
      std::vector<int> thresholds = default_thresholds(kind);
      if (doc.contains("thresholds")) {
        const json& t = doc.at("thresholds");
        const json* list = nullptr;
        if (t.is_array())
          list = &t;
        else if (t.is_object() && t.contains(std::string(to_string(kind))))
          list = &t.at(std::string(to_string(kind)));
        else if (!t.is_object())
          throw BadRequest("thresholds must be an array or an object keyed by kind");
        if (list) {
          if (!list->is_array() || list->empty()) throw BadRequest("threshold lists must be non-empty arrays");
          thresholds.clear();
          for (const auto& v : *list) {
            if (!v.is_number_integer()) throw BadRequest("thresholds must be integers");
            thresholds.push_back(v.get<int>());
          }
        }
      }
      for (int t : thresholds) checked_spec(kind, t, c);
      requests.push_back({kind, std::move(thresholds)});
    }

    struct Job {
      std::size_t request;
      std::size_t index;
    };
    std::vector<Job> jobs;
    for (std::size_t r = 0; r < requests.size(); ++r)
      for (std::size_t i = 0; i < requests[r].thresholds.size(); ++i) jobs.push_back({r, i});

    const bool stream = doc.value("stream", false) && on_line;
    std::mutex line_mutex;
    std::size_t done = 0;
    const auto points = parallel_map(jobs.size(), std::max(1u, opts_.max_concurrent_solves), [&](std::size_t j) {
      const auto& req = requests[jobs[j].request];
      const int t = req.thresholds[jobs[j].index];
      auto point = solve({req.kind, t, c.erlang_k}, c.params, c.cfg);
      if (stream) {
        StrategyResults one{req.kind, {t}, {point->record}};
        json line{{"kind", to_string(req.kind)}, {"threshold", t}};
        for (const auto& curve : assemble_curves({one}, phases))
          line[std::string(to_string(curve.phase))] = to_json(curve.points.front());
        std::lock_guard lock(line_mutex);
        line["done"] = ++done;
        line["total"] = jobs.size();
        on_line(line.dump());
      }
      return point;
    });

    std::vector<StrategyResults> results;
    for (const auto& req : requests) results.push_back({req.kind, req.thresholds, {}});
    for (std::size_t j = 0; j < jobs.size(); ++j) results[jobs[j].request].records.push_back(points[j]->record);
    return HttpReply{200, to_json(assemble_curves(results, phases)).dump()};
  });
}

int Service::bind() {
  server_ = std::make_unique<Server>();
  auto& http = server_->http;
  constexpr const char* kJson = "application/json";
  http.Get("/api/strategies", [this](const httplib::Request&, httplib::Response& res) {
    const HttpReply r = strategies();
    res.status = r.status;
    res.set_content(r.body, kJson);
  });
  http.Post("/api/analyze", [this](const httplib::Request& req, httplib::Response& res) {
    const HttpReply r = analyze(req.body);
    res.status = r.status;
    res.set_content(r.body, kJson);
  });
  http.Post("/api/curves", [this](const httplib::Request& req, httplib::Response& res) {
    const json doc = json::parse(req.body, nullptr, false);
    const bool stream = doc.is_object() && doc.contains("stream") && doc.at("stream") == true;
    if (!stream) {
      const HttpReply r = curves(req.body);
      res.status = r.status;
      res.set_content(r.body, kJson);
      return;
    }
    // Streaming: JSON lines per point, then the final document (or error) as the last line.
    res.set_chunked_content_provider(kJson, [this, body = req.body](std::size_t, httplib::DataSink& sink) {
      const HttpReply r = curves(body, [&](const std::string& line) {
        const std::string chunk = line + "\n";
        sink.write(chunk.data(), chunk.size());
      });
      const std::string last = r.body + "\n";
      sink.write(last.data(), last.size());
      sink.done();
      return true;
    });
  });
  return opts_.port == 0 ? http.bind_to_any_port(opts_.bind_address)
                         : (http.bind_to_port(opts_.bind_address, opts_.port) ? opts_.port : -1);
}

bool Service::listen() { return server_ && server_->http.listen_after_bind(); }

void Service::stop() {
  if (server_) server_->http.stop();
}

}  // namespace keyflux
