#include <pthread.h>
#include <signal.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "keyflux/analysis.hpp"
#include "keyflux/io.hpp"
#include "keyflux/models.hpp"
#include "keyflux/reference.hpp"
#include "keyflux/service.hpp"
#include "keyflux/verification.hpp"

namespace fs = std::filesystem;
using namespace keyflux;

namespace {

enum Exit { kOk = 0, kUsage = 1, kVerifyFailed = 2, kSolverFailed = 3 };

struct Usage : Error {
  using Error::Error;
};

struct Globals {
  std::vector<std::string> settings;
  std::string config_file;
  unsigned workers = 0;
  int horizon = 0;
  std::string mode;
  double epsilon = 0;
  std::size_t state_cap = BuildOptions{}.state_cap;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("keyflux");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("KEYFLUX_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string_view(env) != "off")
      spdlog::warn("ignoring unknown KEYFLUX_LOG level '{}'", env);
    else
      spdlog::set_level(level);
  }
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

/// Resolves the config file, then --set flags, then the dedicated flags.
struct Resolved {
  NetworkParams params;
  AnalysisConfig cfg;
  int erlang_k = 100;
};

Resolved resolve(const Globals& g) {
  Resolved r;
  std::vector<std::string> assignments;
  if (!g.config_file.empty()) {
    std::ifstream in(g.config_file);
    if (!in) throw Usage("cannot read config file " + g.config_file);
    for (std::string line; std::getline(in, line);) {
      line = trim(line.substr(0, line.find('#')));
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw Usage("config line without '=': " + line);
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      char* end = nullptr;
      if (key == "horizon_months")
        r.cfg.horizon_months = std::stoi(value);
      else if (key == "observation_months")
        r.cfg.observation_months = std::stoi(value);
      else if (key == "stabilisation_epsilon")
        r.cfg.stabilisation_epsilon = std::strtod(value.c_str(), &end);
      else if (key == "stabilisation_mode")
        r.cfg.mode = value == "successive-difference" ? StabilisationMode::successive_difference
                                                      : StabilisationMode::persistent_band;
      else
        assignments.push_back(key + "=" + value);
    }
  }
  assignments.insert(assignments.end(), g.settings.begin(), g.settings.end());
  for (const auto& a : assignments) apply_setting(a, r.params, r.erlang_k);
  if (g.horizon > 0) r.cfg.horizon_months = g.horizon;
  if (g.epsilon > 0) r.cfg.stabilisation_epsilon = g.epsilon;
  if (g.mode == "successive-difference") r.cfg.mode = StabilisationMode::successive_difference;
  else if (g.mode == "persistent-band") r.cfg.mode = StabilisationMode::persistent_band;
  else if (!g.mode.empty()) throw Usage("unknown stabilisation mode " + g.mode);
  r.params.validate();
  r.cfg.validate();
  return r;
}

std::vector<StrategyKind> kinds_from(const std::vector<std::string>& names) {
  std::vector<StrategyKind> out;
  for (const auto& n : names) {
    const auto k = parse_kind(n);
    if (!k) throw Usage("unknown strategy kind " + n);
    out.push_back(*k);
  }
  return out;
}

std::vector<CurveRequest> requests_from(const std::vector<std::string>& kind_names, const std::vector<int>& thresholds,
                                        bool allow_nonstandard) {
  if (kind_names.empty()) throw Usage("at least one strategy kind is required");
  std::vector<CurveRequest> out;
  for (auto kind : kinds_from(kind_names)) {
    CurveRequest req{kind, thresholds.empty() ? default_thresholds(kind) : thresholds};
    for (int t : req.thresholds)
      if (t < 1 || (!allow_nonstandard && !is_standard_threshold(kind, t)))
        throw Usage(std::string(to_string(kind)) + " threshold " + std::to_string(t) + " is not supported");
    out.push_back(std::move(req));
  }
  return out;
}

std::vector<std::string> all_kind_names() {
  std::vector<std::string> out;
  for (auto k : kAllKinds) out.emplace_back(to_string(k));
  return out;
}

/// Writes to `path`, or stdout when the path is empty or "-".
template <class Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw Usage("cannot write " + path);
  write(out);
  spdlog::info("wrote {}", path);
}

SweepOptions sweep_options(const Globals& g, const Resolved& r) {
  SweepOptions opts;
  opts.workers = g.workers;
  opts.erlang_k = r.erlang_k;
  opts.build.state_cap = g.state_cap;
  opts.on_point = [](StrategyKind kind, int t, const AnalysisRecord& rec) {
    spdlog::info("{} {}: steady risk {:.6f}, stabilisation month {}", to_string(kind), t, rec.risk.steady_risk,
                 rec.risk.stabilisation_month);
  };
  return opts;
}

void print_record(std::ostream& out, StrategyKind kind, int threshold, const AnalysisRecord& rec) {
  out << to_string(kind) << ' ' << threshold << '\n'
      << "  steady risk          " << format_number(rec.risk.steady_risk) << '\n'
      << "  max risk             " << format_number(rec.risk.max_risk) << '\n'
      << "  stabilisation month  " << rec.risk.stabilisation_month << '\n'
      << "  cost before / month  " << format_number(rec.cost.cost_pre_monthly) << '\n'
      << "  cost after / month   " << format_number(rec.cost.cost_post_monthly) << '\n'
      << "  long-run cost rate   " << format_number(rec.steady_cost_rate) << '\n';
}

void print_report(const VerificationReport& report, bool verbose) {
  for (const auto& e : report.entries) {
    if (!verbose && e.status == EntryStatus::pass) continue;
    std::printf("%-9s %-13s %-3s %5d max=%-3d %-28s expected %-12s computed %-12s tol %s%s%s%s\n",
                std::string(to_string(e.status)).c_str(), std::string(to_string(e.scope)).c_str(),
                std::string(to_string(e.kind)).c_str(), e.threshold, e.max, e.metric.c_str(),
                format_number(e.expected).c_str(), format_number(e.computed).c_str(),
                format_number(e.tolerance).c_str(), e.relative ? " (rel)" : "", e.note.empty() ? "" : "  ",
                e.note.c_str());
  }
  std::printf("%zu entries: %zu pass, %zu fail, %zu divergent\n", report.entries.size(),
              report.count(EntryStatus::pass), report.count(EntryStatus::fail), report.count(EntryStatus::divergent));
}

int serve(Service& service) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  const int port = service.bind();
  if (port < 0) {
    spdlog::error("cannot bind {}:{}", service.options().bind_address, service.options().port);
    return kUsage;
  }
  std::jthread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("signal {} received, shutting down", sig);
    service.stop();
  });
  std::printf("listening on http://%s:%d\n", service.options().bind_address.c_str(), port);
  std::fflush(stdout);
  service.listen();
  // Wake the waiter if listen() ended for another reason.
  pthread_kill(waiter.native_handle(), SIGTERM);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Key update strategy analysis for dynamic device networks"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--set", g.settings, "Parameter override key=value (max, r_join, r_leave, r_message, p_comp, k)");
  app.add_option("--config", g.config_file, "key=value file with defaults for --set and the analysis settings")
      ->check(CLI::ExistingFile);
  app.add_option("--workers", g.workers, "Worker threads (0 = available parallelism)");
  app.add_option("--horizon", g.horizon, "Horizon in months for stabilisation detection");
  app.add_option("--epsilon", g.epsilon, "Stabilisation band");
  app.add_option("--mode", g.mode, "Stabilisation mode")
      ->check(CLI::IsMember({"persistent-band", "successive-difference"}));
  app.add_option("--state-cap", g.state_cap, "Maximum number of states per model");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Risk and cost profile of one strategy");
  std::string a_kind, a_json;
  int a_threshold = 0;
  bool a_nonstandard = false;
  analyze->add_option("kind", a_kind)->required();
  analyze->add_option("threshold", a_threshold)->required();
  analyze->add_option("--json", a_json, "Write the full record as JSON");
  analyze->add_flag("--allow-nonstandard", a_nonstandard, "Accept thresholds outside the studied grid");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Risk, cost and stabilisation tables");
  std::vector<std::string> s_kinds = all_kind_names();
  std::vector<int> s_thresholds;
  std::string s_dir = ".";
  bool s_nonstandard = false;
  sweep->add_option("--kinds", s_kinds)->delimiter(',');
  sweep->add_option("--thresholds", s_thresholds)->delimiter(',');
  sweep->add_option("--out-dir", s_dir);
  sweep->add_flag("--allow-nonstandard", s_nonstandard);

  // curves
  auto* curves = app.add_subcommand("curves", "Design-efficiency curve data");
  std::vector<std::string> c_kinds = all_kind_names();
  std::vector<int> c_thresholds;
  std::string c_phase = "both", c_format = "json", c_out;
  bool c_nonstandard = false;
  curves->add_option("--kinds", c_kinds)->delimiter(',');
  curves->add_option("--thresholds", c_thresholds)->delimiter(',');
  curves->add_option("--phase", c_phase)->check(CLI::IsMember({"before", "after", "both"}));
  curves->add_option("--format", c_format);
  curves->add_option("--out", c_out);
  curves->add_flag("--allow-nonstandard", c_nonstandard);

  // statespace
  auto* statespace = app.add_subcommand("statespace", "Reachable states and transitions");
  std::vector<std::string> st_kinds = all_kind_names();
  std::vector<int> st_thresholds, st_maxes = reference::table_max_values();
  std::string st_out;
  statespace->add_option("--kinds", st_kinds)->delimiter(',');
  statespace->add_option("--thresholds", st_thresholds)->delimiter(',');
  statespace->add_option("--max", st_maxes)->delimiter(',');
  statespace->add_option("--out", st_out);

  // verify
  auto* verify = app.add_subcommand("verify", "Compare against the published tables");
  std::vector<std::string> v_scopes;
  std::vector<std::string> v_kinds = all_kind_names();
  std::vector<int> v_maxes{50};
  std::string v_profile = "acceptance";
  bool v_verbose = false;
  auto* scope_opt = verify->add_option("--scope", v_scopes, "Comma-separated scopes; \"none\" for an empty scope")
                        ->delimiter(',');
  verify->add_option("--kinds", v_kinds)->delimiter(',');
  verify->add_option("--max", v_maxes, "Network sizes for the statespace scope")->delimiter(',');
  verify->add_option("--tolerance", v_profile)->check(CLI::IsMember({"acceptance", "strict"}));
  verify->add_flag("--verbose", v_verbose, "Also list passing entries");

  // inspect
  auto* inspect = app.add_subcommand("inspect", "Re-read a curves JSON or table CSV file and print it");
  std::string i_file;
  inspect->add_option("file", i_file)->required()->check(CLI::ExistingFile);

  // montecarlo
  auto* mc = app.add_subcommand("montecarlo", "Simulation estimate of risk and cumulative updates");
  std::string m_kind;
  int m_threshold = 0;
  std::uint64_t m_seed = 0;
  std::size_t m_trials = 10000;
  std::vector<double> m_days{360};
  mc->add_option("kind", m_kind)->required();
  mc->add_option("threshold", m_threshold)->required();
  mc->add_option("--seed", m_seed)->required();
  mc->add_option("--trials", m_trials);
  mc->add_option("--days", m_days, "Ascending checkpoints in days")->delimiter(',');

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  ServiceOptions so;
  serve_cmd->add_option("--port", so.port)->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--bind", so.bind_address);
  serve_cmd->add_option("--max-solves", so.max_concurrent_solves)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    const Resolved r = resolve(g);
    BuildOptions build;
    build.state_cap = g.state_cap;

    if (*analyze) {
      const auto kind = parse_kind(a_kind);
      if (!kind) throw Usage("unknown strategy kind " + a_kind);
      const StrategySpec spec{*kind, a_threshold, r.erlang_k};
      spec.validate();
      if (!a_nonstandard && !is_standard_threshold(*kind, a_threshold))
        throw Usage(a_kind + " threshold " + std::to_string(a_threshold) + " is not supported");
      const SparseCtmc model = build_model(spec, r.params, build);
      spdlog::info("{} {}: {} states", to_string(*kind), a_threshold, model.num_states());
      const AnalysisRecord rec = keyflux::analyze(model, r.cfg);
      print_record(std::cout, *kind, a_threshold, rec);
      if (!a_json.empty())
        emit(a_json, [&](std::ostream& out) {
          nlohmann::json doc = to_json(rec);
          doc["kind"] = to_string(*kind);
          doc["threshold"] = a_threshold;
          doc["params"] = to_json(r.params);
          doc["stateCount"] = model.num_states();
          out << doc.dump(2) << '\n';
        });
      return kOk;
    }

    if (*sweep) {
      const auto results =
          run_sweep(requests_from(s_kinds, s_thresholds, s_nonstandard), r.params, r.cfg, sweep_options(g, r));
      fs::create_directories(s_dir);
      const auto write = [&](const char* name, const std::vector<CsvRow>& rows) {
        emit((fs::path(s_dir) / name).string(), [&](std::ostream& out) { write_csv(out, rows); });
      };
      write("risk.csv", risk_table(results));
      write("cost.csv", cost_table(results));
      write("stabilisation.csv", stabilisation_table(results));
      return kOk;
    }

    if (*curves) {
      if (c_format != "json" && c_format != "csv") throw Usage("unknown format " + c_format);
      std::vector<CurvePhase> phases;
      if (c_phase != "after") phases.push_back(CurvePhase::before);
      if (c_phase != "before") phases.push_back(CurvePhase::after);
      const auto data = build_curves(requests_from(c_kinds, c_thresholds, c_nonstandard), r.params, r.cfg,
                                     sweep_options(g, r), phases);
      emit(c_out, [&](std::ostream& out) {
        if (c_format == "json")
          out << to_json(data).dump(2) << '\n';
        else
          write_csv(out, curve_rows(data));
      });
      return kOk;
    }

    if (*statespace) {
      std::vector<CsvRow> rows;
      for (const auto& req : requests_from(st_kinds, st_thresholds, true))
        for (int t : req.thresholds)
          for (int m : st_maxes) {
            NetworkParams p = r.params;
            p.max = m;
            const std::string suffix = "_max" + std::to_string(m);
            try {
              const auto s = state_space_summary({req.kind, t, r.erlang_k}, p, build);
              rows.push_back({std::string(to_string(req.kind)), t, "states" + suffix, double(s.states)});
              rows.push_back({std::string(to_string(req.kind)), t, "transitions" + suffix, double(s.merged_edges)});
            } catch (const StateCapExceeded&) {
              spdlog::warn("{} {} max {}: state cap {} exceeded", to_string(req.kind), t, m, build.state_cap);
              rows.push_back({std::string(to_string(req.kind)), t, "cap_exceeded" + suffix, double(build.state_cap)});
            }
          }
      emit(st_out, [&](std::ostream& out) { write_csv(out, rows); });
      return kOk;
    }

    if (*verify) {
      std::vector<VerifyScope> scopes;
      if (scope_opt->count() == 0) scopes = all_scopes();
      for (const auto& s : v_scopes) {
        if (s.empty() || s == "none") continue;
        const auto scope = parse_scope(s);
        if (!scope) throw Usage("unknown scope " + s);
        scopes.push_back(*scope);
      }
      const Tolerances tol = *parse_tolerance_profile(v_profile);
      const auto requests = requests_from(v_kinds, {}, false);
      VerificationReport report;
      if (std::find(scopes.begin(), scopes.end(), VerifyScope::statespace) != scopes.end())
        report.append(verify_state_space(requests, v_maxes, build, g.workers));
      const bool needs_analysis = std::any_of(scopes.begin(), scopes.end(),
                                              [](VerifyScope s) { return s != VerifyScope::statespace; });
      if (needs_analysis) {
        if (!(r.params == NetworkParams{}) || r.erlang_k != 100)
          spdlog::warn("published values assume the default scenario; overrides are in effect");
        report.append(verify_results(run_sweep(requests, r.params, r.cfg, sweep_options(g, r)), scopes, tol));
      }
      print_report(report, v_verbose);
      return report.passed() ? kOk : kVerifyFailed;
    }

    if (*inspect) {
      std::ifstream in(i_file);
      std::stringstream buffer;
      buffer << in.rdbuf();
      const std::string text = buffer.str();
      if (text.starts_with(kCsvHeader)) {
        std::istringstream csv(text);
        write_csv(std::cout, read_csv(csv));
      } else {
        const auto doc = nlohmann::json::parse(text, nullptr, false);
        if (doc.is_discarded()) throw Usage(i_file + " is neither a table CSV nor JSON");
        std::cout << to_json(curves_from_json(doc)).dump(2) << '\n';
      }
      return kOk;
    }

    if (*mc) {
      const auto kind = parse_kind(m_kind);
      if (!kind) throw Usage("unknown strategy kind " + m_kind);
      const auto res = monte_carlo_estimate({*kind, m_threshold, r.erlang_k}, r.params, m_days, m_trials, m_seed,
                                            g.workers);
      for (std::size_t k = 0; k < res.checkpoints.size(); ++k)
        std::printf("day %-8s risk %-10s +- %s\n", format_number(res.checkpoints[k]).c_str(),
                    format_number(res.risk[k]).c_str(), format_number(res.risk_half_width[k]).c_str());
      std::printf("updates %s +- %s over %zu trials\n", format_number(res.mean_updates).c_str(),
                  format_number(res.updates_half_width).c_str(), res.trials);
      return kOk;
    }

    if (*serve_cmd) {
      so.build = build;
      Service service(so);
      return serve(service);
    }
  } catch (const Usage& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const InvalidArgument& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kSolverFailed;
  }
  return kUsage;
}
