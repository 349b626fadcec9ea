// Copyright 2026 The ExaC Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <signal.h>
#include <unistd.h>

#include <ctime>
#include <iostream>

#include <nlohmann/json.hpp>

#include "exac/analysis/report.hpp"
#include "exac/cli/cli.hpp"
#include "exac/cli/local_executor.hpp"
#include "exac/clientsim/session.hpp"
#include "exac/http/client.hpp"
#include "exac/management/health.hpp"
#include "exac/manifest/lifecycle.hpp"
#include "exac/server/host.hpp"
#include "exac/util/clock.hpp"
#include "exac/util/fs.hpp"

namespace exac::cli {

namespace {

using nlohmann::json;

// SIGINT/SIGTERM blocked for the lifetime of the guard so they can be
// collected synchronously. Threads started meanwhile inherit the mask.
class SignalGuard {
 public:
  SignalGuard() {
    sigemptyset(&set_);
    sigaddset(&set_, SIGINT);
    sigaddset(&set_, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set_, &previous_);
  }
  ~SignalGuard() { pthread_sigmask(SIG_SETMASK, &previous_, nullptr); }

  void wait() const {
    int sig = 0;
    sigwait(&set_, &sig);
  }
  // True when a signal arrived within `ms`.
  bool wait_for(std::int64_t ms) const {
    timespec ts{static_cast<time_t>(ms / 1000), static_cast<long>(ms % 1000) * 1'000'000};
    return sigtimedwait(&set_, nullptr, &ts) > 0;
  }

 private:
  sigset_t set_;
  sigset_t previous_;
};

manifest::ExperimentManifest load_manifest(const CliConfig& c) {
  return manifest::parse_manifest(util::read_file(c.manifest));
}

LocalExecutor make_executor(const CliConfig& c, const Context& ctx) {
  LocalExecutorConfig cfg;
  cfg.root = c.out;
  cfg.manifest_path = c.manifest;
  cfg.serve_exe = std::filesystem::canonical(ctx.self_exe);
  return LocalExecutor(cfg);
}

int deploy(const CliConfig& c, const Context& ctx) {
  const auto m = load_manifest(c);
  const auto report = manifest::validate_manifest(m, {{"bucket", manifest::ServiceKind::storage, {}},
                                                      {"service", manifest::ServiceKind::compute, {}},
                                                      {"hits", manifest::ServiceKind::recruitment, {}}});
  for (const auto& w : report.warnings) *ctx.err << "warning: " << w << "\n";

  manifest::StateStore store(c.state);
  auto state = store.load();
  manifest::check_order(state);
  const auto actions = manifest::plan(m, state);
  if (actions.empty()) {
    *ctx.out << "no changes\n";
    return kExitOk;
  }
  auto executor = make_executor(c, ctx);
  state = manifest::apply(actions, state, executor, m, store.persister());
  json created = json::array();
  for (const auto& a : actions) created.push_back(a.resource_id);
  const auto* service = state.find(manifest::ResourceKind::assembly_service);
  *ctx.out << json{{"created", created},
                   {"endpoint", service ? service->attrs.at("endpoint") : ""},
                   {"revision", state.revision}}
                  .dump()
           << "\n";
  return kExitOk;
}

int teardown(const CliConfig& c, const Context& ctx) {
  manifest::StateStore store(c.state);
  auto state = store.load();
  json destroyed = json::array();
  for (const auto& r : state.resources) {
    if (r.status == manifest::ResourceStatus::created) destroyed.push_back(r.id);
  }
  if (destroyed.empty()) {
    *ctx.out << "no changes\n";
    return kExitOk;
  }
  auto executor = make_executor(c, ctx);
  state = manifest::teardown(state, executor, store.persister());
  *ctx.out << json{{"destroyed", destroyed}, {"revision", state.revision}}.dump() << "\n";
  return kExitOk;
}

int serve(const CliConfig& c, const Context& ctx) {
  const auto endpoint = http::parse_endpoint(c.endpoint.empty() ? kDefaultEndpoint : c.endpoint, true);
  server::HostConfig cfg;
  cfg.bind_host = endpoint.host;
  cfg.port = endpoint.port;
  cfg.manifest = load_manifest(c);
  cfg.data_dir = c.out;
  cfg.registry_path = c.registry.value_or(c.out / "registry.jsonl");
  cfg.recruitment_log = c.out / "recruitment.jsonl";
  cfg.management.seed = c.seed;
  cfg.challenge_seed = c.seed;
  cfg.monitor_interval_ms = c.interval_ms;

  SignalGuard signals;
  server::ServiceHost host(cfg);
  host.start();
  if (c.ready_file) {
    util::write_file_atomic(*c.ready_file,
                            json{{"endpoint", host.endpoint()}, {"pid", static_cast<long>(::getpid())}}.dump() + "\n");
  }
  *ctx.out << json{{"endpoint", host.endpoint()}}.dump() << std::endl;
  signals.wait();
  host.stop();
  *ctx.err << "stopped\n";
  return kExitOk;
}

int simulate(const CliConfig& c, const Context& ctx) {
  const auto m = load_manifest(c);
  const auto endpoint = http::parse_endpoint(resolve_endpoint(c));
  clientsim::SimAgentConfig sim;
  sim.seed = c.seed;
  sim.sample_period_ms = m.sample_period_ms;
  std::atomic<std::uint64_t> stream{0};
  const clientsim::ApiFactory factory = [&]() -> std::unique_ptr<clientsim::ServiceApi> {
    auto api = std::make_unique<clientsim::HttpServiceApi>(endpoint);
    if (c.fault_rate <= 0) return api;
    return std::make_unique<clientsim::FaultInjectingApi>(std::move(api), c.fault_rate,
                                                          util::mix_seed(c.seed, ++stream));
  };
  clientsim::RunOptions options;
  options.record_payloads = c.record;
  const auto result =
      clientsim::run_cohort(c.participants, sim, m, factory, c.parallelism, c.seed, options, c.cohort);

  json sessions = json::array();
  for (const auto& o : result.outcomes) {
    json s{{"session_id", o.session_id},
           {"participant_id", o.participant_id},
           {"treatment", o.treatment},
           {"passed_onboarding", o.passed_onboarding},
           {"completed", o.completed},
           {"code_verified", o.code_verified},
           {"samples_per_trial", o.samples_per_trial}};
    if (o.error) {
      s["error"] = *o.error;
      *ctx.err << o.session_id << ": " << *o.error << "\n";
    }
    sessions.push_back(s);
    for (std::size_t k = 0; k < o.payloads.size(); ++k) {
      util::write_file_atomic(c.out / "client" / o.session_id / ("trial_" + std::to_string(k + 1) + ".txt"),
                              o.payloads[k]);
    }
  }
  std::filesystem::create_directories(c.out);
  util::write_file_atomic(c.out / ("simulate_" + c.cohort + ".json"),
                          json{{"cohort", c.cohort}, {"sessions", sessions}}.dump(2) + "\n");
  *ctx.out << clientsim::to_json(result.report).dump() << "\n";
  return result.report.errors == 0 ? kExitOk : kExitFailure;
}

int monitor(const CliConfig& c, const Context& ctx) {
  const auto endpoint = http::parse_endpoint(resolve_endpoint(c));
  management::HealthMonitor mon(
      {{endpoint.url(), [endpoint] { return http::probe_health(endpoint); }}}, c.interval_ms, 3,
      [&](const management::AlarmEvent& a) {
        *ctx.out << json{{"event", "alarm"}, {"target", a.target}, {"ts_ms", a.ts_ms}}.dump() << std::endl;
        *ctx.err << "\aALARM: " << a.target << " is unreachable\n";
      },
      [&](const std::vector<management::HealthStatus>& statuses) {
        for (const auto& s : statuses) {
          auto line = management::to_json(s);
          line["event"] = "health";
          *ctx.out << line.dump() << std::endl;
        }
      });

  SignalGuard signals;
  http::Client client(endpoint, std::chrono::milliseconds(1000));
  for (std::uint64_t tick = 1;; ++tick) {
    mon.tick();
    if (mon.statuses().at(0).state == management::HealthState::Healthy) {
      try {
        const auto res = client.get("/v1/mgmt/funnel");
        if (res.status == 200) *ctx.out << json{{"event", "funnel"}, {"funnel", res.json()}}.dump() << std::endl;
      } catch (const Error& e) {
        *ctx.err << "funnel: " << e.what() << "\n";
      }
    }
    if (c.ticks && tick >= c.ticks) break;
    if (signals.wait_for(c.interval_ms)) break;
  }
  return kExitOk;
}

int verify(const CliConfig& c, const Context& ctx) {
  http::Client client(http::parse_endpoint(resolve_endpoint(c)));
  const auto listing = client.get("/v1/sessions");
  if (listing.status != 200) throw Error("GET /v1/sessions: HTTP " + std::to_string(listing.status));
  std::vector<std::pair<std::string, std::string>> todo;
  bool found = false;
  for (const auto& doc : listing.json()) {
    const auto s = assembly::session_summary_from_json(doc);
    if (c.session && s.session_id != *c.session) continue;
    found = true;
    const auto code = c.code ? c.code : s.submitted_code;
    if (!code) {
      if (c.session) throw Error("session " + s.session_id + " has no submitted code; pass --code");
      continue;
    }
    if (!c.session && s.state != assembly::SessionState::Offboarding && s.state != assembly::SessionState::Completed) {
      continue;
    }
    todo.emplace_back(s.session_id, *code);
  }
  if (c.session && !found) throw Error("unknown session " + *c.session);
  for (const auto& [id, code] : todo) {
    const auto res = client.post_json("/v1/mgmt/sessions/" + id + "/verify", {{"code", code}});
    if (res.status != 200) throw Error("verify " + id + ": HTTP " + std::to_string(res.status) + " " + res.body);
    auto line = res.json();
    line["session_id"] = id;
    *ctx.out << line.dump() << "\n";
  }
  return kExitOk;
}

// Mirrors the service's sessions under dir/sessions/{id}/.
std::size_t export_sessions(const http::Endpoint& endpoint, const std::filesystem::path& dir) {
  http::Client client(endpoint, std::chrono::seconds(30));
  const auto listing = client.get("/v1/sessions");
  if (listing.status != 200) throw Error("GET /v1/sessions: HTTP " + std::to_string(listing.status));
  std::filesystem::remove_all(dir);
  std::size_t files = 0;
  for (const auto& doc : listing.json()) {
    const auto s = assembly::session_summary_from_json(doc);
    const auto session_dir = dir / "sessions" / s.session_id;
    auto fetch = [&](const std::string& path, const std::filesystem::path& file) {
      const auto res = client.get(path);
      if (res.status != 200) throw Error("GET " + path + ": HTTP " + std::to_string(res.status));
      util::write_file_atomic(file, res.body);
      ++files;
    };
    fetch("/v1/sessions/" + s.session_id + "/events.csv", session_dir / "events.csv");
    for (auto k : s.reconstructed_trials) {
      fetch("/v1/sessions/" + s.session_id + "/trials/" + std::to_string(k) + "/trajectory.csv",
            session_dir / ("trial_" + std::to_string(k) + ".csv"));
    }
  }
  util::write_file_atomic(dir / "sessions.json", listing.json().dump(2) + "\n");
  return files;
}

int export_data(const CliConfig& c, const Context& ctx) {
  const auto endpoint = http::parse_endpoint(resolve_endpoint(c));
  const auto files = export_sessions(endpoint, c.out / "export");
  *ctx.out << json{{"export", (c.out / "export").string()}, {"files", files}}.dump() << "\n";
  return kExitOk;
}

int analyze(const CliConfig& c, const Context& ctx) {
  const auto endpoint = http::parse_endpoint(resolve_endpoint(c));
  const auto export_dir = c.out / "export";
  if (http::probe_health(endpoint)) {
    export_sessions(endpoint, export_dir);
  } else if (std::filesystem::exists(export_dir / "sessions.json")) {
    *ctx.err << "warning: " << endpoint.url() << " unreachable; analyzing the existing export\n";
  } else {
    throw Error(endpoint.url() + " is unreachable and no export exists under " + export_dir.string());
  }
  const auto trials = analysis::load_trial_csvs(export_dir);
  const auto events = analysis::load_events_csvs(export_dir);
  const auto cohorts = analysis::partition_by_cohort(analysis::compute_metrics(trials), events);
  if (cohorts.empty()) throw Error("no reconstructed trials to analyze");
  const auto report = analysis::session_report(cohorts);
  analysis::write_report(report, cohorts, c.out / "analysis");
  *ctx.out << analysis::to_json(report).dump() << "\n";
  return kExitOk;
}

}  // namespace

std::string resolve_endpoint(const CliConfig& config) {
  if (!config.endpoint.empty()) return config.endpoint;
  if (auto text = util::try_read_file(config.state)) {
    try {
      const auto state = manifest::parse_state(*text);
      if (const auto* r = state.find(manifest::ResourceKind::assembly_service);
          r && r->status == manifest::ResourceStatus::created && r->attrs.count("endpoint")) {
        return r->attrs.at("endpoint");
      }
    } catch (const manifest::StateCorrupt&) {
    }
  }
  return kDefaultEndpoint;
}

int execute(const ParsedArgs& args, const Context& ctx) {
  Context io = ctx;
  if (!io.out) io.out = &std::cout;
  if (!io.err) io.err = &std::cerr;
  try {
    switch (args.command) {
      case Command::deploy:
        return deploy(args.config, io);
      case Command::serve:
        return serve(args.config, io);
      case Command::simulate:
        return simulate(args.config, io);
      case Command::monitor:
        return monitor(args.config, io);
      case Command::verify:
        return verify(args.config, io);
      case Command::export_data:
        return export_data(args.config, io);
      case Command::analyze:
        return analyze(args.config, io);
      case Command::teardown:
        return teardown(args.config, io);
    }
  } catch (const std::exception& e) {
    *io.err << "exac " << to_string(args.command) << ": " << e.what() << "\n";
  }
  return kExitFailure;
}

int run(int argc, const char* const* argv, const Context& ctx) {
  std::ostream& out = ctx.out ? *ctx.out : std::cout;
  std::ostream& err = ctx.err ? *ctx.err : std::cerr;
  try {
    return execute(parse_args(argc, argv), ctx);
  } catch (const HelpRequested& h) {
    out << h.what();
    return kExitOk;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  }
}

}  // namespace exac::cli
