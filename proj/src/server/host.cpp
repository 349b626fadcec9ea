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

#include "exac/server/host.hpp"

#include <httplib.h>

#include "exac/http/client.hpp"
#include "exac/management/funnel.hpp"
#include "exac/protocol/envelope.hpp"
#include "exac/util/clock.hpp"

namespace exac::server {

using nlohmann::json;

struct ServiceHost::Http {
  httplib::Server server;
};

namespace {

constexpr const char* kJson = "application/json";

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void reply_error(httplib::Response& res, int status, const std::string& message,
                 const std::optional<std::string>& path = std::nullopt) {
  json body{{"error", message}};
  if (path) body["path"] = *path;
  reply(res, status, body);
}

// Maps library errors to HTTP statuses.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const DecodeError& e) {
    reply_error(res, 400, e.what(), e.path());
  } catch (const assembly::ConflictError& e) {
    reply_error(res, 409, e.what());
  } catch (const assembly::NotReady& e) {
    reply_error(res, 409, e.what());
  } catch (const SchemaError& e) {
    reply_error(res, 400, e.what());
  } catch (const InvariantError& e) {
    reply_error(res, 400, e.what());
  } catch (const json::exception& e) {
    reply_error(res, 400, e.what());
  } catch (const std::exception& e) {
    reply_error(res, 500, e.what());
  }
}

json parse_body(const httplib::Request& req) {
  try {
    auto doc = json::parse(req.body);
    if (!doc.is_object()) throw SchemaError("request body must be a JSON object");
    return doc;
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("request body is not JSON: ") + e.what());
  }
}

std::string string_field(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end() || !it->is_string()) throw SchemaError(std::string(key) + ": expected a string");
  return it->get<std::string>();
}

std::string challenge_key(const std::string& session_id) {
  return assembly::session_prefix(session_id) + "challenge.json";
}

}  // namespace

ServiceHost::ServiceHost(HostConfig config)
    : config_(std::move(config)), challenges_(config_.challenge_seed), http_(std::make_unique<Http>()) {
  if (config_.data_dir) {
    storage_ = std::make_shared<assembly::LocalDirectoryStorage>(*config_.data_dir);
  } else {
    storage_ = std::make_shared<assembly::InMemoryStorage>();
  }
  config_.assembly.trials_per_participant = config_.manifest.trials_per_participant;
  assembly_ = std::make_unique<assembly::AssemblyService>(storage_, config_.assembly);
  registry_ = std::make_shared<management::Registry>(config_.registry_path);
  recruitment_ = std::make_shared<management::MockRecruitmentClient>(config_.recruitment_log);
  management_ = std::make_unique<management::Management>(
      config_.manifest, registry_, recruitment_, [this](const std::string& id) { return assembly_->find(id); },
      [this](const std::string& id) { return find_challenge(id); }, config_.management);
  register_routes();
}

ServiceHost::~ServiceHost() { stop(); }

std::string ServiceHost::endpoint() const { return "http://" + config_.bind_host + ":" + std::to_string(port_); }

std::optional<completion::Challenge> ServiceHost::find_challenge(const std::string& session_id) const {
  if (auto c = challenges_.find(session_id)) return c;
  const auto stored = storage_->get(challenge_key(session_id));
  if (!stored) return std::nullopt;
  auto c = completion::challenge_from_json(json::parse(*stored));
  const_cast<completion::ChallengeStore&>(challenges_).put(c);
  return c;
}

completion::Challenge ServiceHost::issue_challenge(const std::string& session_id) {
  if (!assembly_->find(session_id)) throw assembly::UnknownSession(session_id);
  const auto challenge = challenges_.issue(session_id, util::now_ms());
  storage_->put(challenge_key(session_id), completion::to_json(challenge).dump());
  return challenge;
}

bool ServiceHost::submit_code(const std::string& session_id, const std::string& code) {
  if (!assembly_->find(session_id)) throw assembly::UnknownSession(session_id);
  const auto challenge = find_challenge(session_id);
  const bool verified = challenge && completion::verify_code(code, *challenge, config_.manifest.salt);
  assembly_->record_code(session_id, code, verified);
  return verified;
}

void ServiceHost::register_routes() {
  auto& s = http_->server;
  s.set_tcp_nodelay(true);
  s.set_payload_max_length(std::size_t{16} << 20);
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  s.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  s.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"status", "ok"}, {"uptime_s", assembly_->status().uptime_s}});
  });

  s.Post("/v1/messages", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto envelope = protocol::decode_envelope(req.body);
      try {
        reply(res, 200, assembly::to_json(assembly_->ingest(envelope)));
      } catch (const assembly::UnknownSession& e) {
        reply_error(res, 400, e.what(), std::string("session"));
      }
    });
  });

  s.Get("/v1/status", [this](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, assembly::to_json(assembly_->status()));
  });

  s.Get("/v1/sessions", [this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& summary : assembly_->sessions()) out.push_back(assembly::to_json(summary));
    reply(res, 200, out);
  });

  s.Get(R"(/v1/sessions/([^/]+)/events\.csv)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      try {
        res.set_content(assembly_->export_events_csv(req.matches[1]), "text/csv");
      } catch (const assembly::UnknownSession& e) {
        reply_error(res, 404, e.what());
      }
    });
  });

  s.Get(R"(/v1/sessions/([^/]+)/trials/([0-9]{1,19})/trajectory\.csv)",
        [this](const httplib::Request& req, httplib::Response& res) {
          guarded(res, [&] {
            try {
              res.set_content(assembly_->export_trial_csv(req.matches[1], std::stoull(req.matches[2])), "text/csv");
            } catch (const assembly::UnknownSession& e) {
              reply_error(res, 404, e.what());
            }
          });
        });

  s.Post(R"(/v1/sessions/([^/]+)/challenge)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      try {
        reply(res, 200, completion::to_json(issue_challenge(req.matches[1])));
      } catch (const assembly::UnknownSession& e) {
        reply_error(res, 404, e.what());
      }
    });
  });

  s.Post(R"(/v1/sessions/([^/]+)/complete)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto code = string_field(parse_body(req), "code");
      try {
        reply(res, 200, {{"verified", submit_code(req.matches[1], code)}});
      } catch (const assembly::UnknownSession& e) {
        reply_error(res, 404, e.what());
      }
    });
  });

  s.Post("/v1/mgmt/assign", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = parse_body(req);
      const auto participant = string_field(body, "participant_id");
      const auto session = string_field(body, "session_id");
      if (participant.empty()) throw InvariantError("participant_id: must be non-empty");
      if (!protocol::valid_session_id(session)) throw InvariantError("session_id: invalid");
      try {
        reply(res, 200, {{"treatment", management_->assign_treatment(participant, session, util::now_ms())}});
      } catch (const management::DuplicateParticipant& e) {
        reply(res, 409, {{"error", e.what()}, {"treatment", e.treatment()}});
      }
    });
  });

  s.Get("/v1/mgmt/funnel", [this](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, management::to_json(management::compute_funnel(assembly_->sessions())));
  });

  s.Get("/v1/mgmt/participants", [this](const httplib::Request&, httplib::Response& res) {
    json out = json::array();
    for (const auto& p : registry_->participants()) out.push_back(management::to_json(p));
    reply(res, 200, out);
  });

  s.Get("/v1/mgmt/health", [this](const httplib::Request&, httplib::Response& res) {
    json targets = json::array();
    bool alarm = false;
    std::uint64_t alarms = 0;
    if (monitor_) {
      for (const auto& st : monitor_->statuses()) {
        alarm = alarm || st.state == management::HealthState::Unreachable;
        targets.push_back(management::to_json(st));
      }
      alarms = monitor_->alarms();
    }
    reply(res, 200, {{"targets", targets}, {"alarm", alarm}, {"alarms", alarms}});
  });

  s.Post(R"(/v1/mgmt/sessions/([^/]+)/verify)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      const auto code = string_field(parse_body(req), "code");
      const auto result = management_->verify_and_reward(id, code, util::now_ms());
      if (std::holds_alternative<management::RewardDecision>(result)) assembly_->record_code(id, code, true);
      reply(res, 200, management::to_json(result));
    });
  });
}

int ServiceHost::start() {
  if (listener_.joinable()) return port_;
  assembly_->recover();
  auto& s = http_->server;
  if (config_.port == 0) {
    port_ = s.bind_to_any_port(config_.bind_host);
  } else {
    port_ = s.bind_to_port(config_.bind_host, config_.port) ? config_.port : -1;
  }
  if (port_ <= 0) throw Error("cannot bind " + config_.bind_host + ":" + std::to_string(config_.port));
  listener_ = std::thread([&s] { s.listen_after_bind(); });
  s.wait_until_ready();

  const auto target = http::parse_endpoint(config_.monitor_endpoint.value_or(endpoint()));
  monitor_ = std::make_unique<management::HealthMonitor>(
      std::vector<management::HealthTarget>{{target.url(), [target] { return http::probe_health(target); }}},
      std::max<std::int64_t>(100, config_.monitor_interval_ms), 3,
      [this](const management::AlarmEvent& a) { registry_->record_alarm(a.target, a.ts_ms); });
  monitor_->start();

  {
    std::lock_guard lock(sweep_mutex_);
    stopping_ = false;
  }
  sweeper_ = std::thread([this] { sweep_loop(); });
  return port_;
}

void ServiceHost::sweep_loop() {
  std::unique_lock lock(sweep_mutex_);
  while (!sweep_cv_.wait_for(lock, std::chrono::milliseconds(config_.sweep_interval_ms), [this] { return stopping_; })) {
    lock.unlock();
    assembly_->sweep_idle(util::now_ms());
    lock.lock();
  }
}

void ServiceHost::stop() {
  {
    std::lock_guard lock(sweep_mutex_);
    stopping_ = true;
  }
  sweep_cv_.notify_all();
  if (sweeper_.joinable()) sweeper_.join();
  if (monitor_) monitor_->stop();
  http_->server.stop();
  if (listener_.joinable()) listener_.join();
}

}  // namespace exac::server
