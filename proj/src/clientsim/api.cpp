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

#include "exac/clientsim/api.hpp"

namespace exac::clientsim {

using nlohmann::json;

namespace {

json expect_json(const http::Response& r, const std::string& what) {
  if (r.status != 200) {
    std::string detail = r.body;
    try {
      detail = json::parse(r.body).value("error", r.body);
    } catch (const json::exception&) {
    }
    throw RequestRejected(r.status, what + " rejected with " + std::to_string(r.status) + ": " + detail);
  }
  return r.json();
}

}  // namespace

HttpServiceApi::HttpServiceApi(const http::Endpoint& endpoint) : client_(endpoint) {}

PostAck HttpServiceApi::post(const protocol::WireEnvelope& envelope) {
  const auto body = expect_json(client_.post("/v1/messages", protocol::encode_envelope(envelope)), "message");
  PostAck ack;
  ack.duplicate = body.value("duplicate", false);
  if (body.contains("trial_status") && body["trial_status"].is_string()) ack.trial_status = body["trial_status"];
  return ack;
}

std::string HttpServiceApi::assign(const std::string& participant_id, const std::string& session_id) {
  const auto r = client_.post_json("/v1/mgmt/assign", {{"participant_id", participant_id}, {"session_id", session_id}});
  if (r.status == 409) return r.json().at("treatment").get<std::string>();
  return expect_json(r, "assignment").at("treatment").get<std::string>();
}

completion::Challenge HttpServiceApi::challenge(const std::string& session_id) {
  return completion::challenge_from_json(
      expect_json(client_.post("/v1/sessions/" + session_id + "/challenge", "{}"), "challenge"));
}

bool HttpServiceApi::complete(const std::string& session_id, const std::string& code) {
  return expect_json(client_.post_json("/v1/sessions/" + session_id + "/complete", {{"code", code}}), "completion")
      .at("verified")
      .get<bool>();
}

FaultInjectingApi::FaultInjectingApi(std::unique_ptr<ServiceApi> inner, double fault_p, std::uint64_t seed,
                                     int max_consecutive)
    : inner_(std::move(inner)), fault_p_(fault_p), rng_(seed), max_consecutive_(max_consecutive) {}

template <typename Fn>
auto FaultInjectingApi::call(Fn&& fn) -> decltype(fn()) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (consecutive_ < max_consecutive_ && u(rng_) < fault_p_) {
    ++consecutive_;
    ++faults_;
    if (u(rng_) < 0.5) throw TransportError("injected fault before delivery");
    fn();
    throw TransportError("injected fault after delivery");
  }
  consecutive_ = 0;
  return fn();
}

PostAck FaultInjectingApi::post(const protocol::WireEnvelope& envelope) {
  return call([&] { return inner_->post(envelope); });
}

std::string FaultInjectingApi::assign(const std::string& participant_id, const std::string& session_id) {
  return call([&] { return inner_->assign(participant_id, session_id); });
}

completion::Challenge FaultInjectingApi::challenge(const std::string& session_id) {
  // Re-issuing replaces the challenge, so the client must use the last one
  // it received; a lost response is retried like any other.
  return call([&] { return inner_->challenge(session_id); });
}

bool FaultInjectingApi::complete(const std::string& session_id, const std::string& code) {
  return call([&] { return inner_->complete(session_id, code); });
}

}  // namespace exac::clientsim
