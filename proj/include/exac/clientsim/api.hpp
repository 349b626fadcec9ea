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

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <string>

#include "exac/completion/completion.hpp"
#include "exac/http/client.hpp"
#include "exac/protocol/envelope.hpp"

namespace exac::clientsim {

using http::TransportError;

// The service answered but refused the request; retrying cannot help.
class RequestRejected : public Error {
 public:
  RequestRejected(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct PostAck {
  bool duplicate = false;
  std::string trial_status;  // empty for events
};

// What a participant's browser talks to.
class ServiceApi {
 public:
  virtual ~ServiceApi() = default;

  virtual PostAck post(const protocol::WireEnvelope& envelope) = 0;
  // Returns the treatment, also when the participant was already assigned.
  virtual std::string assign(const std::string& participant_id, const std::string& session_id) = 0;
  virtual completion::Challenge challenge(const std::string& session_id) = 0;
  virtual bool complete(const std::string& session_id, const std::string& code) = 0;
};

using ApiFactory = std::function<std::unique_ptr<ServiceApi>()>;

class HttpServiceApi final : public ServiceApi {
 public:
  explicit HttpServiceApi(const http::Endpoint& endpoint);

  PostAck post(const protocol::WireEnvelope& envelope) override;
  std::string assign(const std::string& participant_id, const std::string& session_id) override;
  completion::Challenge challenge(const std::string& session_id) override;
  bool complete(const std::string& session_id, const std::string& code) override;

 private:
  http::Client client_;
};

// Fails a fraction of calls with TransportError, half of them after the
// request was delivered (a lost acknowledgement). At most
// `max_consecutive` faults in a row, so a retrying caller always gets
// through.
class FaultInjectingApi final : public ServiceApi {
 public:
  FaultInjectingApi(std::unique_ptr<ServiceApi> inner, double fault_p, std::uint64_t seed,
                    int max_consecutive = 2);

  PostAck post(const protocol::WireEnvelope& envelope) override;
  std::string assign(const std::string& participant_id, const std::string& session_id) override;
  completion::Challenge challenge(const std::string& session_id) override;
  bool complete(const std::string& session_id, const std::string& code) override;

  std::uint64_t faults() const { return faults_; }

 private:
  template <typename Fn>
  auto call(Fn&& fn) -> decltype(fn());

  std::unique_ptr<ServiceApi> inner_;
  double fault_p_;
  std::mt19937_64 rng_;
  int max_consecutive_;
  int consecutive_ = 0;
  std::uint64_t faults_ = 0;
};

struct RetryPolicy {
  int retries = 3;
  std::chrono::milliseconds base_backoff{100};
  std::function<void(std::chrono::milliseconds)> sleep;  // std::this_thread::sleep_for when empty
};

// Calls `fn`, retrying TransportError with exponential backoff. Rethrows
// the last error once retries are exhausted.
template <typename Fn>
auto with_retries(const RetryPolicy& policy, std::uint64_t& retry_counter, Fn&& fn) -> decltype(fn());

}  // namespace exac::clientsim

#include "exac/clientsim/api_inl.hpp"
