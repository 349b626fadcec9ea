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

#include "exac/management/recruitment.hpp"

#include "exac/util/fs.hpp"

namespace exac::management {

nlohmann::json to_json(const ClientCall& call) {
  return {{"op", call.op}, {"subject", call.subject}, {"session_id", call.session_id}, {"amount_usd", call.amount_usd}};
}

void MockRecruitmentClient::fail_create_on_call(std::size_t n) {
  std::lock_guard lock(mutex_);
  fail_create_on_ = n;
}

void MockRecruitmentClient::record(ClientCall call) {
  if (log_path_) util::append_line(*log_path_, to_json(call).dump());
  calls_.push_back(std::move(call));
}

std::string MockRecruitmentClient::create_hit(const HitSpec& spec) {
  std::lock_guard lock(mutex_);
  ++create_calls_;
  if (fail_create_on_ && create_calls_ == *fail_create_on_) {
    throw ClientError("create_hit call " + std::to_string(create_calls_) + " rejected");
  }
  record({"create_hit", spec.title, "", spec.reward_usd});
  return "HIT" + std::to_string(create_calls_);
}

void MockRecruitmentClient::approve(const std::string& worker_id, const std::string& session_id) {
  std::lock_guard lock(mutex_);
  record({"approve", worker_id, session_id, 0});
}

void MockRecruitmentClient::pay(const std::string& worker_id, const std::string& session_id, double amount_usd) {
  std::lock_guard lock(mutex_);
  if (++pays_[session_id] > 1) double_pay_ = true;
  record({"pay", worker_id, session_id, amount_usd});
}

std::vector<ClientCall> MockRecruitmentClient::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::size_t MockRecruitmentClient::pay_count(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  const auto it = pays_.find(session_id);
  return it == pays_.end() ? 0 : it->second;
}

std::size_t MockRecruitmentClient::pay_count() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& [_, c] : pays_) n += c;
  return n;
}

bool MockRecruitmentClient::double_pay_detected() const {
  std::lock_guard lock(mutex_);
  return double_pay_;
}

}  // namespace exac::management
