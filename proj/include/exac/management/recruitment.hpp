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

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exac/error.hpp"

namespace exac::management {

struct HitSpec {
  std::string title;
  double reward_usd = 0;
  std::uint64_t max_assignments = 1;
  std::string external_url;
};

class ClientError : public Error {
 public:
  using Error::Error;
};

// Crowdsourcing platform operations used by the experiment.
class RecruitmentClient {
 public:
  virtual ~RecruitmentClient() = default;

  virtual std::string create_hit(const HitSpec& spec) = 0;
  virtual void approve(const std::string& worker_id, const std::string& session_id) = 0;
  virtual void pay(const std::string& worker_id, const std::string& session_id, double amount_usd) = 0;
};

struct ClientCall {
  std::string op;  // create_hit | approve | pay
  std::string subject;  // hit title or worker id
  std::string session_id;
  double amount_usd = 0;
};

nlohmann::json to_json(const ClientCall& call);

// In-process stand-in. Records every call and optionally appends it to a
// JSON-lines log. A second pay for the same session is recorded and flagged.
class MockRecruitmentClient final : public RecruitmentClient {
 public:
  explicit MockRecruitmentClient(std::optional<std::filesystem::path> log_path = std::nullopt)
      : log_path_(std::move(log_path)) {}

  // The n-th create_hit call (1-based) throws ClientError.
  void fail_create_on_call(std::size_t n);

  std::string create_hit(const HitSpec& spec) override;
  void approve(const std::string& worker_id, const std::string& session_id) override;
  void pay(const std::string& worker_id, const std::string& session_id, double amount_usd) override;

  std::vector<ClientCall> calls() const;
  std::size_t pay_count(const std::string& session_id) const;
  std::size_t pay_count() const;
  bool double_pay_detected() const;

 private:
  void record(ClientCall call);

  mutable std::mutex mutex_;
  std::optional<std::filesystem::path> log_path_;
  std::optional<std::size_t> fail_create_on_;
  std::size_t create_calls_ = 0;
  std::vector<ClientCall> calls_;
  std::map<std::string, std::size_t> pays_;
  bool double_pay_ = false;
};

}  // namespace exac::management
