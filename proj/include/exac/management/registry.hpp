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

#include "exac/manifest/manifest.hpp"

namespace exac::management {

struct RewardDecision {
  double base_usd = 0;
  double bonus_usd = 0;
  double total_usd = 0;
  double duration_min = 0;

  friend bool operator==(const RewardDecision&, const RewardDecision&) = default;
};

nlohmann::json to_json(const RewardDecision& decision);

// Bonus applies strictly below the manifest's threshold.
RewardDecision compute_reward(const manifest::ExperimentManifest& manifest, double duration_min);

struct ParticipantRecord {
  std::string participant_id;
  std::string session_id;
  std::string treatment;
  std::int64_t assignment_ts_ms = 0;
  bool verified = false;
  std::optional<RewardDecision> reward;
};

nlohmann::json to_json(const ParticipantRecord& record);

class DuplicateParticipant : public Error {
 public:
  DuplicateParticipant(const std::string& participant_id, std::string treatment)
      : Error("participant '" + participant_id + "' already assigned"), treatment_(std::move(treatment)) {}
  const std::string& treatment() const { return treatment_; }

 private:
  std::string treatment_;
};

// Append-only journal of management decisions, rebuilt by replay. Without a
// path the registry lives in memory only. All writes are serialized.
class Registry {
 public:
  explicit Registry(std::optional<std::filesystem::path> journal = std::nullopt);

  // Throws DuplicateParticipant if the participant already has a treatment.
  void record_assign(const ParticipantRecord& record);
  void record_verify(const std::string& session_id, const std::string& participant_id, std::int64_t ts_ms);
  void record_reward(const std::string& session_id, const RewardDecision& decision, std::int64_t ts_ms);
  void record_alarm(const std::string& target, std::int64_t ts_ms);
  void record_hit(std::uint64_t batch, const std::string& hit_id, std::int64_t ts_ms);

  std::optional<ParticipantRecord> by_participant(const std::string& participant_id) const;
  std::optional<ParticipantRecord> by_session(const std::string& session_id) const;
  std::vector<ParticipantRecord> participants() const;
  std::map<std::string, std::size_t> treatment_counts() const;
  std::size_t assignment_count() const;
  std::map<std::uint64_t, std::string> hits() const;
  std::size_t alarm_count() const;

 private:
  void write(const nlohmann::json& record);
  void apply(const nlohmann::json& record);

  mutable std::mutex mutex_;
  std::optional<std::filesystem::path> journal_;
  std::map<std::string, ParticipantRecord> by_session_;
  std::map<std::string, std::string> session_of_participant_;
  std::map<std::string, std::size_t> treatment_counts_;
  std::map<std::uint64_t, std::string> hits_;
  std::size_t assignments_ = 0;
  std::size_t alarms_ = 0;
};

}  // namespace exac::management
