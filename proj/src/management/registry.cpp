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

#include "exac/management/registry.hpp"

#include <sstream>

#include "exac/util/fs.hpp"

namespace exac::management {

using nlohmann::json;

json to_json(const RewardDecision& d) {
  return {{"base_usd", d.base_usd}, {"bonus_usd", d.bonus_usd}, {"total_usd", d.total_usd},
          {"duration_min", d.duration_min}};
}

RewardDecision compute_reward(const manifest::ExperimentManifest& m, double duration_min) {
  RewardDecision d;
  d.duration_min = duration_min;
  d.base_usd = m.reward_base_usd;
  d.bonus_usd = duration_min < m.bonus_threshold_min ? m.reward_bonus_usd : 0.0;
  d.total_usd = d.base_usd + d.bonus_usd;
  return d;
}

json to_json(const ParticipantRecord& r) {
  return {{"participant_id", r.participant_id},
          {"session_id", r.session_id},
          {"treatment", r.treatment},
          {"assignment_ts_ms", r.assignment_ts_ms},
          {"verified", r.verified},
          {"reward", r.reward ? to_json(*r.reward) : json(nullptr)}};
}

Registry::Registry(std::optional<std::filesystem::path> journal) : journal_(std::move(journal)) {
  if (!journal_) return;
  const auto text = util::try_read_file(*journal_);
  if (!text) return;
  std::istringstream in(*text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    // A torn final line (no newline) is a write that never completed.
    if (in.eof() && text->back() != '\n') break;
    try {
      apply(json::parse(line));
    } catch (const json::exception& e) {
      throw SchemaError(journal_->string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void Registry::write(const json& record) {
  if (journal_) util::append_line(*journal_, record.dump());
  apply(record);
}

void Registry::apply(const json& rec) {
  const auto type = rec.at("type").get<std::string>();
  if (type == "assign") {
    ParticipantRecord r;
    r.participant_id = rec.at("participant_id").get<std::string>();
    r.session_id = rec.at("session_id").get<std::string>();
    r.treatment = rec.at("treatment").get<std::string>();
    r.assignment_ts_ms = rec.at("ts_ms").get<std::int64_t>();
    session_of_participant_[r.participant_id] = r.session_id;
    ++treatment_counts_[r.treatment];
    ++assignments_;
    by_session_[r.session_id] = std::move(r);
  } else if (type == "verify") {
    const auto session = rec.at("session_id").get<std::string>();
    auto& r = by_session_[session];
    r.session_id = session;
    if (r.participant_id.empty()) r.participant_id = rec.value("participant_id", std::string());
    r.verified = true;
  } else if (type == "reward") {
    const auto& d = rec.at("decision");
    by_session_[rec.at("session_id").get<std::string>()].reward =
        RewardDecision{d.at("base_usd").get<double>(), d.at("bonus_usd").get<double>(),
                       d.at("total_usd").get<double>(), d.at("duration_min").get<double>()};
  } else if (type == "alarm") {
    ++alarms_;
  } else if (type == "hit") {
    hits_[rec.at("batch").get<std::uint64_t>()] = rec.at("hit_id").get<std::string>();
  } else {
    throw SchemaError("unknown journal record type '" + type + "'");
  }
}

void Registry::record_assign(const ParticipantRecord& r) {
  std::lock_guard lock(mutex_);
  if (const auto it = session_of_participant_.find(r.participant_id); it != session_of_participant_.end()) {
    throw DuplicateParticipant(r.participant_id, by_session_.at(it->second).treatment);
  }
  write({{"type", "assign"},
         {"ts_ms", r.assignment_ts_ms},
         {"participant_id", r.participant_id},
         {"session_id", r.session_id},
         {"treatment", r.treatment}});
}

void Registry::record_verify(const std::string& session_id, const std::string& participant_id, std::int64_t ts_ms) {
  std::lock_guard lock(mutex_);
  write({{"type", "verify"}, {"ts_ms", ts_ms}, {"session_id", session_id}, {"participant_id", participant_id}});
}

void Registry::record_reward(const std::string& session_id, const RewardDecision& d, std::int64_t ts_ms) {
  std::lock_guard lock(mutex_);
  write({{"type", "reward"}, {"ts_ms", ts_ms}, {"session_id", session_id}, {"decision", to_json(d)}});
}

void Registry::record_alarm(const std::string& target, std::int64_t ts_ms) {
  std::lock_guard lock(mutex_);
  write({{"type", "alarm"}, {"ts_ms", ts_ms}, {"target", target}});
}

void Registry::record_hit(std::uint64_t batch, const std::string& hit_id, std::int64_t ts_ms) {
  std::lock_guard lock(mutex_);
  write({{"type", "hit"}, {"ts_ms", ts_ms}, {"batch", batch}, {"hit_id", hit_id}});
}

std::optional<ParticipantRecord> Registry::by_participant(const std::string& participant_id) const {
  std::lock_guard lock(mutex_);
  const auto it = session_of_participant_.find(participant_id);
  if (it == session_of_participant_.end()) return std::nullopt;
  return by_session_.at(it->second);
}

std::optional<ParticipantRecord> Registry::by_session(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  const auto it = by_session_.find(session_id);
  if (it == by_session_.end()) return std::nullopt;
  return it->second;
}

std::vector<ParticipantRecord> Registry::participants() const {
  std::lock_guard lock(mutex_);
  std::vector<ParticipantRecord> out;
  for (const auto& [_, r] : by_session_) out.push_back(r);
  return out;
}

std::map<std::string, std::size_t> Registry::treatment_counts() const {
  std::lock_guard lock(mutex_);
  return treatment_counts_;
}

std::size_t Registry::assignment_count() const {
  std::lock_guard lock(mutex_);
  return assignments_;
}

std::map<std::uint64_t, std::string> Registry::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}

std::size_t Registry::alarm_count() const {
  std::lock_guard lock(mutex_);
  return alarms_;
}

}  // namespace exac::management
