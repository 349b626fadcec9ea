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

#include "exac/management/management.hpp"

#include <algorithm>
#include <random>

#include "exac/util/clock.hpp"

namespace exac::management {

std::string_view to_string(AssignmentStrategy s) {
  return s == AssignmentStrategy::balanced ? "balanced" : "uniform_random";
}

std::optional<AssignmentStrategy> assignment_strategy_from_string(std::string_view text) {
  if (text == "balanced") return AssignmentStrategy::balanced;
  if (text == "uniform_random") return AssignmentStrategy::uniform_random;
  return std::nullopt;
}

nlohmann::json to_json(const VerifyResult& result) {
  if (const auto* d = std::get_if<RewardDecision>(&result)) {
    return {{"result", "rewarded"}, {"reward", to_json(*d)}};
  }
  return {{"result", "rejected"}, {"reason", std::get<Rejected>(result).reason}};
}

Management::Management(manifest::ExperimentManifest manifest, std::shared_ptr<Registry> registry,
                       std::shared_ptr<RecruitmentClient> client, SessionLookup sessions,
                       ChallengeLookup challenges, ManagementConfig config)
    : manifest_(std::move(manifest)),
      registry_(std::move(registry)),
      client_(std::move(client)),
      sessions_(std::move(sessions)),
      challenges_(std::move(challenges)),
      config_(config) {
  if (manifest_.treatments.empty()) throw InvariantError("no treatments to assign");
}

std::string Management::assign_treatment(const std::string& participant_id, const std::string& session_id,
                                         std::int64_t now_ms) {
  std::lock_guard lock(assign_mutex_);
  if (auto existing = registry_->by_participant(participant_id)) {
    throw DuplicateParticipant(participant_id, existing->treatment);
  }
  std::mt19937_64 rng(util::mix_seed(config_.seed, registry_->assignment_count()));
  const auto& labels = manifest_.treatments;
  std::string chosen;
  if (config_.strategy == AssignmentStrategy::uniform_random) {
    chosen = labels[std::uniform_int_distribution<std::size_t>(0, labels.size() - 1)(rng)];
  } else {
    const auto counts = registry_->treatment_counts();
    auto count_of = [&counts](const std::string& t) {
      const auto it = counts.find(t);
      return it == counts.end() ? std::size_t{0} : it->second;
    };
    std::size_t lowest = SIZE_MAX;
    for (const auto& t : labels) lowest = std::min(lowest, count_of(t));
    std::vector<std::string> candidates;
    for (const auto& t : labels) {
      if (count_of(t) == lowest) candidates.push_back(t);
    }
    chosen = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
  }
  registry_->record_assign({participant_id, session_id, chosen, now_ms, false, std::nullopt});
  return chosen;
}

std::mutex& Management::session_mutex(const std::string& session_id) {
  std::lock_guard lock(session_mutexes_guard_);
  auto& m = session_mutexes_[session_id];
  if (!m) m = std::make_unique<std::mutex>();
  return *m;
}

VerifyResult Management::verify_and_reward(const std::string& session_id, const std::string& submitted_code,
                                           std::int64_t now_ms) {
  std::lock_guard lock(session_mutex(session_id));
  if (const auto rec = registry_->by_session(session_id); rec && rec->reward) return Rejected{"already_rewarded"};

  const auto session = sessions_(session_id);
  if (!session || (session->state != assembly::SessionState::Offboarding &&
                   session->state != assembly::SessionState::Completed)) {
    return Rejected{"not_offboarding"};
  }
  const auto challenge = challenges_(session_id);
  if (!challenge || !completion::verify_code(submitted_code, *challenge, manifest_.salt)) return Rejected{"bad_code"};

  const auto assigned = registry_->by_session(session_id);
  const std::string worker =
      assigned && !assigned->participant_id.empty() ? assigned->participant_id : session->participant_id;
  registry_->record_verify(session_id, worker, now_ms);

  const auto start = session->first_event_ts_ms.value_or(session->created_ts_ms);
  const auto end = session->completed_event_ts_ms.value_or(now_ms);
  const double duration_min = static_cast<double>(std::max<std::int64_t>(0, end - start)) / 60000.0;
  const auto decision = compute_reward(manifest_, duration_min);

  // Journal first: a crash after this point can lose a payment but never
  // repeat one.
  registry_->record_reward(session_id, decision, now_ms);
  client_->approve(worker, session_id);
  client_->pay(worker, session_id, decision.total_usd);
  return decision;
}

std::vector<std::string> Management::create_hits(const HitSpec& spec, std::uint64_t batches, std::int64_t now_ms) {
  if (spec.max_assignments < 1) throw InvariantError("max_assignments must be >= 1");
  std::lock_guard lock(hits_mutex_);
  for (std::uint64_t batch = 1; batch <= batches; ++batch) {
    if (registry_->hits().count(batch)) continue;
    std::string id;
    try {
      id = client_->create_hit(spec);
    } catch (const ClientError& e) {
      throw ClientError("batch " + std::to_string(batch) + ": " + e.what());
    }
    registry_->record_hit(batch, id, now_ms);
  }
  std::vector<std::string> ids;
  for (const auto& [batch, id] : registry_->hits()) {
    if (batch <= batches) ids.push_back(id);
  }
  return ids;
}

}  // namespace exac::management
