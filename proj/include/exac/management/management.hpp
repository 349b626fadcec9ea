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
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "exac/assembly/service.hpp"
#include "exac/completion/completion.hpp"
#include "exac/management/recruitment.hpp"
#include "exac/management/registry.hpp"
#include "exac/manifest/manifest.hpp"

namespace exac::management {

enum class AssignmentStrategy { balanced, uniform_random };

std::string_view to_string(AssignmentStrategy strategy);
std::optional<AssignmentStrategy> assignment_strategy_from_string(std::string_view text);

struct Rejected {
  std::string reason;  // bad_code | not_offboarding | already_rewarded

  friend bool operator==(const Rejected&, const Rejected&) = default;
};

using VerifyResult = std::variant<RewardDecision, Rejected>;

nlohmann::json to_json(const VerifyResult& result);

using SessionLookup = std::function<std::optional<assembly::SessionSummary>(const std::string&)>;
using ChallengeLookup = std::function<std::optional<completion::Challenge>(const std::string&)>;

struct ManagementConfig {
  AssignmentStrategy strategy = AssignmentStrategy::balanced;
  std::uint64_t seed = 0;
};

// Participant-facing operations: treatment assignment, completion
// verification with payment, and HIT release.
class Management {
 public:
  Management(manifest::ExperimentManifest manifest, std::shared_ptr<Registry> registry,
             std::shared_ptr<RecruitmentClient> client, SessionLookup sessions, ChallengeLookup challenges,
             ManagementConfig config = {});

  // The n-th assignment draws from a stream derived from (seed, n), so the
  // sequence depends only on the seed and the call order.
  // Throws DuplicateParticipant.
  std::string assign_treatment(const std::string& participant_id, const std::string& session_id,
                               std::int64_t now_ms);

  // Pays at most once per session, whatever the interleaving of callers.
  VerifyResult verify_and_reward(const std::string& session_id, const std::string& submitted_code,
                                 std::int64_t now_ms);

  // One client call per batch not yet recorded. Throws ClientError naming
  // the 1-based batch index; earlier batches stay recorded.
  std::vector<std::string> create_hits(const HitSpec& spec, std::uint64_t batches, std::int64_t now_ms);

  const manifest::ExperimentManifest& manifest() const { return manifest_; }
  Registry& registry() { return *registry_; }

 private:
  std::mutex& session_mutex(const std::string& session_id);

  manifest::ExperimentManifest manifest_;
  std::shared_ptr<Registry> registry_;
  std::shared_ptr<RecruitmentClient> client_;
  SessionLookup sessions_;
  ChallengeLookup challenges_;
  ManagementConfig config_;

  std::mutex assign_mutex_;
  std::mutex hits_mutex_;
  std::mutex session_mutexes_guard_;
  std::map<std::string, std::unique_ptr<std::mutex>> session_mutexes_;
};

}  // namespace exac::management
