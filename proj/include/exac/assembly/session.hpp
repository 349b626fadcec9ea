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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "exac/assembly/trial_buffer.hpp"

namespace exac::assembly {

enum class SessionState { Onboarding, InTrial, Offboarding, Completed, Failed, Abandoned };

std::string_view to_string(SessionState state);
std::optional<SessionState> session_state_from_string(std::string_view text);

bool is_terminal(SessionState state);

// Allowed: the forward chain Onboarding -> InTrial -> Offboarding ->
// Completed, plus Failed / Abandoned from any non-terminal state.
bool can_transition(SessionState from, SessionState to);

struct EventRecord {
  std::int64_t ts_ms = 0;
  std::uint64_t trial = 0;
  std::string name;
  nlohmann::json data = nlohmann::json::object();
};

// Recognized event names.
namespace events {
inline constexpr std::string_view kConsentGiven = "consent_given";
inline constexpr std::string_view kOnboardingPass = "onboarding_pass";
inline constexpr std::string_view kOnboardingFail = "onboarding_fail";
inline constexpr std::string_view kTrialStart = "trial_start";
inline constexpr std::string_view kTrialEnd = "trial_end";
inline constexpr std::string_view kSessionComplete = "session_complete";
}  // namespace events

// Next state after `event` given the current one. Unrecognized names and
// events that don't fit the current state leave it unchanged.
SessionState next_state(SessionState current, const EventRecord& event,
                        std::uint64_t trials_per_participant);

struct SessionRecord {
  std::string session_id;
  std::string participant_id;
  std::string treatment;
  std::string cohort;
  std::string os;
  std::string browser;
  std::optional<bool> onboarding_passed;
  SessionState state = SessionState::Onboarding;
  std::vector<EventRecord> events;
  std::map<std::uint64_t, TrialBuffer> trials;
  std::int64_t created_ts_ms = 0;  // server clock
  std::int64_t updated_ts_ms = 0;  // server clock
  std::optional<std::int64_t> first_event_ts_ms;     // client clock
  std::optional<std::int64_t> completed_event_ts_ms;  // client clock
  std::optional<std::string> submitted_code;
  bool code_verified = false;

  // Appends the event, pulls metadata from its data and advances the state.
  void apply_event(EventRecord event, std::uint64_t trials_per_participant);
};

}  // namespace exac::assembly
