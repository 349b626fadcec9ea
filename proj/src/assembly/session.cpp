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

#include "exac/assembly/session.hpp"

namespace exac::assembly {

std::string_view to_string(SessionState state) {
  switch (state) {
    case SessionState::Onboarding:
      return "Onboarding";
    case SessionState::InTrial:
      return "InTrial";
    case SessionState::Offboarding:
      return "Offboarding";
    case SessionState::Completed:
      return "Completed";
    case SessionState::Failed:
      return "Failed";
    case SessionState::Abandoned:
      return "Abandoned";
  }
  return "?";
}

std::optional<SessionState> session_state_from_string(std::string_view text) {
  for (auto s : {SessionState::Onboarding, SessionState::InTrial, SessionState::Offboarding,
                 SessionState::Completed, SessionState::Failed, SessionState::Abandoned}) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

bool is_terminal(SessionState state) {
  return state == SessionState::Completed || state == SessionState::Failed ||
         state == SessionState::Abandoned;
}

bool can_transition(SessionState from, SessionState to) {
  if (is_terminal(from)) return false;
  if (to == SessionState::Failed || to == SessionState::Abandoned) return true;
  return static_cast<int>(to) == static_cast<int>(from) + 1;
}

SessionState next_state(SessionState current, const EventRecord& event,
                        std::uint64_t trials_per_participant) {
  auto move = [current](SessionState to) { return can_transition(current, to) ? to : current; };
  const std::string_view name = event.name;
  if (name == events::kOnboardingFail) return move(SessionState::Failed);
  if (name == events::kTrialStart && current == SessionState::Onboarding) return move(SessionState::InTrial);
  if (name == events::kTrialEnd && current == SessionState::InTrial &&
      event.trial >= trials_per_participant) {
    return move(SessionState::Offboarding);
  }
  if (name == events::kSessionComplete && current == SessionState::Offboarding) {
    return move(SessionState::Completed);
  }
  return current;
}

void SessionRecord::apply_event(EventRecord event, std::uint64_t trials_per_participant) {
  if (!first_event_ts_ms) first_event_ts_ms = event.ts_ms;
  auto take = [&event](const char* key, std::string& into) {
    const auto it = event.data.find(key);
    if (it != event.data.end() && it->is_string() && !it->get<std::string>().empty()) into = it->get<std::string>();
  };
  take("participant_id", participant_id);
  take("treatment", treatment);
  take("cohort", cohort);
  take("os", os);
  take("browser", browser);
  if (event.name == events::kOnboardingPass) onboarding_passed = true;
  if (event.name == events::kOnboardingFail) onboarding_passed = false;

  const auto next = next_state(state, event, trials_per_participant);
  if (next == SessionState::Completed && state != SessionState::Completed) completed_event_ts_ms = event.ts_ms;
  state = next;
  events.push_back(std::move(event));
}

}  // namespace exac::assembly
