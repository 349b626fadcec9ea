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

#include <optional>
#include <random>
#include <string>

#include "exac/protocol/envelope.hpp"

namespace exac::clientsim {

struct CapabilityProfile {
  std::string os;
  std::string browser;
  bool webgl_capable = true;
  bool frame_rate_ok = true;
};

struct OnboardingResult {
  bool passed = false;
  std::string reason;  // "webgl" or "frame_rate" on failure
};

OnboardingResult onboarding_check(const CapabilityProfile& profile);

// The onboarding_pass / onboarding_fail event for `profile`.
protocol::WireEnvelope onboarding_event(const std::string& session_id, const std::string& participant_id,
                                        const CapabilityProfile& profile, std::int64_t ts_ms);

// Draws pass/fail with probability `pass_p`, then an (os, browser) cell
// weighted by the participant-monitoring counts of that outcome.
CapabilityProfile sample_profile(double pass_p, std::mt19937_64& rng);

}  // namespace exac::clientsim
