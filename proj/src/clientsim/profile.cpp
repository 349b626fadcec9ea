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

#include "exac/clientsim/profile.hpp"

#include <vector>

namespace exac::clientsim {

namespace {

struct AgentWeight {
  const char* os;
  const char* browser;
  int count;
};

// Observed user agents of participants whose client rendered.
const std::vector<AgentWeight> kCapable = {
    {"Chrome OS", "Chrome", 12},    {"Linux", "Chrome", 3},         {"Linux", "Firefox", 1},
    {"Linux", "Other", 1},          {"MacOS X 10", "Chrome", 22},   {"MacOS X 10", "Firefox", 1},
    {"Windows 10", "Chrome", 208},  {"Windows 10", "Firefox", 20},  {"Windows 10", "Other", 1},
    {"Windows 8", "Chrome", 9},     {"Windows 8", "Firefox", 1},    {"Windows 7", "Chrome", 36},
    {"Windows 7", "Firefox", 1},
};

// ... and of those whose client failed to render.
const std::vector<AgentWeight> kIncapable = {
    {"Linux", "Chrome", 2}, {"MacOS X 10", "Chrome", 5}, {"Windows 10", "Chrome", 70},
    {"Windows 8", "Chrome", 60}, {"Windows 7", "Chrome", 9},
};

const AgentWeight& draw(const std::vector<AgentWeight>& cells, std::mt19937_64& rng) {
  std::vector<int> weights;
  for (const auto& c : cells) weights.push_back(c.count);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  return cells[pick(rng)];
}

}  // namespace

OnboardingResult onboarding_check(const CapabilityProfile& p) {
  if (!p.webgl_capable) return {false, "webgl"};
  if (!p.frame_rate_ok) return {false, "frame_rate"};
  return {true, ""};
}

protocol::WireEnvelope onboarding_event(const std::string& session_id, const std::string& participant_id,
                                        const CapabilityProfile& profile, std::int64_t ts_ms) {
  const auto result = onboarding_check(profile);
  nlohmann::json data{{"participant_id", participant_id},
                      {"os", profile.os},
                      {"browser", profile.browser},
                      {"webgl", profile.webgl_capable},
                      {"frame_rate_ok", profile.frame_rate_ok}};
  if (!result.passed) data["reason"] = result.reason;
  protocol::WireEnvelope e;
  e.session = session_id;
  e.ts_ms = ts_ms;
  e.payload = protocol::EventPayload{result.passed ? "onboarding_pass" : "onboarding_fail", std::move(data)};
  return e;
}

CapabilityProfile sample_profile(double pass_p, std::mt19937_64& rng) {
  const bool pass = std::bernoulli_distribution(pass_p)(rng);
  const auto& cell = draw(pass ? kCapable : kIncapable, rng);
  CapabilityProfile p{cell.os, cell.browser, true, true};
  if (!pass) {
    if (std::bernoulli_distribution(0.5)(rng)) {
      p.webgl_capable = false;
    } else {
      p.frame_rate_ok = false;
    }
  }
  return p;
}

}  // namespace exac::clientsim
