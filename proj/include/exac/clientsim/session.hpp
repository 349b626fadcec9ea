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
#include <optional>
#include <string>
#include <vector>

#include "exac/clientsim/api.hpp"
#include "exac/clientsim/grid.hpp"
#include "exac/clientsim/profile.hpp"
#include "exac/manifest/manifest.hpp"

namespace exac::clientsim {

// Everything about one participant decided before contacting the service.
struct SessionPlan {
  std::uint64_t index = 0;
  std::uint64_t seed = 0;
  std::string session_id;
  std::string participant_id;
  std::string cohort;
  CapabilityProfile profile;
  std::optional<std::string> treatment;  // requested from the service when unset
  // Trials performed before leaving; trials_per_participant when the
  // participant completes.
  std::uint64_t trials_done = 0;
  bool completes = false;
  std::int64_t start_ts_ms = 0;
};

// Derives the plan of participant `index` from (seed, index) alone.
SessionPlan plan_session(const SimAgentConfig& config, const manifest::ExperimentManifest& manifest,
                         std::uint64_t seed, std::uint64_t index, const std::string& cohort = "c1");

struct SessionOutcome {
  std::string session_id;
  std::string participant_id;
  std::string treatment;
  bool passed_onboarding = false;
  bool completed = false;
  bool code_verified = false;
  std::vector<std::size_t> samples_per_trial;
  // Encoded trajectory per trial, kept only when recording.
  std::vector<std::string> payloads;
  std::uint64_t envelopes = 0;
  std::uint64_t retries = 0;
  std::vector<double> latencies_ms;
  double wall_s = 0;
  std::optional<std::string> error;
};

struct RunOptions {
  RetryPolicy retry;
  bool record_payloads = false;
};

// Onboarding, consent, trials (events plus the chunked trajectory), then
// the challenge, completion code and session_complete. Event timestamps
// follow a simulated clock starting at plan.start_ts_ms.
SessionOutcome run_session(const SimAgentConfig& config, const manifest::ExperimentManifest& manifest,
                           const SessionPlan& plan, ServiceApi& api, const RunOptions& options = {});

struct CohortReport {
  std::uint64_t sessions = 0;
  std::uint64_t passed_onboarding = 0;
  std::uint64_t completed = 0;
  std::uint64_t errors = 0;
  std::uint64_t envelopes = 0;
  std::uint64_t retries = 0;
  double elapsed_s = 0;
  double envelopes_per_s = 0;
  double p95_latency_ms = 0;
};

nlohmann::json to_json(const CohortReport& report);

struct CohortResult {
  std::vector<SessionOutcome> outcomes;  // index order
  CohortReport report;
};

// Plans and assigns treatments sequentially in index order, then runs the
// sessions on `parallelism` threads. Final service state does not depend
// on `parallelism`.
CohortResult run_cohort(std::uint64_t n, const SimAgentConfig& config, const manifest::ExperimentManifest& manifest,
                        const ApiFactory& api_factory, std::size_t parallelism, std::uint64_t seed,
                        const RunOptions& options = {}, const std::string& cohort = "c1");

}  // namespace exac::clientsim
