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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "exac/analysis/metrics.hpp"
#include "exac/clientsim/grid.hpp"
#include "exac/util/clock.hpp"

namespace exac::testing {

// A cohort of `n_obs` trials: participants rotate Control, A, B and each
// contributes six trials, the last one possibly fewer.
inline std::vector<analysis::TrialMetrics> synthetic_cohort(const clientsim::SimAgentConfig& cfg, std::size_t n_obs,
                                                            std::uint64_t seed) {
  static constexpr std::array<const char*, 3> kTreatments = {"Control", "A", "B"};
  std::vector<analysis::TrialMetrics> out;
  for (std::uint64_t p = 0; out.size() < n_obs; ++p) {
    const std::string treatment = kTreatments[p % 3];
    const std::string pid = "P" + std::to_string(p);
    for (std::uint64_t k = 1; k <= 6 && out.size() < n_obs; ++k) {
      std::mt19937_64 rng(util::mix_seed(seed, p * 8 + k));
      const auto samples = clientsim::simulate_trajectory(cfg, treatment, k, rng);
      out.push_back(analysis::trial_metrics(pid, treatment, k, samples));
    }
  }
  return out;
}

}  // namespace exac::testing
