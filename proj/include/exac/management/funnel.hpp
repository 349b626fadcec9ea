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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exac/assembly/service.hpp"

namespace exac::management {

struct FunnelCounts {
  std::uint64_t accessed = 0;
  std::uint64_t capable = 0;
  std::uint64_t completed = 0;
};

struct FunnelStats {
  FunnelCounts total;
  // Keyed by (os, browser); empty labels become "unknown".
  std::map<std::pair<std::string, std::string>, FunnelCounts> cells;
  std::map<std::string, FunnelCounts> by_os;

  double capable_rate() const;     // capable / accessed
  double completion_rate() const;  // completed / capable
};

// accessed: every session; capable: onboarding passed; completed: state
// Completed.
FunnelStats compute_funnel(const std::vector<assembly::SessionSummary>& sessions);

nlohmann::json to_json(const FunnelStats& stats);

}  // namespace exac::management
