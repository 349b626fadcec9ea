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

#include "exac/management/funnel.hpp"

namespace exac::management {

namespace {

void count(FunnelCounts& c, const assembly::SessionSummary& s) {
  ++c.accessed;
  if (s.onboarding_passed.value_or(false)) ++c.capable;
  if (s.state == assembly::SessionState::Completed) ++c.completed;
}

nlohmann::json counts_json(const FunnelCounts& c) {
  return {{"accessed", c.accessed}, {"capable", c.capable}, {"completed", c.completed}};
}

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double FunnelStats::capable_rate() const { return ratio(total.capable, total.accessed); }
double FunnelStats::completion_rate() const { return ratio(total.completed, total.capable); }

FunnelStats compute_funnel(const std::vector<assembly::SessionSummary>& sessions) {
  FunnelStats out;
  for (const auto& s : sessions) {
    const auto os = s.os.empty() ? std::string("unknown") : s.os;
    const auto browser = s.browser.empty() ? std::string("unknown") : s.browser;
    count(out.total, s);
    count(out.cells[{os, browser}], s);
    count(out.by_os[os], s);
  }
  return out;
}

nlohmann::json to_json(const FunnelStats& f) {
  auto out = counts_json(f.total);
  out["capable_rate"] = f.capable_rate();
  out["completion_rate"] = f.completion_rate();
  auto cells = nlohmann::json::array();
  for (const auto& [key, c] : f.cells) {
    auto cell = counts_json(c);
    cell["os"] = key.first;
    cell["browser"] = key.second;
    cells.push_back(std::move(cell));
  }
  out["cells"] = std::move(cells);
  auto by_os = nlohmann::json::object();
  for (const auto& [os, c] : f.by_os) by_os[os] = counts_json(c);
  out["by_os"] = std::move(by_os);
  return out;
}

}  // namespace exac::management
