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

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exac/analysis/lmm.hpp"
#include "exac/analysis/metrics.hpp"

namespace exac::analysis {

struct CohortData {
  std::string name;
  std::vector<TrialMetrics> metrics;
};

struct TreatmentSummary {
  std::string treatment;
  std::size_t n_obs = 0;
  std::size_t n_participants = 0;
  double mean = 0;
  double sd = 0;
  double ci95_low = 0;
  double ci95_high = 0;
};

struct CohortResult {
  std::string name;
  std::size_t n_obs = 0;
  std::size_t n_participants = 0;
  LmmFit fit;
  std::vector<WaldResult> wald;
  std::vector<TreatmentSummary> treatments;
};

struct Report {
  ModelSpec spec;
  double alpha = 0.05;
  std::vector<CohortResult> cohorts;
  // Null with fewer than two cohorts.
  std::optional<bool> agreement;
};

// Fits every cohort independently. Agreement holds when each non-reference
// coefficient has the same significance in every cohort and, where it is
// significant everywhere, the same sign.
Report session_report(std::span<const CohortData> cohorts, const ModelSpec& spec = {}, double alpha = 0.05,
                      const FitOptions& options = {});

nlohmann::json to_json(const CohortResult& c, double alpha);
nlohmann::json to_json(const Report& r);
nlohmann::json plot_data(const Report& r);

// Writes metrics.csv, fit_{cohort}.json, report.json and plot_data.json.
void write_report(const Report& report, std::span<const CohortData> cohorts, const std::filesystem::path& out_dir);

// Splits metrics by the cohort tag in each participant's consent_given
// event. Untagged participants land in `fallback`. Cohorts come out in name
// order.
std::vector<CohortData> partition_by_cohort(std::vector<TrialMetrics> metrics, std::span<const CsvSource> events_csvs,
                                            const std::string& fallback = "all");

// Every events.csv below `root`, in path order.
std::vector<CsvSource> load_events_csvs(const std::filesystem::path& root);

}  // namespace exac::analysis
