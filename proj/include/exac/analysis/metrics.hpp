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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "exac/error.hpp"
#include "exac/protocol/trajectory.hpp"

namespace exac::analysis {

class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), file_(std::move(file)), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

struct TrialMetrics {
  std::string participant_id;
  std::string treatment;
  std::uint64_t trial = 0;
  double path_length_m = 0;
  double duration_s = 0;
  std::size_t sample_count = 0;

  friend bool operator==(const TrialMetrics&, const TrialMetrics&) = default;
};

struct CsvSource {
  std::string name;  // reported in ParseError
  std::string text;
};

TrialMetrics trial_metrics(std::string participant_id, std::string treatment, std::uint64_t trial,
                           std::span<const protocol::TrajectorySample> samples);

// One row per (participant, trial), sorted by participant then trial. A
// source may hold several trials; the same (participant, trial) appearing
// twice is an error.
std::vector<TrialMetrics> compute_metrics(std::span<const CsvSource> sources);

// Every trial_*.csv below `root`, in path order.
std::vector<CsvSource> load_trial_csvs(const std::filesystem::path& root);

inline constexpr std::string_view kMetricsCsvHeader =
    "cohort,participant_id,treatment,trial,path_length_m,duration_s,sample_count\n";

std::string metrics_csv_row(const std::string& cohort, const TrialMetrics& m);

}  // namespace exac::analysis
