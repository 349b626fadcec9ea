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

#include "exac/analysis/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <tuple>

#include "exac/util/csv.hpp"
#include "exac/util/fs.hpp"

namespace exac::analysis {

namespace {

constexpr std::size_t kColumns = 10;

struct Accumulator {
  std::string participant_id;
  std::string treatment;
  std::uint64_t trial = 0;
  std::string file;
  std::size_t first_line = 0;
  std::vector<protocol::TrajectorySample> samples;
};

double field_double(const CsvSource& src, const util::CsvRow& row, std::size_t col, const char* name) {
  double v = 0;
  if (!protocol::parse_double(row.fields[col], v) || !std::isfinite(v)) {
    throw ParseError(src.name, row.line, std::string("bad ") + name + " '" + row.fields[col] + "'");
  }
  return v;
}

}  // namespace

TrialMetrics trial_metrics(std::string participant_id, std::string treatment, std::uint64_t trial,
                           std::span<const protocol::TrajectorySample> samples) {
  TrialMetrics m{std::move(participant_id), std::move(treatment), trial, 0, 0, samples.size()};
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const auto& a = samples[i - 1];
    const auto& b = samples[i];
    m.path_length_m += std::hypot(b.x - a.x, b.y - a.y, b.z - a.z);
  }
  if (!samples.empty()) m.duration_s = samples.back().t - samples.front().t;
  return m;
}

std::vector<TrialMetrics> compute_metrics(std::span<const CsvSource> sources) {
  std::map<std::pair<std::string, std::uint64_t>, Accumulator> trials;
  for (const auto& src : sources) {
    std::vector<util::CsvRow> rows;
    try {
      rows = util::parse_csv(src.text);
    } catch (const util::CsvParseError& e) {
      throw ParseError(src.name, e.line(), e.what());
    }
    if (rows.empty()) throw ParseError(src.name, 1, "missing header");
    std::string header;
    for (std::size_t i = 0; i < rows[0].fields.size(); ++i) header += (i ? "," : "") + rows[0].fields[i];
    if (header + "\n" != "session_id,participant_id,treatment,trial,t,x,y,z,yaw,pitch\n") {
      throw ParseError(src.name, rows[0].line, "unexpected header '" + header + "'");
    }

    // Trials seen in this source, to spot interleaving with other sources.
    std::map<std::pair<std::string, std::uint64_t>, bool> local;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (row.fields.size() != kColumns) {
        throw ParseError(src.name, row.line,
                         "expected " + std::to_string(kColumns) + " fields, got " + std::to_string(row.fields.size()));
      }
      const auto& pid = row.fields[1];
      if (pid.empty()) throw ParseError(src.name, row.line, "empty participant_id");
      std::uint64_t trial = 0;
      const auto& tf = row.fields[3];
      const auto [ptr, ec] = std::from_chars(tf.data(), tf.data() + tf.size(), trial);
      if (ec != std::errc() || ptr != tf.data() + tf.size()) {
        throw ParseError(src.name, row.line, "bad trial '" + tf + "'");
      }
      protocol::TrajectorySample s{field_double(src, row, 4, "t"),   field_double(src, row, 5, "x"),
                                   field_double(src, row, 6, "y"),   field_double(src, row, 7, "z"),
                                   field_double(src, row, 8, "yaw"), field_double(src, row, 9, "pitch")};

      const auto key = std::make_pair(pid, trial);
      auto [it, inserted] = trials.try_emplace(key);
      auto& acc = it->second;
      if (inserted) {
        acc.participant_id = pid;
        acc.treatment = row.fields[2];
        acc.trial = trial;
        acc.file = src.name;
        acc.first_line = row.line;
        local[key] = true;
      } else if (!local.count(key)) {
        throw ParseError(src.name, row.line,
                         "participant " + pid + " trial " + tf + " already read from " + acc.file);
      } else if (acc.treatment != row.fields[2]) {
        throw ParseError(src.name, row.line, "treatment changes within participant " + pid);
      }
      if (!acc.samples.empty() && s.t < acc.samples.back().t) {
        throw ParseError(src.name, row.line, "t decreases");
      }
      acc.samples.push_back(s);
    }
  }

  // A participant is under one treatment across all of their trials.
  std::map<std::string, const Accumulator*> treatment_of;
  std::vector<TrialMetrics> out;
  out.reserve(trials.size());
  for (const auto& [key, acc] : trials) {
    auto [it, inserted] = treatment_of.try_emplace(acc.participant_id, &acc);
    if (!inserted && it->second->treatment != acc.treatment) {
      throw ParseError(acc.file, acc.first_line,
                       "participant " + acc.participant_id + " appears under " + it->second->treatment + " and " +
                           acc.treatment);
    }
    out.push_back(trial_metrics(acc.participant_id, acc.treatment, acc.trial, acc.samples));
  }
  return out;
}

std::vector<CsvSource> load_trial_csvs(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (name.rfind("trial_", 0) == 0 && entry.path().extension() == ".csv") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<CsvSource> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back({p.string(), util::read_file(p)});
  return out;
}

std::string metrics_csv_row(const std::string& cohort, const TrialMetrics& m) {
  std::string out = util::csv_field(cohort) + "," + util::csv_field(m.participant_id) + "," +
                    util::csv_field(m.treatment) + "," + std::to_string(m.trial) + ",";
  protocol::append_fixed6(out, m.path_length_m);
  out += ",";
  protocol::append_fixed6(out, m.duration_s);
  out += "," + std::to_string(m.sample_count) + "\n";
  return out;
}

}  // namespace exac::analysis
