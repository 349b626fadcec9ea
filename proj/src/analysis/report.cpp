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

#include "exac/analysis/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "exac/util/csv.hpp"
#include "exac/util/fs.hpp"

namespace exac::analysis {

namespace {

std::vector<TreatmentSummary> summarize(std::span<const TrialMetrics> metrics, const ModelSpec& spec) {
  std::map<std::string, std::vector<double>> values;
  std::map<std::string, std::set<std::string>> participants;
  for (const auto& m : metrics) {
    values[m.treatment].push_back(spec.response == "duration_s" ? m.duration_s : m.path_length_m);
    participants[m.treatment].insert(m.participant_id);
  }
  std::vector<TreatmentSummary> out;
  for (const auto& [t, v] : values) {
    TreatmentSummary s{t, v.size(), participants[t].size()};
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    for (double x : v) s.sd += (x - s.mean) * (x - s.mean);
    s.sd = v.size() > 1 ? std::sqrt(s.sd / static_cast<double>(v.size() - 1)) : 0.0;
    const double half = 1.959963984540054 * s.sd / std::sqrt(static_cast<double>(v.size()));
    s.ci95_low = s.mean - half;
    s.ci95_high = s.mean + half;
    out.push_back(s);
  }
  return out;
}

std::string file_safe(const std::string& name) {
  std::string out = name;
  for (auto& c : out) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  return out.empty() ? "_" : out;
}

std::optional<bool> agreement(const std::vector<CohortResult>& cohorts, double alpha) {
  if (cohorts.size() < 2) return std::nullopt;
  std::set<std::string> terms;
  for (const auto& c : cohorts) {
    for (std::size_t j = 1; j < c.wald.size(); ++j) terms.insert(c.wald[j].term);
  }
  for (const auto& term : terms) {
    std::vector<const WaldResult*> per_cohort;
    for (const auto& c : cohorts) {
      auto it = std::find_if(c.wald.begin() + 1, c.wald.end(), [&](const WaldResult& w) { return w.term == term; });
      if (it == c.wald.end()) return false;
      per_cohort.push_back(&*it);
    }
    const bool significant = per_cohort[0]->p < alpha;
    for (const auto* w : per_cohort) {
      if ((w->p < alpha) != significant) return false;
      if (significant && std::signbit(w->estimate) != std::signbit(per_cohort[0]->estimate)) return false;
    }
  }
  return true;
}

}  // namespace

Report session_report(std::span<const CohortData> cohorts, const ModelSpec& spec, double alpha,
                      const FitOptions& options) {
  Report r;
  r.spec = spec;
  r.alpha = alpha;
  for (const auto& c : cohorts) {
    CohortResult res;
    res.name = c.name;
    res.n_obs = c.metrics.size();
    std::set<std::string> ids;
    for (const auto& m : c.metrics) ids.insert(m.participant_id);
    res.n_participants = ids.size();
    res.fit = fit_random_intercept(c.metrics, spec, options);
    res.wald = wald_test(res.fit);
    res.treatments = summarize(c.metrics, spec);
    r.cohorts.push_back(std::move(res));
  }
  r.agreement = agreement(r.cohorts, alpha);
  return r;
}

nlohmann::json to_json(const CohortResult& c, double alpha) {
  auto coefficients = nlohmann::json::array();
  for (const auto& w : c.wald) {
    auto j = to_json(w);
    j["significant"] = w.p < alpha;
    coefficients.push_back(j);
  }
  return {{"cohort", c.name},
          {"n_obs", c.n_obs},
          {"n_participants", c.n_participants},
          {"coefficients", coefficients},
          {"fit", to_json(c.fit)}};
}

nlohmann::json to_json(const Report& r) {
  auto cohorts = nlohmann::json::array();
  for (const auto& c : r.cohorts) cohorts.push_back(to_json(c, r.alpha));
  return {{"model", {{"response", r.spec.response}, {"reference", r.spec.reference}, {"random", "participant"}}},
          {"test", "wald_normal"},
          {"alpha", r.alpha},
          {"assumptions", {"cohort sizes count observations (trials), not participants"}},
          {"cohorts", cohorts},
          {"agreement", r.agreement ? nlohmann::json(*r.agreement) : nlohmann::json(nullptr)}};
}

nlohmann::json plot_data(const Report& r) {
  auto cohorts = nlohmann::json::array();
  for (const auto& c : r.cohorts) {
    auto treatments = nlohmann::json::array();
    for (const auto& t : c.treatments) {
      treatments.push_back({{"treatment", t.treatment},
                            {"n_obs", t.n_obs},
                            {"n_participants", t.n_participants},
                            {"mean", t.mean},
                            {"sd", t.sd},
                            {"ci95", {t.ci95_low, t.ci95_high}}});
    }
    cohorts.push_back({{"cohort", c.name}, {"n_obs", c.n_obs}, {"treatments", treatments}});
  }
  return {{"response", r.spec.response}, {"lower_is_better", true}, {"cohorts", cohorts}};
}

void write_report(const Report& report, std::span<const CohortData> cohorts, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::string csv(kMetricsCsvHeader);
  for (const auto& c : cohorts) {
    for (const auto& m : c.metrics) csv += metrics_csv_row(c.name, m);
  }
  util::write_file_atomic(out_dir / "metrics.csv", csv);
  for (const auto& c : report.cohorts) {
    util::write_file_atomic(out_dir / ("fit_" + file_safe(c.name) + ".json"), to_json(c, report.alpha).dump(2) + "\n");
  }
  util::write_file_atomic(out_dir / "report.json", to_json(report).dump(2) + "\n");
  util::write_file_atomic(out_dir / "plot_data.json", plot_data(report).dump(2) + "\n");
}

std::vector<CohortData> partition_by_cohort(std::vector<TrialMetrics> metrics, std::span<const CsvSource> events_csvs,
                                            const std::string& fallback) {
  std::map<std::string, std::string> cohort_of;
  for (const auto& src : events_csvs) {
    std::vector<util::CsvRow> rows;
    try {
      rows = util::parse_csv(src.text);
    } catch (const util::CsvParseError& e) {
      throw ParseError(src.name, e.line(), e.what());
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (row.fields.size() != 4) throw ParseError(src.name, row.line, "expected 4 fields");
      if (row.fields[2] != "consent_given") continue;
      const auto data = nlohmann::json::parse(row.fields[3], nullptr, false);
      if (data.is_discarded() || !data.is_object()) throw ParseError(src.name, row.line, "bad data_json");
      if (data.contains("participant_id") && data.contains("cohort") && data["cohort"].is_string()) {
        cohort_of[data["participant_id"].get<std::string>()] = data["cohort"].get<std::string>();
      }
    }
  }
  std::map<std::string, CohortData> by_name;
  for (auto& m : metrics) {
    auto it = cohort_of.find(m.participant_id);
    const auto& name = it == cohort_of.end() ? fallback : it->second;
    auto& c = by_name[name];
    c.name = name;
    c.metrics.push_back(std::move(m));
  }
  std::vector<CohortData> out;
  for (auto& [name, c] : by_name) out.push_back(std::move(c));
  return out;
}

std::vector<CsvSource> load_events_csvs(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().filename() == "events.csv") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<CsvSource> out;
  for (const auto& p : paths) out.push_back({p.string(), util::read_file(p)});
  return out;
}

}  // namespace exac::analysis
