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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "exac/analysis/report.hpp"
#include "exac/assembly/service.hpp"
#include "exac/assembly/storage.hpp"
#include "exac/protocol/trajectory.hpp"
#include "exac/util/fs.hpp"
#include "support/cohorts.hpp"
#include "support/envelopes.hpp"
#include "support/lmm_oracles.hpp"
#include "support/temp_dir.hpp"

using namespace exac;
using namespace exac::analysis;
using namespace exac::testing;

namespace {

// REML log-likelihood from the full covariance matrix.
double dense_reml(const Design& d, double sigma_u2, double sigma_e2) {
  const auto n = d.y.size();
  const auto p = d.X.cols();
  Eigen::MatrixXd V = sigma_e2 * Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) {
      if (d.group[a] == d.group[b]) V(a, b) += sigma_u2;
    }
  }
  const Eigen::LLT<Eigen::MatrixXd> v(V);
  const Eigen::MatrixXd vx = v.solve(d.X);
  const Eigen::MatrixXd xvx = d.X.transpose() * vx;
  const Eigen::VectorXd beta = xvx.ldlt().solve(vx.transpose() * d.y);
  const Eigen::VectorXd r = d.y - d.X * beta;
  const double logdet_v = 2 * v.matrixLLT().diagonal().array().log().sum();
  const double logdet_xvx = std::log(xvx.determinant());
  return -0.5 * (logdet_v + logdet_xvx + r.dot(v.solve(r)) + static_cast<double>(n - p) * std::log(2 * M_PI));
}

double term(const LmmFit& f, const std::string& name, const std::vector<double>& v) {
  for (std::size_t j = 0; j < f.terms.size(); ++j) {
    if (f.terms[j] == name) return v[j];
  }
  FAIL("no term " << name);
  return 0;
}

std::string trial_csv(const std::string& pid, const std::string& treatment, std::uint64_t trial,
                      const std::vector<protocol::TrajectorySample>& s) {
  std::string out = "session_id,participant_id,treatment,trial,t,x,y,z,yaw,pitch\n";
  for (const auto& x : s) {
    out += "s1," + pid + "," + treatment + "," + std::to_string(trial) + ",";
    for (double v : {x.t, x.x, x.y, x.z, x.yaw, x.pitch}) {
      protocol::append_fixed6(out, v);
      out += ",";
    }
    out.back() = '\n';
  }
  return out;
}

}  // namespace

TEST_CASE("metrics of degenerate and straight trajectories") {
  const std::vector<protocol::TrajectorySample> one{{0.5, 1, 1.6, 1, 0, 0}};
  const auto m = trial_metrics("p", "Control", 1, one);
  CHECK(m.path_length_m == 0);
  CHECK(m.duration_s == 0);
  CHECK(m.sample_count == 1);

  // Three cells along x, sampled every 1 mm.
  std::vector<protocol::TrajectorySample> dense;
  for (int i = 0; i <= 2000; ++i) dense.push_back({i * 0.001, 1 + i * 0.001, 1.6, 3, 90, 0});
  const CsvSource src{"walk.csv", trial_csv("p", "Control", 1, dense)};
  const auto metrics = compute_metrics(std::span(&src, 1));
  REQUIRE(metrics.size() == 1);
  CHECK(metrics[0].path_length_m == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(metrics[0].duration_s == doctest::Approx(2.0));
  CHECK(metrics[0].sample_count == 2001);
}

TEST_CASE("path length is at least the straight-line distance") {
  clientsim::SimAgentConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const auto s = clientsim::simulate_trajectory(cfg, "Control", 1 + seed % 6, rng);
    const auto m = trial_metrics("p", "Control", 1, s);
    CHECK(m.path_length_m >= std::hypot(s.back().x - s.front().x, s.back().z - s.front().z) - 1e-12);
    CHECK(m.duration_s >= 0);
  }
}

TEST_CASE("parse errors name file and line") {
  const std::string header = "session_id,participant_id,treatment,trial,t,x,y,z,yaw,pitch\n";
  auto expect = [](const std::string& text, std::size_t line) {
    const CsvSource src{"bad.csv", text};
    try {
      compute_metrics(std::span(&src, 1));
      FAIL("no error");
    } catch (const ParseError& e) {
      CHECK(e.file() == "bad.csv");
      CHECK(e.line() == line);
    }
  };
  expect("", 1);
  expect("a,b\n", 1);
  expect(header + "s,p,C,1,0,0,0,0,0,0\ns,p,C,1,0.1,zz,0,0,0,0\n", 3);
  expect(header + "s,p,C,1,0,0,0,0,0\n", 2);
  expect(header + "s,p,C,x,0,0,0,0,0,0\n", 2);
  expect(header + "s,p,C,1,1,0,0,0,0,0\ns,p,C,1,0.5,0,0,0,0,0\n", 3);
  expect(header + "s,p,C,1,0,0,0,0,0,0\ns,p,B,1,1,0,0,0,0,0\n", 3);
  expect(header + "s,p,C,1,nan,0,0,0,0,0\n", 2);

  const std::vector<CsvSource> twice{{"a.csv", header + "s,p,C,1,0,0,0,0,0,0\n"},
                                     {"b.csv", header + "s,q,C,2,0,0,0,0,0,0\ns,p,C,1,0,0,0,0,0,0\n"}};
  try {
    compute_metrics(twice);
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(e.file() == "b.csv");
    CHECK(e.line() == 3);
  }
  const std::vector<CsvSource> switched{{"a.csv", header + "s,p,C,1,0,0,0,0,0,0\n"},
                                        {"b.csv", header + "s,p,B,2,0,0,0,0,0,0\n"}};
  CHECK_THROWS_AS(compute_metrics(switched), ParseError);
}

TEST_CASE("metrics from a re-exported session are identical") {
  auto storage = std::make_shared<assembly::InMemoryStorage>();
  assembly::AssemblyService service(storage);
  service.ingest(testing::event("s1", "consent_given", {{"participant_id", "W1"}, {"treatment", "B"}}));
  clientsim::SimAgentConfig cfg;
  for (std::uint64_t k = 1; k <= 3; ++k) {
    std::mt19937_64 rng(k);
    const auto payload = protocol::encode_trajectory(clientsim::simulate_trajectory(cfg, "B", k, rng));
    for (const auto& e : testing::stream_envelopes("s1", k, payload, 4300)) service.ingest(e);
  }
  auto export_all = [&] {
    std::vector<CsvSource> out;
    for (std::uint64_t k = 1; k <= 3; ++k) out.push_back({"t" + std::to_string(k), service.export_trial_csv("s1", k)});
    return compute_metrics(out);
  };
  const auto first = export_all();
  REQUIRE(first.size() == 3);
  CHECK(first[0].participant_id == "W1");
  CHECK(first[0].treatment == "B");
  CHECK(export_all() == first);
}

TEST_CASE("profile formulas match the dense REML likelihood") {
  const auto data = gaussian_data({{"Control", 4, 3}, {"A", 3, 5}, {"B", 5, 2}}, {{"B", -3}}, 1.5, 2.0, 4);
  const auto d = build_design(data, ModelSpec{});
  CHECK(d.terms == std::vector<std::string>{"intercept", "A", "B"});
  for (double lambda : {0.0, 0.05, 0.7, 3.0, 40.0}) {
    const auto pt = profile_at(d, lambda);
    CHECK(pt.loglik_reml == doctest::Approx(dense_reml(d, lambda * pt.sigma_e2, pt.sigma_e2)).epsilon(1e-10));
    const double h = 1e-5 * std::max(1.0, lambda);
    auto ll = [&](double l) { return profile_at(d, l).loglik_reml; };
    const double fd = lambda == 0 ? (-3 * ll(0) + 4 * ll(h) - ll(2 * h)) / (2 * h)
                                  : (ll(lambda + h) - ll(lambda - h)) / (2 * h);
    CHECK(pt.score == doctest::Approx(fd).epsilon(1e-5));
  }

  // The profiled optimum is a maximum over both variance components.
  const auto fit = fit_random_intercept(d);
  REQUIRE(fit.sigma_u2 > 0);
  const double best = dense_reml(d, fit.sigma_u2, fit.sigma_e2);
  CHECK(best == doctest::Approx(fit.loglik_reml).epsilon(1e-10));
  for (double du : {-1e-3, 0.0, 1e-3}) {
    for (double de : {-1e-3, 0.0, 1e-3}) {
      CHECK(dense_reml(d, fit.sigma_u2 * (1 + du), fit.sigma_e2 * (1 + de)) <= best + 1e-12);
    }
  }
}

TEST_CASE("balanced designs match the ANOVA method-of-moments oracle") {
  for (std::size_t m : {3, 5, 10}) {
    for (std::size_t k : {2, 6}) {
      CAPTURE(m);
      CAPTURE(k);
      int fitted = 0;
      for (std::uint64_t seed = 0; fitted < 5; ++seed) {
        const auto data =
            gaussian_data({{"Control", m, k}, {"A", m, k}, {"B", m, k}}, {{"A", 1}, {"B", -4}}, 2.0, 1.0, seed);
        const auto oracle = anova_oracle(data);
        const auto fit = fit_random_intercept(data, ModelSpec{});
        if (oracle.sigma_u2 <= 0) {
          CHECK(fit.sigma_u2 == 0);
          continue;
        }
        ++fitted;
        CHECK(fit.sigma_e2 == doctest::Approx(oracle.sigma_e2).epsilon(1e-6));
        CHECK(fit.sigma_u2 == doctest::Approx(oracle.sigma_u2).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("negative moment estimate gives the zero boundary") {
  int boundary = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto data = gaussian_data({{"Control", 5, 2}, {"B", 5, 2}}, {}, 0.0, 1.0, seed);
    const auto oracle = anova_oracle(data);
    const auto fit = fit_random_intercept(data, ModelSpec{});
    if (oracle.sigma_u2 < 0) {
      ++boundary;
      CHECK(fit.sigma_u2 == 0);
      CHECK(fit.lambda == 0);
      CHECK(fit.converged);
      CHECK(fit.sigma_e2 > 0);
    }
  }
  CHECK(boundary > 5);
}

TEST_CASE("zero variance ratio is ordinary least squares") {
  const auto data = gaussian_data({{"Control", 4, 3}, {"A", 2, 6}, {"B", 7, 1}}, {{"A", 2}}, 1.0, 1.0, 9);
  const auto oracle = ols_oracle(data, "Control");
  const auto d = build_design(data, ModelSpec{});
  const auto pt = profile_at(d, 0.0);
  for (std::size_t j = 0; j < d.terms.size(); ++j) {
    CHECK(std::abs(pt.beta[static_cast<Eigen::Index>(j)] - oracle.at(d.terms[j])) < 1e-10);
  }
}

TEST_CASE("noiseless data fits treatment means exactly") {
  std::vector<TrialMetrics> data;
  const std::map<std::string, double> means{{"Control", 20}, {"A", 23}, {"B", 15.5}};
  int pid = 0;
  for (const auto& [t, mu] : means) {
    for (int i = 0; i < 3; ++i, ++pid) {
      for (std::uint64_t k = 1; k <= 4; ++k) data.push_back({"p" + std::to_string(pid), t, k, mu, 1, 10});
    }
  }
  const auto fit = fit_random_intercept(data, ModelSpec{});
  CHECK(fit.converged);
  CHECK(fit.sigma_u2 == 0);
  CHECK(fit.sigma_e2 == 0);
  CHECK(term(fit, "intercept", fit.beta) == doctest::Approx(20));
  CHECK(term(fit, "A", fit.beta) == doctest::Approx(3));
  CHECK(term(fit, "B", fit.beta) == doctest::Approx(-4.5));
  const auto wald = wald_test(fit);
  CHECK(wald[2].p == 0);
}

TEST_CASE("scale equivariance") {
  const auto data = gaussian_data({{"Control", 6, 4}, {"A", 6, 4}, {"B", 5, 5}}, {{"B", -2}}, 1.5, 2.0, 17);
  const auto base = fit_random_intercept(data, ModelSpec{});
  const auto base_wald = wald_test(base);
  REQUIRE(base.sigma_u2 > 0);
  for (double c : {0.01, 7.3, 1000.0}) {
    auto scaled = data;
    for (auto& m : scaled) m.path_length_m *= c;
    const auto fit = fit_random_intercept(scaled, ModelSpec{});
    const auto wald = wald_test(fit);
    for (std::size_t j = 0; j < fit.beta.size(); ++j) {
      CHECK(fit.beta[j] == doctest::Approx(c * base.beta[j]).epsilon(1e-8));
      CHECK(std::abs(wald[j].z - base_wald[j].z) < 1e-8);
    }
    CHECK(std::sqrt(fit.sigma_e2) == doctest::Approx(c * std::sqrt(base.sigma_e2)).epsilon(1e-8));
    CHECK(std::sqrt(fit.sigma_u2) == doctest::Approx(c * std::sqrt(base.sigma_u2)).epsilon(1e-8));
  }
}

TEST_CASE("optimum is insensitive to the bracket and the likelihood is unimodal") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto data = gaussian_data({{"Control", 5, 6}, {"A", 5, 6}, {"B", 5, 6}}, {{"B", -3}}, 1.0, 2.0, seed);
    const auto d = build_design(data, ModelSpec{});
    const auto ref = fit_random_intercept(d);
    if (ref.lambda == 0) continue;
    for (const FitOptions& o : {FitOptions{1e5, 1e-8, 4, 1e-8}, FitOptions{1e6, 1e-8, 3, 1e-6},
                                FitOptions{3e4, 1e-8, 7, 1e-7}}) {
      CHECK(std::abs(fit_random_intercept(d, o).lambda - ref.lambda) < 1e-4 * ref.lambda);
    }
    // Log-likelihood rises to the optimum and falls after it.
    double prev = profile_at(d, 0).loglik_reml;
    bool falling = false;
    for (double l = 1e-4; l < 1e4; l *= 1.2) {
      const double cur = profile_at(d, l).loglik_reml;
      if (cur < prev - 1e-12) falling = true;
      if (falling) CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
  }
}

TEST_CASE("Monte-Carlo calibration") {
  // Control, A and B with 50 participants x 6 trials each; beta_B = -5,
  // sigma_u = 2, sigma_e = 3.
  const double true_se = std::sqrt(2 * (4.0 + 9.0 / 6) / 50);
  int covered = 0, within_band = 0, sigmas_ok = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto data =
        gaussian_data({{"Control", 50, 6}, {"A", 50, 6}, {"B", 50, 6}}, {{"B", -5}}, 2.0, 3.0, 1000 + seed);
    const auto fit = fit_random_intercept(data, ModelSpec{});
    const double err = std::abs(term(fit, "B", fit.beta) + 5);
    covered += err <= 2 * term(fit, "B", fit.se);
    within_band += err <= 0.8;
    sigmas_ok += std::abs(std::sqrt(fit.sigma_u2) - 2) <= 0.25 * 2 && std::abs(std::sqrt(fit.sigma_e2) - 3) <= 0.25 * 3;
    CHECK(term(fit, "B", fit.se) == doctest::Approx(true_se).epsilon(0.1));
  }
  MESSAGE("2se coverage " << covered << ", +-0.8 band " << within_band << ", sigmas " << sigmas_ok << " of 200");
  CHECK(covered >= 190);
  CHECK(sigmas_ok >= 190);
  // A fixed +-0.8 band holds with probability 2*Phi(0.8/se) - 1; the count
  // must sit inside its 99% binomial interval.
  const double p_band = 1 - two_sided_normal_p(0.8 / true_se);
  const double sd = std::sqrt(200 * p_band * (1 - p_band));
  CHECK(std::abs(within_band - 200 * p_band) <= 2.576 * sd);
}

TEST_CASE("design errors") {
  auto data = gaussian_data({{"Control", 3, 2}, {"B", 1, 2}}, {}, 1, 1, 1);
  CHECK_THROWS_AS(fit_random_intercept(data, ModelSpec{}), Degenerate);
  data = gaussian_data({{"A", 3, 2}, {"B", 3, 2}}, {}, 1, 1, 1);
  CHECK_THROWS_AS(fit_random_intercept(data, ModelSpec{}), InvariantError);
  data = gaussian_data({{"Control", 3, 2}, {"B", 3, 2}}, {}, 1, 1, 1);
  data[0].treatment = "B";
  CHECK_THROWS_AS(fit_random_intercept(data, ModelSpec{}), InvariantError);
  CHECK_THROWS_AS(fit_random_intercept(data, ModelSpec{"speed"}), InvariantError);

  // No within-participant noise: the ratio runs off the bracket.
  data = gaussian_data({{"Control", 4, 3}, {"B", 4, 3}}, {}, 2.0, 0.0, 3);
  CHECK_THROWS_AS(fit_random_intercept(data, ModelSpec{}), NotConverged);
}

TEST_CASE("Wald test") {
  CHECK(two_sided_normal_p(0) == 1.0);
  CHECK(two_sided_normal_p(1.96) == doctest::Approx(0.05).epsilon(0.0005 / 0.05));
  CHECK(std::abs(two_sided_normal_p(1.96) - 0.05) <= 0.0005);
  CHECK(two_sided_normal_p(-2.5758293035489) == doctest::Approx(0.01).epsilon(1e-9));
  LmmFit fit;
  fit.terms = {"intercept", "B"};
  fit.beta = {10, 0};
  fit.se = {1, 0.5};
  fit.converged = true;
  const auto w = wald_test(fit);
  CHECK(w[1].p == 1.0);
  CHECK(w[0].z == 10);
  fit.converged = false;
  CHECK_THROWS_AS(wald_test(fit), InvariantError);
}

TEST_CASE("session report agreement") {
  const auto one = gaussian_data({{"Control", 10, 6}, {"A", 10, 6}, {"B", 10, 6}}, {{"B", -5}}, 1, 2, 1);
  const auto two = gaussian_data({{"Control", 15, 6}, {"A", 15, 6}, {"B", 15, 6}}, {{"B", -5}}, 1, 2, 2);
  const auto flat = gaussian_data({{"Control", 15, 6}, {"A", 15, 6}, {"B", 15, 6}}, {}, 1, 2, 3);
  const auto flipped = gaussian_data({{"Control", 15, 6}, {"A", 15, 6}, {"B", 15, 6}}, {{"B", 5}}, 1, 2, 4);

  const std::vector<CohortData> same{{"x", one}, {"y", one}};
  CHECK(session_report(same).agreement == true);
  const std::vector<CohortData> pair{{"s1", one}, {"s2", two}};
  const auto report = session_report(pair);
  REQUIRE(report.agreement.has_value());
  bool expected = true;
  for (std::size_t j = 1; j < 3; ++j) {
    const auto& a = report.cohorts[0].wald[j];
    const auto& b = report.cohorts[1].wald[j];
    if ((a.p < 0.05) != (b.p < 0.05)) expected = false;
    if (a.p < 0.05 && b.p < 0.05 && (a.estimate < 0) != (b.estimate < 0)) expected = false;
  }
  CHECK(*report.agreement == expected);
  const std::vector<CohortData> disabled{{"s1", one}, {"s2", flat}};
  CHECK(session_report(disabled).agreement == false);
  const std::vector<CohortData> opposite{{"s1", one}, {"s2", flipped}};
  CHECK(session_report(opposite).agreement == false);
  const std::vector<CohortData> single{{"s1", one}};
  CHECK_FALSE(session_report(single).agreement.has_value());
}

TEST_CASE("report files") {
  testing::TempDir dir;
  const auto one = gaussian_data({{"Control", 4, 6}, {"A", 4, 6}, {"B", 4, 6}}, {{"B", -5}}, 1, 2, 1);
  const std::vector<CohortData> cohorts{{"session 1", one}, {"s2", one}};
  const auto report = session_report(cohorts);
  write_report(report, cohorts, dir.path() / "out");
  const auto metrics = util::read_file(dir.path() / "out" / "metrics.csv");
  CHECK(metrics.rfind(std::string(kMetricsCsvHeader), 0) == 0);
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 1 + 2 * 72);
  const auto fit = nlohmann::json::parse(util::read_file(dir.path() / "out" / "fit_session_1.json"));
  CHECK(fit["coefficients"].size() == 3);
  const auto r = nlohmann::json::parse(util::read_file(dir.path() / "out" / "report.json"));
  CHECK(r["agreement"] == true);
  CHECK(r["cohorts"].size() == 2);
  CHECK(r["assumptions"][0].get<std::string>().find("observations") != std::string::npos);
  const auto plot = nlohmann::json::parse(util::read_file(dir.path() / "out" / "plot_data.json"));
  CHECK(plot["cohorts"][0]["treatments"].size() == 3);
}

TEST_CASE("cohort partition from consent events") {
  const std::vector<TrialMetrics> metrics{{"W1", "A", 1, 3, 1, 2}, {"W2", "B", 1, 3, 1, 2}, {"W3", "B", 1, 3, 1, 2}};
  const std::vector<CsvSource> events{
      {"e1", "session_id,ts_ms,name,data_json\ns1,5,consent_given,\"{\"\"participant_id\"\":\"\"W1\"\",\"\"cohort\"\":\"\"c2\"\"}\"\n"},
      {"e2", "session_id,ts_ms,name,data_json\ns2,5,consent_given,\"{\"\"participant_id\"\":\"\"W2\"\",\"\"cohort\"\":\"\"c1\"\"}\"\n"}};
  const auto parts = partition_by_cohort(metrics, events);
  REQUIRE(parts.size() == 3);
  CHECK(parts[0].name == "all");
  CHECK(parts[1].name == "c1");
  CHECK(parts[2].metrics[0].participant_id == "W1");
  const std::vector<CsvSource> bad{{"e3", "session_id,ts_ms,name,data_json\ns1,5,consent_given,{oops\n"}};
  CHECK_THROWS_AS(partition_by_cohort(metrics, bad), ParseError);
}

TEST_CASE("built-in treatment B effect is detected on synthetic cohorts") {
  clientsim::SimAgentConfig cfg;
  const auto cohort = testing::synthetic_cohort(cfg, 495, 5);
  CHECK(cohort.size() == 495);
  std::set<std::string> ids;
  for (const auto& m : cohort) ids.insert(m.participant_id);
  CHECK(ids.size() == 83);
  const auto fit = fit_random_intercept(cohort, ModelSpec{});
  const auto w = wald_test(fit);
  CHECK(term(fit, "B", fit.beta) < 0);
  CHECK(w[2].p < 0.05);

  auto no_effect = cfg;
  no_effect.treatment_bias["B"] = no_effect.treatment_bias["Control"];
  const std::vector<CohortData> cohorts{{"s1", cohort}, {"s2", testing::synthetic_cohort(no_effect, 495, 6)}};
  CHECK(session_report(cohorts).agreement == false);
}
