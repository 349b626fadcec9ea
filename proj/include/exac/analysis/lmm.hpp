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
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "exac/analysis/metrics.hpp"
#include "exac/error.hpp"

namespace exac::analysis {

class Degenerate : public Error {
 public:
  using Error::Error;
};

class NotConverged : public Error {
 public:
  using Error::Error;
};

struct ModelSpec {
  std::string response = "path_length_m";  // or "duration_s"
  std::string reference = "Control";
};

// Response y, fixed-effects design X (one row per observation) and the
// grouping of observations into participants (0-based, dense).
struct Design {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  std::vector<std::size_t> group;
  std::vector<std::string> terms;  // column names of X
  std::size_t group_count = 0;
};

// Treatment coding against spec.reference: intercept plus one indicator per
// other treatment, in name order.
Design build_design(std::span<const TrialMetrics> data, const ModelSpec& spec);

struct ProfilePoint {
  double lambda = 0;  // sigma_u2 / sigma_e2
  Eigen::VectorXd beta;
  Eigen::MatrixXd cov_unscaled;  // (X' H^-1 X)^-1 with H = I + lambda ZZ'
  double sigma_e2 = 0;
  double loglik_reml = 0;
  double score = 0;  // d loglik / d lambda
};

// Closed-form GLS solution at a fixed variance ratio.
ProfilePoint profile_at(const Design& design, double lambda);

struct FitOptions {
  double lambda_max = 1e6;
  double tolerance = 1e-8;
  int grid_per_decade = 4;
  double grid_min = 1e-8;
};

struct LmmFit {
  std::vector<std::string> terms;
  std::vector<double> beta;
  std::vector<double> se;
  double sigma_u2 = 0;
  double sigma_e2 = 0;
  double lambda = 0;
  double loglik_reml = 0;
  bool converged = false;
  std::size_t n_obs = 0;
  std::size_t n_groups = 0;
};

LmmFit fit_random_intercept(const Design& design, const FitOptions& options = {});
LmmFit fit_random_intercept(std::span<const TrialMetrics> data, const ModelSpec& spec,
                            const FitOptions& options = {});

struct WaldResult {
  std::string term;
  double estimate = 0;
  double se = 0;
  double z = 0;
  double p = 1;
};

double two_sided_normal_p(double z);

std::vector<WaldResult> wald_test(const LmmFit& fit);

nlohmann::json to_json(const LmmFit& fit);
nlohmann::json to_json(const WaldResult& w);

}  // namespace exac::analysis
