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

#include "exac/analysis/lmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>

namespace exac::analysis {

namespace {

constexpr double kInvPhi = 0.6180339887498949;

double response_of(const TrialMetrics& m, const std::string& response) {
  if (response == "path_length_m") return m.path_length_m;
  if (response == "duration_s") return m.duration_s;
  throw InvariantError("unknown response '" + response + "'");
}

// Per-participant sums reused across every evaluation of the profile.
struct Groups {
  std::vector<double> n;
  std::vector<Eigen::VectorXd> col_sums;  // X_i' 1
};

Groups group_sums(const Design& d) {
  Groups g;
  g.n.assign(d.group_count, 0.0);
  g.col_sums.assign(d.group_count, Eigen::VectorXd::Zero(d.X.cols()));
  for (Eigen::Index r = 0; r < d.X.rows(); ++r) {
    g.n[d.group[r]] += 1;
    g.col_sums[d.group[r]] += d.X.row(r).transpose();
  }
  return g;
}

ProfilePoint evaluate(const Design& d, const Groups& g, double lambda) {
  const auto p = d.X.cols();
  const double dof = static_cast<double>(d.X.rows() - p);
  std::vector<double> shrink(d.group_count), dshrink(d.group_count);
  Eigen::MatrixXd A = d.X.transpose() * d.X;
  Eigen::VectorXd b = d.X.transpose() * d.y;
  std::vector<double> y_sums(d.group_count, 0.0);
  for (Eigen::Index r = 0; r < d.y.size(); ++r) y_sums[d.group[r]] += d.y[r];
  double logdet_h = 0;
  double trace_term = 0;
  for (std::size_t i = 0; i < d.group_count; ++i) {
    const double denom = 1 + lambda * g.n[i];
    shrink[i] = lambda / denom;
    dshrink[i] = 1 / (denom * denom);
    A.noalias() -= shrink[i] * g.col_sums[i] * g.col_sums[i].transpose();
    b.noalias() -= shrink[i] * y_sums[i] * g.col_sums[i];
    logdet_h += std::log1p(lambda * g.n[i]);
    trace_term += g.n[i] / denom;
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) throw Degenerate("fixed-effects design is rank deficient");

  ProfilePoint pt;
  pt.lambda = lambda;
  pt.beta = ldlt.solve(b);
  pt.cov_unscaled = ldlt.solve(Eigen::MatrixXd::Identity(p, p));

  const Eigen::VectorXd resid = d.y - d.X * pt.beta;
  std::vector<double> r_sums(d.group_count, 0.0);
  for (Eigen::Index r = 0; r < resid.size(); ++r) r_sums[d.group[r]] += resid[r];
  double q = resid.squaredNorm();
  double dq = 0;
  Eigen::MatrixXd dA = Eigen::MatrixXd::Zero(p, p);
  for (std::size_t i = 0; i < d.group_count; ++i) {
    q -= shrink[i] * r_sums[i] * r_sums[i];
    dq -= dshrink[i] * r_sums[i] * r_sums[i];
    dA.noalias() -= dshrink[i] * g.col_sums[i] * g.col_sums[i].transpose();
  }
  q = std::max(q, 0.0);
  pt.sigma_e2 = q / dof;
  const double logdet_a = ldlt.vectorD().array().log().sum();
  pt.loglik_reml = -0.5 * (dof * (1 + std::log(2 * std::numbers::pi * pt.sigma_e2)) + logdet_h + logdet_a);
  pt.score = -0.5 * (dof * dq / q + trace_term + (pt.cov_unscaled * dA).trace());
  return pt;
}

std::vector<double> lambda_grid(const FitOptions& o) {
  std::vector<double> grid{0.0};
  const double lo = std::log10(o.grid_min);
  const double hi = std::log10(o.lambda_max);
  const int steps = static_cast<int>(std::ceil((hi - lo) * o.grid_per_decade));
  for (int j = 0; j <= steps; ++j) grid.push_back(std::pow(10.0, lo + (hi - lo) * j / steps));
  grid.back() = o.lambda_max;
  return grid;
}

LmmFit make_fit(const Design& d, const ProfilePoint& pt) {
  LmmFit fit;
  fit.terms = d.terms;
  fit.beta.assign(pt.beta.data(), pt.beta.data() + pt.beta.size());
  for (Eigen::Index j = 0; j < pt.beta.size(); ++j) fit.se.push_back(std::sqrt(pt.sigma_e2 * pt.cov_unscaled(j, j)));
  fit.lambda = pt.lambda;
  fit.sigma_e2 = pt.sigma_e2;
  fit.sigma_u2 = pt.lambda * pt.sigma_e2;
  fit.loglik_reml = pt.loglik_reml;
  fit.converged = true;
  fit.n_obs = static_cast<std::size_t>(d.y.size());
  fit.n_groups = d.group_count;
  return fit;
}

}  // namespace

Design build_design(std::span<const TrialMetrics> data, const ModelSpec& spec) {
  std::map<std::string, std::string> treatment_of;
  std::map<std::string, std::set<std::string>> participants;
  for (const auto& m : data) {
    auto [it, inserted] = treatment_of.emplace(m.participant_id, m.treatment);
    if (!inserted && it->second != m.treatment) {
      throw InvariantError("participant " + m.participant_id + " appears under more than one treatment");
    }
    participants[m.treatment].insert(m.participant_id);
  }
  if (!participants.count(spec.reference)) {
    throw InvariantError("reference treatment '" + spec.reference + "' has no observations");
  }
  for (const auto& [t, ids] : participants) {
    if (ids.size() < 2) {
      throw Degenerate("treatment " + t + " has " + std::to_string(ids.size()) + " participant(s), need at least 2");
    }
  }

  Design d;
  d.terms.push_back("intercept");
  std::map<std::string, Eigen::Index> column;
  for (const auto& [t, ids] : participants) {
    if (t == spec.reference) continue;
    column[t] = static_cast<Eigen::Index>(d.terms.size());
    d.terms.push_back(t);
  }
  std::map<std::string, std::size_t> group_index;
  for (const auto& [id, t] : treatment_of) group_index.emplace(id, group_index.size());
  d.group_count = group_index.size();

  const auto n = static_cast<Eigen::Index>(data.size());
  d.y.resize(n);
  d.X = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(d.terms.size()));
  d.group.resize(data.size());
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& m = data[static_cast<std::size_t>(r)];
    d.y[r] = response_of(m, spec.response);
    d.X(r, 0) = 1;
    if (auto it = column.find(m.treatment); it != column.end()) d.X(r, it->second) = 1;
    d.group[static_cast<std::size_t>(r)] = group_index.at(m.participant_id);
  }
  return d;
}

ProfilePoint profile_at(const Design& design, double lambda) {
  if (!(lambda >= 0)) throw InvariantError("variance ratio must be non-negative");
  if (design.y.size() <= design.X.cols()) throw Degenerate("not enough observations for the fixed effects");
  return evaluate(design, group_sums(design), lambda);
}

LmmFit fit_random_intercept(const Design& d, const FitOptions& options) {
  if (d.y.size() <= d.X.cols()) throw Degenerate("not enough observations for the fixed effects");
  if (!(options.lambda_max > options.grid_min && options.grid_min > 0 && options.grid_per_decade > 0)) {
    throw InvariantError("bad variance-ratio search bracket");
  }
  const Groups g = group_sums(d);
  auto at = [&](double lambda) { return evaluate(d, g, lambda); };

  // Exact fit: every observation equals its fitted mean.
  const ProfilePoint ols = at(0.0);
  const double scale = d.y.cwiseAbs().maxCoeff();
  if (ols.sigma_e2 <= std::pow(1e-12 * scale, 2)) {
    auto fit = make_fit(d, ols);
    fit.sigma_e2 = 0;
    fit.se.assign(fit.se.size(), 0.0);
    fit.loglik_reml = std::numeric_limits<double>::infinity();
    return fit;
  }

  const auto grid = lambda_grid(options);
  std::size_t best = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const double ll = at(grid[j]).loglik_reml;
    if (ll > best_ll) {
      best_ll = ll;
      best = j;
    }
  }
  if (best + 1 == grid.size() && at(grid.back()).score > 0) {
    throw NotConverged("REML optimum lies beyond the variance-ratio bracket");
  }
  const double outer_lo = grid[best == 0 ? 0 : best - 1];
  const double outer_hi = grid[std::min(best + 1, grid.size() - 1)];

  double lo = outer_lo, hi = outer_hi;
  double x1 = hi - kInvPhi * (hi - lo), x2 = lo + kInvPhi * (hi - lo);
  double f1 = at(x1).loglik_reml, f2 = at(x2).loglik_reml;
  for (int it = 0; hi - lo > options.tolerance && it < 500; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + kInvPhi * (hi - lo);
      f2 = at(x2).loglik_reml;
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - kInvPhi * (hi - lo);
      f1 = at(x1).loglik_reml;
    }
  }
  if (hi - lo > options.tolerance) throw NotConverged("golden-section search did not reach tolerance");
  double lambda = 0.5 * (lo + hi);

  if (lo <= options.tolerance && at(0.0).score <= 0) return make_fit(d, at(0.0));

  // Refine on the score: widen around the golden-section estimate until the
  // score changes sign, then bisect to machine precision.
  double step = std::max(hi - lo, 1e-12 * std::max(1.0, lambda));
  double a = std::max(outer_lo, lambda - step), b = std::min(outer_hi, lambda + step);
  while ((at(a).score <= 0 && a > outer_lo) || (at(b).score >= 0 && b < outer_hi)) {
    step *= 4;
    a = std::max(outer_lo, lambda - step);
    b = std::min(outer_hi, lambda + step);
  }
  if (at(a).score > 0 && at(b).score < 0) {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (a + b);
      if (mid <= a || mid >= b) break;
      (at(mid).score > 0 ? a : b) = mid;
    }
    lambda = 0.5 * (a + b);
  }
  return make_fit(d, at(lambda));
}

LmmFit fit_random_intercept(std::span<const TrialMetrics> data, const ModelSpec& spec, const FitOptions& options) {
  return fit_random_intercept(build_design(data, spec), options);
}

double two_sided_normal_p(double z) { return std::erfc(std::abs(z) / std::numbers::sqrt2); }

std::vector<WaldResult> wald_test(const LmmFit& fit) {
  if (!fit.converged) throw InvariantError("Wald test needs a converged fit");
  std::vector<WaldResult> out;
  for (std::size_t j = 0; j < fit.beta.size(); ++j) {
    WaldResult w{fit.terms[j], fit.beta[j], fit.se[j], 0, 1};
    if (fit.se[j] > 0) {
      w.z = fit.beta[j] / fit.se[j];
      w.p = two_sided_normal_p(w.z);
    } else if (fit.beta[j] != 0) {
      w.z = std::copysign(std::numeric_limits<double>::infinity(), fit.beta[j]);
      w.p = 0;
    }
    out.push_back(w);
  }
  return out;
}

namespace {

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const LmmFit& fit) {
  return {{"terms", fit.terms},
          {"beta", fit.beta},
          {"se", fit.se},
          {"sigma_u2", fit.sigma_u2},
          {"sigma_e2", fit.sigma_e2},
          {"lambda", fit.lambda},
          {"loglik_reml", finite_or_null(fit.loglik_reml)},
          {"converged", fit.converged},
          {"n_obs", fit.n_obs},
          {"n_groups", fit.n_groups}};
}

nlohmann::json to_json(const WaldResult& w) {
  return {{"term", w.term}, {"estimate", w.estimate}, {"se", w.se}, {"z", finite_or_null(w.z)}, {"p", w.p}};
}

}  // namespace exac::analysis
