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

#include "exac/clientsim/session.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <thread>

#include "exac/protocol/chunking.hpp"
#include "exac/util/clock.hpp"

namespace exac::clientsim {

using nlohmann::json;

namespace {

constexpr std::int64_t kBaseTs = 1'700'000'000'000;
constexpr std::int64_t kOnboardingMs = 90'000;
constexpr std::int64_t kTrainingMs = 5 * 60'000;

std::string hex_id(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

protocol::WireEnvelope make_event(const std::string& session, const std::string& name, json data, std::uint64_t trial,
                                  std::int64_t ts) {
  protocol::WireEnvelope e;
  e.session = session;
  e.trial = trial;
  e.ts_ms = ts;
  e.payload = protocol::EventPayload{name, std::move(data)};
  return e;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size()))) - 1;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return values[k];
}

}  // namespace

SessionPlan plan_session(const SimAgentConfig& config, const manifest::ExperimentManifest& manifest,
                         std::uint64_t seed, std::uint64_t index, const std::string& cohort) {
  SessionPlan p;
  p.index = index;
  p.seed = util::mix_seed(seed, 2 * index + 1);
  p.cohort = cohort;
  std::mt19937_64 rng(util::mix_seed(seed, 2 * index));
  const auto tag = hex_id(rng());
  p.session_id = "s" + tag;
  p.participant_id = "W" + hex_id(rng()).substr(0, 12);
  p.profile = sample_profile(config.capability_pass_p, rng);
  p.completes = std::bernoulli_distribution(config.completion_p)(rng);
  const auto n = manifest.trials_per_participant;
  p.trials_done = p.completes ? n : std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng);
  p.start_ts_ms = kBaseTs + static_cast<std::int64_t>(index) * 30'000 +
                  std::uniform_int_distribution<std::int64_t>(0, 29'999)(rng);
  return p;
}

SessionOutcome run_session(const SimAgentConfig& config, const manifest::ExperimentManifest& manifest,
                           const SessionPlan& plan, ServiceApi& api, const RunOptions& options) {
  const auto wall_start = std::chrono::steady_clock::now();
  SessionOutcome out;
  out.session_id = plan.session_id;
  out.participant_id = plan.participant_id;
  std::mt19937_64 rng(plan.seed);
  std::int64_t clock = plan.start_ts_ms;

  auto send = [&](const protocol::WireEnvelope& e) {
    const auto t0 = std::chrono::steady_clock::now();
    auto ack = with_retries(options.retry, out.retries, [&] { return api.post(e); });
    out.latencies_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    ++out.envelopes;
    return ack;
  };

  try {
    send(onboarding_event(plan.session_id, plan.participant_id, plan.profile, clock));
    out.passed_onboarding = onboarding_check(plan.profile).passed;
    if (!out.passed_onboarding) {
      out.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
      return out;
    }
    out.treatment = plan.treatment ? *plan.treatment : with_retries(options.retry, out.retries, [&] {
      return api.assign(plan.participant_id, plan.session_id);
    });
    clock += kOnboardingMs;
    send(make_event(plan.session_id, "consent_given",
                    {{"participant_id", plan.participant_id}, {"treatment", out.treatment}, {"cohort", plan.cohort}}, 0,
                    clock));
    clock += kTrainingMs;

    std::uniform_int_distribution<std::int64_t> pause(40'000, 160'000);
    for (std::uint64_t k = 1; k <= plan.trials_done; ++k) {
      std::mt19937_64 trial_rng(util::mix_seed(plan.seed, k));
      const auto samples = simulate_trajectory(config, out.treatment, k, trial_rng);
      const auto payload = protocol::encode_trajectory(samples);
      send(make_event(plan.session_id, "trial_start", json::object(), k, clock));
      const auto trial_ms = static_cast<std::int64_t>(std::llround(samples.back().t * 1000.0));
      protocol::StreamContext ctx{plan.session_id, k, clock, 1000.0 / static_cast<double>(config.sample_period_ms)};
      auto stream = protocol::chunk_payload(payload, manifest.chunk_size_bytes, ctx);
      send(stream.header);
      for (const auto& c : stream.chunks) send(c);
      const auto ack = send(stream.tail);
      if (ack.trial_status != "Reconstructed") {
        throw Error("trial " + std::to_string(k) + " ended " + ack.trial_status);
      }
      clock += trial_ms;
      send(make_event(plan.session_id, "trial_end", {{"samples", samples.size()}}, k, clock));
      out.samples_per_trial.push_back(samples.size());
      if (options.record_payloads) out.payloads.push_back(payload);
      clock += pause(rng);
    }

    if (plan.completes) {
      const auto challenge = with_retries(options.retry, out.retries, [&] { return api.challenge(plan.session_id); });
      const auto code = completion::derive_code(challenge, manifest.salt).code;
      out.code_verified = with_retries(options.retry, out.retries, [&] { return api.complete(plan.session_id, code); });
      clock += 30'000;
      send(make_event(plan.session_id, "session_complete", json::object(), 0, clock));
      out.completed = true;
    }
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return out;
}

json to_json(const CohortReport& r) {
  return {{"sessions", r.sessions},
          {"passed_onboarding", r.passed_onboarding},
          {"completed", r.completed},
          {"errors", r.errors},
          {"envelopes", r.envelopes},
          {"retries", r.retries},
          {"elapsed_s", r.elapsed_s},
          {"envelopes_per_s", r.envelopes_per_s},
          {"p95_latency_ms", r.p95_latency_ms}};
}

CohortResult run_cohort(std::uint64_t n, const SimAgentConfig& config, const manifest::ExperimentManifest& manifest,
                        const ApiFactory& api_factory, std::size_t parallelism, std::uint64_t seed,
                        const RunOptions& options, const std::string& cohort) {
  if (n < 1) throw InvariantError("cohort size must be >= 1");
  validate(config);
  const auto start = std::chrono::steady_clock::now();
  CohortResult result;
  result.outcomes.resize(n);

  std::vector<SessionPlan> plans;
  plans.reserve(n);
  {
    auto api = api_factory();
    std::uint64_t retries = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
      auto p = plan_session(config, manifest, seed, i, cohort);
      if (onboarding_check(p.profile).passed) {
        try {
          p.treatment = with_retries(options.retry, retries, [&] { return api->assign(p.participant_id, p.session_id); });
        } catch (const std::exception& e) {
          result.outcomes[i].error = std::string("assignment failed: ") + e.what();
        }
      }
      plans.push_back(std::move(p));
    }
  }

  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    auto api = api_factory();
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= n) return;
      if (result.outcomes[i].error) {
        result.outcomes[i].session_id = plans[i].session_id;
        continue;
      }
      result.outcomes[i] = run_session(config, manifest, plans[i], *api, options);
    }
  };
  const auto threads = std::max<std::size_t>(1, std::min<std::size_t>(parallelism, n));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  auto& r = result.report;
  std::vector<double> latencies;
  for (const auto& o : result.outcomes) {
    ++r.sessions;
    r.passed_onboarding += o.passed_onboarding;
    r.completed += o.completed;
    r.errors += o.error.has_value();
    r.envelopes += o.envelopes;
    r.retries += o.retries;
    latencies.insert(latencies.end(), o.latencies_ms.begin(), o.latencies_ms.end());
  }
  r.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.envelopes_per_s = r.elapsed_s > 0 ? static_cast<double>(r.envelopes) / r.elapsed_s : 0.0;
  r.p95_latency_ms = percentile(std::move(latencies), 0.95);
  return result;
}

}  // namespace exac::clientsim
