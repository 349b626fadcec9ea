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
#include <fstream>
#include <thread>

#include "doctest.h"
#include "exac/management/funnel.hpp"
#include "exac/management/health.hpp"
#include "exac/management/management.hpp"
#include "support/monitoring_table.hpp"
#include "support/temp_dir.hpp"

using namespace exac::management;
using exac::assembly::SessionState;
using exac::assembly::SessionSummary;
using exac::completion::Challenge;

namespace {

const auto kManifest = exac::manifest::parse_manifest(R"({"name":"wf","salt":"pepper"})");

struct Fixture {
  std::map<std::string, SessionSummary> sessions;
  std::map<std::string, Challenge> challenges;
  std::shared_ptr<Registry> registry = std::make_shared<Registry>();
  std::shared_ptr<MockRecruitmentClient> client = std::make_shared<MockRecruitmentClient>();

  Management make(ManagementConfig cfg = {}) {
    return Management(
        kManifest, registry, client,
        [this](const std::string& id) -> std::optional<SessionSummary> {
          const auto it = sessions.find(id);
          if (it == sessions.end()) return std::nullopt;
          return it->second;
        },
        [this](const std::string& id) -> std::optional<Challenge> {
          const auto it = challenges.find(id);
          if (it == challenges.end()) return std::nullopt;
          return it->second;
        },
        cfg);
  }

  // A session that spent `minutes` between its first event and completion.
  std::string add_session(const std::string& id, double minutes, SessionState state = SessionState::Completed) {
    SessionSummary s;
    s.session_id = id;
    s.participant_id = "w-" + id;
    s.state = state;
    s.first_event_ts_ms = 1'000'000;
    s.completed_event_ts_ms = 1'000'000 + static_cast<std::int64_t>(minutes * 60000);
    sessions[id] = s;
    challenges[id] = Challenge{id, std::string(32, 'a'), 0};
    return exac::completion::derive_code(challenges[id], kManifest.salt).code;
  }
};

}  // namespace

TEST_CASE("reward rule") {
  CHECK(compute_reward(kManifest, 18).total_usd == doctest::Approx(5.50));
  CHECK(compute_reward(kManifest, 25).total_usd == doctest::Approx(4.50));
  CHECK(compute_reward(kManifest, 20).bonus_usd == 0.0);
  CHECK(compute_reward(kManifest, 19.99).bonus_usd == 1.0);
}

TEST_CASE("verify and reward paths") {
  Fixture f;
  auto mgmt = f.make();
  const auto fast = f.add_session("fast", 18);
  const auto slow = f.add_session("slow", 25);
  const auto early = f.add_session("early", 5, SessionState::InTrial);

  CHECK(std::get<Rejected>(mgmt.verify_and_reward("fast", "AAAAAAAAAAAA", 0)).reason == "bad_code");
  CHECK(f.client->calls().empty());
  CHECK(std::get<Rejected>(mgmt.verify_and_reward("early", early, 0)).reason == "not_offboarding");
  CHECK(std::get<Rejected>(mgmt.verify_and_reward("ghost", fast, 0)).reason == "not_offboarding");

  auto r = mgmt.verify_and_reward("fast", fast, 0);
  CHECK(std::get<RewardDecision>(r).total_usd == doctest::Approx(5.50));
  CHECK(std::get<RewardDecision>(r).duration_min == doctest::Approx(18));
  CHECK(std::get<Rejected>(mgmt.verify_and_reward("fast", fast, 0)).reason == "already_rewarded");
  CHECK(f.client->pay_count("fast") == 1);

  // Lowercase input is accepted.
  std::string lower = slow;
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  CHECK(std::get<RewardDecision>(mgmt.verify_and_reward("slow", lower, 0)).total_usd == doctest::Approx(4.50));

  const auto rec = f.registry->by_session("fast");
  REQUIRE(rec);
  CHECK(rec->verified);
  CHECK(rec->reward->total_usd == doctest::Approx(5.50));
  const auto calls = f.client->calls();
  REQUIRE(calls.size() == 4);
  CHECK(calls[0].op == "approve");
  CHECK(calls[1].op == "pay");
  CHECK(calls[1].subject == "w-fast");
}

TEST_CASE("concurrent verification pays once") {
  Fixture f;
  auto mgmt = f.make();
  std::vector<std::string> codes;
  for (int s = 0; s < 10; ++s) codes.push_back(f.add_session("s" + std::to_string(s), 10 + s));
  std::atomic<int> rewarded{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&] {
      for (int rep = 0; rep < 5; ++rep) {
        for (int s = 0; s < 10; ++s) {
          if (std::holds_alternative<RewardDecision>(mgmt.verify_and_reward("s" + std::to_string(s), codes[s], 0))) {
            ++rewarded;
          }
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(rewarded == 10);
  CHECK(f.client->pay_count() == 10);
  CHECK_FALSE(f.client->double_pay_detected());
}

TEST_CASE("balanced assignment stays within one") {
  Fixture f;
  auto mgmt = f.make();
  for (int i = 0; i < 9; ++i) {
    mgmt.assign_treatment("p" + std::to_string(i), "s" + std::to_string(i), i);
    const auto counts = f.registry->treatment_counts();
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& t : kManifest.treatments) {
      const auto c = counts.count(t) ? counts.at(t) : 0;
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    CHECK(hi - lo <= 1);
  }
  for (const auto& t : kManifest.treatments) CHECK(f.registry->treatment_counts().at(t) == 3);
  CHECK_THROWS_AS(mgmt.assign_treatment("p0", "other", 0), DuplicateParticipant);
}

TEST_CASE("assignment is deterministic under seed") {
  auto run = [](std::uint64_t seed, AssignmentStrategy strategy) {
    Fixture f;
    auto mgmt = f.make({strategy, seed});
    std::vector<std::string> out;
    for (int i = 0; i < 30; ++i) out.push_back(mgmt.assign_treatment("p" + std::to_string(i), "s", 0));
    return out;
  };
  CHECK(run(7, AssignmentStrategy::balanced) == run(7, AssignmentStrategy::balanced));
  CHECK(run(7, AssignmentStrategy::uniform_random) == run(7, AssignmentStrategy::uniform_random));
  CHECK(run(7, AssignmentStrategy::uniform_random) != run(8, AssignmentStrategy::uniform_random));
}

TEST_CASE("uniform assignment frequencies approach one third") {
  Fixture f;
  auto mgmt = f.make({AssignmentStrategy::uniform_random, 42});
  for (int i = 0; i < 30000; ++i) mgmt.assign_treatment("p" + std::to_string(i), "s" + std::to_string(i), 0);
  for (const auto& [t, c] : f.registry->treatment_counts()) {
    CHECK(std::abs(static_cast<double>(c) / 30000.0 - 1.0 / 3.0) < 0.01);
  }
}

TEST_CASE("journal replay restores the registry") {
  exac::testing::TempDir dir;
  const auto path = dir.path() / "registry.jsonl";
  {
    auto reg = std::make_shared<Registry>(path);
    reg->record_assign({"p1", "s1", "B", 10, false, std::nullopt});
    reg->record_verify("s1", "p1", 11);
    reg->record_reward("s1", compute_reward(kManifest, 3), 12);
    reg->record_alarm("assembly", 13);
    reg->record_hit(1, "HIT1", 14);
  }
  {
    std::ofstream torn(path, std::ios::app);
    torn << R"({"type":"assign","participant_id":"p2")";
  }
  Registry reg(path);
  const auto rec = reg.by_participant("p1");
  REQUIRE(rec);
  CHECK(rec->treatment == "B");
  CHECK(rec->verified);
  CHECK(rec->reward->total_usd == doctest::Approx(5.5));
  CHECK(reg.alarm_count() == 1);
  CHECK(reg.hits().at(1) == "HIT1");
  CHECK_FALSE(reg.by_participant("p2"));
  CHECK_THROWS_AS(reg.record_assign({"p1", "s9", "A", 0, false, std::nullopt}), DuplicateParticipant);
}

TEST_CASE("create_hits records progress and resumes") {
  Fixture f;
  auto mgmt = f.make();
  HitSpec spec{"Find the room", 4.5, 9, "http://localhost/"};
  CHECK(mgmt.create_hits(spec, 3, 0).size() == 3);

  Fixture g;
  auto m2 = g.make();
  g.client->fail_create_on_call(2);
  try {
    m2.create_hits(spec, 3, 0);
    FAIL("expected ClientError");
  } catch (const ClientError& e) {
    CHECK(std::string(e.what()).find("batch 2") != std::string::npos);
  }
  CHECK(g.registry->hits().size() == 1);
  const auto ids = m2.create_hits(spec, 3, 0);
  CHECK(ids.size() == 3);
  std::size_t created = 0;
  for (const auto& c : g.client->calls()) created += c.op == "create_hit";
  CHECK(created == 3);
  CHECK(m2.create_hits(spec, 3, 0) == ids);
}

TEST_CASE("health tracker: one alarm per episode") {
  HealthTracker t("svc", 3);
  CHECK_FALSE(t.observe(true, 0));
  CHECK(t.status().state == HealthState::Healthy);
  CHECK_FALSE(t.observe(false, 1));
  CHECK(t.status().state == HealthState::Degraded);
  CHECK_FALSE(t.observe(false, 2));
  CHECK(t.observe(false, 3));
  CHECK(t.status().state == HealthState::Unreachable);
  CHECK_FALSE(t.observe(false, 4));
  CHECK(t.alarms() == 1);
  t.observe(true, 5);
  CHECK(t.status().last_ok_ts_ms == 5);
  for (int i = 0; i < 3; ++i) t.observe(false, 6 + i);
  CHECK(t.alarms() == 2);
}

TEST_CASE("health monitor polls on its own thread") {
  CHECK_THROWS_AS(HealthMonitor({}, 50), exac::InvariantError);
  std::atomic<bool> up{false};
  std::atomic<int> alarms{0};
  HealthMonitor mon({{"svc", [&] { return up.load(); }}}, 100, 3, [&](const AlarmEvent&) { ++alarms; });
  for (int i = 0; i < 5; ++i) mon.tick();
  CHECK(alarms == 1);
  CHECK(mon.statuses()[0].state == HealthState::Unreachable);
  up = true;
  mon.start();
  std::this_thread::sleep_for(std::chrono::milliseconds(250));
  mon.stop();
  CHECK(mon.statuses()[0].state == HealthState::Healthy);
  CHECK(mon.ticks() >= 6);
}

TEST_CASE("funnel from the monitoring table") {
  const auto f = compute_funnel(exac::testing::monitoring_table_sessions());
  CHECK(f.total.accessed == 462);
  CHECK(f.total.capable == 316);
  CHECK(f.total.completed == 149);
  CHECK(std::round(f.capable_rate() * 1000) / 10 == doctest::Approx(68.4));
  CHECK(std::round(f.completion_rate() * 1000) / 10 == doctest::Approx(47.2));
  CHECK(f.by_os.at("Windows 10").capable == 229);
  CHECK(f.by_os.at("Windows 10").accessed == 299);
  std::uint64_t cell_sum = 0;
  for (const auto& [_, c] : f.cells) cell_sum += c.accessed;
  CHECK(cell_sum == 462);
  const auto empty = compute_funnel({});
  CHECK(empty.total.accessed == 0);
  CHECK(empty.capable_rate() == 0.0);
  CHECK(to_json(f)["cells"].size() == exac::testing::monitoring_table_cells().size());
}
