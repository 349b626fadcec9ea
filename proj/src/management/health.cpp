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

#include "exac/management/health.hpp"

#include "exac/error.hpp"
#include "exac/util/clock.hpp"

namespace exac::management {

std::string_view to_string(HealthState state) {
  switch (state) {
    case HealthState::Healthy:
      return "Healthy";
    case HealthState::Degraded:
      return "Degraded";
    case HealthState::Unreachable:
      return "Unreachable";
  }
  return "?";
}

nlohmann::json to_json(const HealthStatus& s) {
  return {{"target", s.target},
          {"state", std::string(to_string(s.state))},
          {"last_ok_ts_ms", s.last_ok_ts_ms ? nlohmann::json(*s.last_ok_ts_ms) : nlohmann::json(nullptr)},
          {"consecutive_failures", s.consecutive_failures}};
}

HealthTracker::HealthTracker(std::string target, std::uint64_t threshold) : threshold_(threshold) {
  if (threshold < 1) throw InvariantError("health threshold must be >= 1");
  status_.target = std::move(target);
}

bool HealthTracker::observe(bool ok, std::int64_t now_ms) {
  if (ok) {
    status_.consecutive_failures = 0;
    status_.last_ok_ts_ms = now_ms;
    status_.state = HealthState::Healthy;
    alarmed_ = false;
    return false;
  }
  ++status_.consecutive_failures;
  status_.state = status_.consecutive_failures >= threshold_ ? HealthState::Unreachable : HealthState::Degraded;
  if (status_.state == HealthState::Unreachable && !alarmed_) {
    alarmed_ = true;
    ++alarms_;
    return true;
  }
  return false;
}

HealthMonitor::HealthMonitor(std::vector<HealthTarget> targets, std::int64_t interval_ms, std::uint64_t threshold,
                             OnAlarm on_alarm, OnTick on_tick, Clock clock)
    : targets_(std::move(targets)),
      interval_ms_(interval_ms),
      on_alarm_(std::move(on_alarm)),
      on_tick_(std::move(on_tick)),
      clock_(clock ? std::move(clock) : Clock(util::now_ms)) {
  if (interval_ms < 100) throw InvariantError("health poll interval must be >= 100 ms");
  for (const auto& t : targets_) trackers_.emplace_back(t.name, threshold);
}

HealthMonitor::~HealthMonitor() { stop(); }

void HealthMonitor::start() {
  std::lock_guard lock(mutex_);
  if (thread_.joinable()) return;
  stopping_ = false;
  thread_ = std::thread([this] { run(); });
}

void HealthMonitor::stop() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  cv_.notify_all();
  if (thread_.joinable()) thread_.join();
}

void HealthMonitor::tick() {
  std::vector<bool> results;
  results.reserve(targets_.size());
  for (const auto& t : targets_) {
    bool ok = false;
    try {
      ok = t.probe();
    } catch (const std::exception&) {
      ok = false;
    }
    results.push_back(ok);
  }
  const auto now = clock_();
  std::vector<AlarmEvent> raised;
  std::vector<HealthStatus> snapshot;
  {
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < trackers_.size(); ++i) {
      if (trackers_[i].observe(results[i], now)) raised.push_back({targets_[i].name, now});
      snapshot.push_back(trackers_[i].status());
    }
  }
  ++ticks_;
  for (const auto& a : raised) {
    if (on_alarm_) on_alarm_(a);
  }
  if (on_tick_) on_tick_(snapshot);
}

void HealthMonitor::run() {
  auto next = std::chrono::steady_clock::now();
  for (;;) {
    tick();
    next += std::chrono::milliseconds(interval_ms_);
    std::unique_lock lock(mutex_);
    if (cv_.wait_until(lock, next, [this] { return stopping_; })) return;
  }
}

std::vector<HealthStatus> HealthMonitor::statuses() const {
  std::lock_guard lock(mutex_);
  std::vector<HealthStatus> out;
  for (const auto& t : trackers_) out.push_back(t.status());
  return out;
}

std::uint64_t HealthMonitor::alarms() const {
  std::lock_guard lock(mutex_);
  std::uint64_t n = 0;
  for (const auto& t : trackers_) n += t.alarms();
  return n;
}

}  // namespace exac::management
