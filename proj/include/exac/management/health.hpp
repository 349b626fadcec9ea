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

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

namespace exac::management {

enum class HealthState { Healthy, Degraded, Unreachable };

std::string_view to_string(HealthState state);

struct HealthStatus {
  std::string target;
  HealthState state = HealthState::Healthy;
  std::optional<std::int64_t> last_ok_ts_ms;
  std::uint64_t consecutive_failures = 0;
};

nlohmann::json to_json(const HealthStatus& status);

// Failure counter per target. Healthy below one failure, Degraded below the
// threshold, Unreachable at or above it. One alarm per episode: the episode
// ends with the next successful probe.
class HealthTracker {
 public:
  explicit HealthTracker(std::string target, std::uint64_t threshold = 3);

  // Returns true when this observation raises the alarm.
  bool observe(bool ok, std::int64_t now_ms);

  const HealthStatus& status() const { return status_; }
  std::uint64_t alarms() const { return alarms_; }

 private:
  HealthStatus status_;
  std::uint64_t threshold_;
  bool alarmed_ = false;
  std::uint64_t alarms_ = 0;
};

struct HealthTarget {
  std::string name;
  std::function<bool()> probe;
};

struct AlarmEvent {
  std::string target;
  std::int64_t ts_ms = 0;
};

// Periodic poller over a set of targets on its own thread.
class HealthMonitor {
 public:
  using Clock = std::function<std::int64_t()>;
  using OnTick = std::function<void(const std::vector<HealthStatus>&)>;
  using OnAlarm = std::function<void(const AlarmEvent&)>;

  // Throws InvariantError when interval_ms < 100 or threshold < 1.
  HealthMonitor(std::vector<HealthTarget> targets, std::int64_t interval_ms, std::uint64_t threshold = 3,
                OnAlarm on_alarm = {}, OnTick on_tick = {}, Clock clock = {});
  ~HealthMonitor();
  HealthMonitor(const HealthMonitor&) = delete;
  HealthMonitor& operator=(const HealthMonitor&) = delete;

  void start();
  void stop();
  // Runs one probe round synchronously.
  void tick();

  std::vector<HealthStatus> statuses() const;
  std::uint64_t alarms() const;
  std::uint64_t ticks() const { return ticks_.load(); }

 private:
  void run();

  std::vector<HealthTarget> targets_;
  std::vector<HealthTracker> trackers_;
  std::int64_t interval_ms_;
  OnAlarm on_alarm_;
  OnTick on_tick_;
  Clock clock_;

  mutable std::mutex mutex_;
  std::condition_variable cv_;
  bool stopping_ = false;
  std::atomic<std::uint64_t> ticks_{0};
  std::thread thread_;
};

}  // namespace exac::management
