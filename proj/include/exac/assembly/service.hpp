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
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exac/assembly/session.hpp"
#include "exac/assembly/storage.hpp"
#include "exac/assembly/trial_buffer.hpp"
#include "exac/protocol/envelope.hpp"

namespace exac::assembly {

class UnknownSession : public Error {
 public:
  explicit UnknownSession(const std::string& id) : Error("unknown session '" + id + "'") {}
};

class NotReady : public Error {
 public:
  using Error::Error;
};

struct AssemblyConfig {
  bool require_registration = false;
  std::int64_t idle_timeout_ms = 60LL * 60 * 1000;
  std::uint64_t trials_per_participant = 6;
  std::uint64_t max_chunks_per_trial = TrialBuffer::kDefaultMaxChunks;
};

struct IngestAck {
  bool accepted = true;
  bool duplicate = false;
  std::optional<TrialStatus> trial_status;
};

nlohmann::json to_json(const IngestAck& ack);

struct SessionSummary {
  std::string session_id;
  std::string participant_id;
  std::string treatment;
  std::string cohort;
  std::string os;
  std::string browser;
  std::optional<bool> onboarding_passed;
  SessionState state = SessionState::Onboarding;
  std::int64_t created_ts_ms = 0;
  std::int64_t updated_ts_ms = 0;
  std::optional<std::int64_t> first_event_ts_ms;
  std::optional<std::int64_t> completed_event_ts_ms;
  std::optional<std::int64_t> last_event_ts_ms;
  std::size_t event_count = 0;
  std::vector<std::uint64_t> reconstructed_trials;
  std::optional<std::string> submitted_code;
  bool code_verified = false;
};

nlohmann::json to_json(const SessionSummary& summary);
SessionSummary session_summary_from_json(const nlohmann::json& doc);

struct ServiceStatus {
  double uptime_s = 0;
  std::uint64_t sessions_total = 0;
  std::map<std::string, std::uint64_t> sessions_by_state;
  std::uint64_t trials_reconstructed = 0;
  std::uint64_t bytes_ingested = 0;
};

nlohmann::json to_json(const ServiceStatus& status);

// Storage layout, one prefix per session.
std::string session_prefix(const std::string& session_id);
std::string trial_csv_key(const std::string& session_id, std::uint64_t trial);
std::string trial_raw_key(const std::string& session_id, std::uint64_t trial);
std::string events_csv_key(const std::string& session_id);
std::string session_snapshot_key(const std::string& session_id);

inline constexpr std::string_view kTrialCsvHeader =
    "session_id,participant_id,treatment,trial,t,x,y,z,yaw,pitch\n";
inline constexpr std::string_view kEventsCsvHeader = "session_id,ts_ms,name,data_json\n";

// The data-assembly backend. Thread-safe: sessions are processed
// concurrently, mutations of one session are serialized.
class AssemblyService {
 public:
  using Clock = std::function<std::int64_t()>;

  AssemblyService(std::shared_ptr<StorageBackend> storage, AssemblyConfig config = {},
                  Clock clock = {});

  // Rebuilds sessions and reconstructed trials from storage. Open buffers
  // are not persisted and are lost. Returns the number of sessions loaded.
  std::size_t recover();

  void register_session(const std::string& session_id);

  // Throws UnknownSession (registration enforced), ConflictError (same key,
  // different bytes) or InvariantError (envelope out of bounds).
  IngestAck ingest(const protocol::WireEnvelope& envelope);

  // Throws UnknownSession or NotReady.
  std::string export_trial_csv(const std::string& session_id, std::uint64_t trial) const;
  std::string export_events_csv(const std::string& session_id) const;

  ServiceStatus status() const;
  std::vector<SessionSummary> sessions() const;
  std::optional<SessionSummary> find(const std::string& session_id) const;

  // Remembers the completion code a participant submitted.
  void record_code(const std::string& session_id, const std::string& code, bool verified);

  // Moves non-terminal sessions idle longer than the configured timeout to
  // Abandoned. Returns how many moved.
  std::size_t sweep_idle(std::int64_t now_ms);

  StorageBackend& storage() { return *storage_; }
  const AssemblyConfig& config() const { return config_; }

 private:
  struct Slot {
    std::mutex mutex;
    SessionRecord record;
    std::set<std::string> event_keys;
  };

  std::shared_ptr<Slot> slot_for(const std::string& session_id, bool create);
  void persist_snapshot(const SessionRecord& record);
  void persist_events(const SessionRecord& record);
  void persist_trial(const SessionRecord& record, std::uint64_t trial, const std::string& payload);
  static SessionSummary summarize(const SessionRecord& record);

  std::shared_ptr<StorageBackend> storage_;
  AssemblyConfig config_;
  Clock clock_;
  std::chrono::steady_clock::time_point started_;

  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::set<std::string> registered_;

  std::atomic<std::uint64_t> trials_reconstructed_{0};
  std::atomic<std::uint64_t> bytes_ingested_{0};
};

}  // namespace exac::assembly
