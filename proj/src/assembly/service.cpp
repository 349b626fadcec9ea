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

#include "exac/assembly/service.hpp"

#include <algorithm>

#include "exac/protocol/trajectory.hpp"
#include "exac/util/clock.hpp"
#include "exac/util/csv.hpp"

namespace exac::assembly {

using nlohmann::json;
using protocol::WireEnvelope;

std::string session_prefix(const std::string& id) { return "sessions/" + id + "/"; }
std::string trial_csv_key(const std::string& id, std::uint64_t trial) {
  return session_prefix(id) + "trial_" + std::to_string(trial) + ".csv";
}
std::string trial_raw_key(const std::string& id, std::uint64_t trial) {
  return session_prefix(id) + "trial_" + std::to_string(trial) + ".raw";
}
std::string events_csv_key(const std::string& id) { return session_prefix(id) + "events.csv"; }
std::string session_snapshot_key(const std::string& id) { return session_prefix(id) + "session.json"; }

namespace {

template <typename T>
json optional_json(const std::optional<T>& value) {
  return value ? json(*value) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

std::string event_key(const WireEnvelope& e, const protocol::EventPayload& ev) {
  return std::to_string(e.ts_ms) + "|" + std::to_string(e.trial) + "|" + ev.name + "|" + ev.data.dump();
}

}  // namespace

json to_json(const IngestAck& ack) {
  json out{{"accepted", ack.accepted}, {"duplicate", ack.duplicate}};
  out["trial_status"] = ack.trial_status ? json(std::string(to_string(*ack.trial_status))) : json(nullptr);
  return out;
}

json to_json(const SessionSummary& s) {
  return {{"session_id", s.session_id},
          {"participant_id", s.participant_id},
          {"treatment", s.treatment},
          {"cohort", s.cohort},
          {"os", s.os},
          {"browser", s.browser},
          {"onboarding_passed", optional_json(s.onboarding_passed)},
          {"state", std::string(to_string(s.state))},
          {"created_ts_ms", s.created_ts_ms},
          {"updated_ts_ms", s.updated_ts_ms},
          {"first_event_ts_ms", optional_json(s.first_event_ts_ms)},
          {"completed_event_ts_ms", optional_json(s.completed_event_ts_ms)},
          {"last_event_ts_ms", optional_json(s.last_event_ts_ms)},
          {"event_count", s.event_count},
          {"reconstructed_trials", s.reconstructed_trials},
          {"submitted_code", optional_json(s.submitted_code)},
          {"code_verified", s.code_verified}};
}

SessionSummary session_summary_from_json(const json& doc) {
  try {
    SessionSummary s;
    s.session_id = doc.at("session_id").get<std::string>();
    s.participant_id = doc.at("participant_id").get<std::string>();
    s.treatment = doc.at("treatment").get<std::string>();
    s.cohort = doc.at("cohort").get<std::string>();
    s.os = doc.at("os").get<std::string>();
    s.browser = doc.at("browser").get<std::string>();
    s.onboarding_passed = optional_from<bool>(doc, "onboarding_passed");
    const auto state = session_state_from_string(doc.at("state").get<std::string>());
    if (!state) throw SchemaError("unknown session state");
    s.state = *state;
    s.created_ts_ms = doc.at("created_ts_ms").get<std::int64_t>();
    s.updated_ts_ms = doc.at("updated_ts_ms").get<std::int64_t>();
    s.first_event_ts_ms = optional_from<std::int64_t>(doc, "first_event_ts_ms");
    s.completed_event_ts_ms = optional_from<std::int64_t>(doc, "completed_event_ts_ms");
    s.last_event_ts_ms = optional_from<std::int64_t>(doc, "last_event_ts_ms");
    s.event_count = doc.at("event_count").get<std::size_t>();
    s.reconstructed_trials = doc.at("reconstructed_trials").get<std::vector<std::uint64_t>>();
    s.submitted_code = optional_from<std::string>(doc, "submitted_code");
    s.code_verified = doc.at("code_verified").get<bool>();
    return s;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("session summary: ") + e.what());
  }
}

json to_json(const ServiceStatus& s) {
  return {{"uptime_s", s.uptime_s},
          {"sessions_total", s.sessions_total},
          {"sessions_by_state", s.sessions_by_state},
          {"trials_reconstructed", s.trials_reconstructed},
          {"bytes_ingested", s.bytes_ingested}};
}

AssemblyService::AssemblyService(std::shared_ptr<StorageBackend> storage, AssemblyConfig config, Clock clock)
    : storage_(std::move(storage)),
      config_(config),
      clock_(clock ? std::move(clock) : Clock(util::now_ms)),
      started_(std::chrono::steady_clock::now()) {}

std::shared_ptr<AssemblyService::Slot> AssemblyService::slot_for(const std::string& id, bool create) {
  {
    std::shared_lock lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    if (it != sessions_.end()) return it->second;
    if (!create) return nullptr;
  }
  std::unique_lock lock(sessions_mutex_);
  auto& slot = sessions_[id];
  if (!slot) {
    if (config_.require_registration && !registered_.count(id)) {
      sessions_.erase(id);
      throw UnknownSession(id);
    }
    slot = std::make_shared<Slot>();
    const auto now = clock_();
    slot->record.session_id = id;
    slot->record.created_ts_ms = now;
    slot->record.updated_ts_ms = now;
  }
  return slot;
}

void AssemblyService::register_session(const std::string& id) {
  if (!protocol::valid_session_id(id)) throw InvariantError("invalid session id");
  std::unique_lock lock(sessions_mutex_);
  registered_.insert(id);
}

IngestAck AssemblyService::ingest(const WireEnvelope& envelope) {
  protocol::validate(envelope);
  auto slot = slot_for(envelope.session, true);
  std::lock_guard lock(slot->mutex);
  auto& record = slot->record;
  IngestAck ack;

  if (const auto* ev = std::get_if<protocol::EventPayload>(&envelope.payload)) {
    if (!slot->event_keys.insert(event_key(envelope, *ev)).second) {
      ack.duplicate = true;
      return ack;
    }
    record.apply_event(EventRecord{envelope.ts_ms, envelope.trial, ev->name, ev->data},
                       config_.trials_per_participant);
    record.updated_ts_ms = clock_();
    persist_events(record);
    persist_snapshot(record);
    return ack;
  }

  auto [it, inserted] = record.trials.try_emplace(envelope.trial, config_.max_chunks_per_trial);
  auto& buffer = it->second;
  MergeOutcome outcome;
  std::uint64_t added_bytes = 0;
  if (const auto* h = std::get_if<protocol::HeaderPayload>(&envelope.payload)) {
    outcome = buffer.merge_header(*h);
  } else if (const auto* c = std::get_if<protocol::ChunkPayload>(&envelope.payload)) {
    added_bytes = c->bytes.size();
    outcome = buffer.merge_chunk(*envelope.seq, c->bytes);
  } else {
    outcome = buffer.merge_tail(std::get<protocol::TailPayload>(envelope.payload));
  }
  ack.duplicate = outcome.duplicate;
  ack.trial_status = outcome.status;
  if (!outcome.duplicate) {
    bytes_ingested_ += added_bytes;
    record.updated_ts_ms = clock_();
  }
  if (outcome.reconstructed) {
    persist_trial(record, envelope.trial, *outcome.reconstructed);
    trials_reconstructed_++;
    persist_snapshot(record);
  }
  return ack;
}

void AssemblyService::persist_trial(const SessionRecord& record, std::uint64_t trial, const std::string& payload) {
  storage_->put(trial_raw_key(record.session_id, trial), payload);
  std::vector<protocol::TrajectorySample> samples;
  try {
    samples = protocol::decode_trajectory(payload);
  } catch (const DecodeError&) {
    // Not a trajectory stream; only the raw bytes are kept.
    return;
  }
  std::string prefix = util::csv_field(record.session_id) + "," + util::csv_field(record.participant_id) + "," +
                       util::csv_field(record.treatment) + "," + std::to_string(trial) + ",";
  std::string csv(kTrialCsvHeader);
  csv.reserve(csv.size() + samples.size() * (prefix.size() + 64));
  for (const auto& s : samples) {
    csv += prefix;
    protocol::append_fixed6(csv, s.t);
    for (double v : {s.x, s.y, s.z, s.yaw, s.pitch}) {
      csv.push_back(',');
      protocol::append_fixed6(csv, v);
    }
    csv.push_back('\n');
  }
  storage_->put(trial_csv_key(record.session_id, trial), csv);
}

void AssemblyService::persist_events(const SessionRecord& record) {
  std::string csv(kEventsCsvHeader);
  for (const auto& e : record.events) {
    csv += util::csv_field(record.session_id);
    csv += ',';
    csv += std::to_string(e.ts_ms);
    csv += ',';
    csv += util::csv_field(e.name);
    csv += ',';
    csv += util::csv_field(e.data.dump());
    csv += '\n';
  }
  storage_->put(events_csv_key(record.session_id), csv);
}

void AssemblyService::persist_snapshot(const SessionRecord& r) {
  json events = json::array();
  for (const auto& e : r.events) {
    events.push_back({{"ts_ms", e.ts_ms}, {"trial", e.trial}, {"name", e.name}, {"data", e.data}});
  }
  json trials = json::object();
  for (const auto& [k, buffer] : r.trials) {
    if (buffer.status() != TrialStatus::Reconstructed) continue;
    trials[std::to_string(k)] = {{"chunk_count", buffer.tail()->chunk_count}, {"crc32", buffer.tail()->crc.hex()}};
  }
  json doc{{"session_id", r.session_id},
           {"state", std::string(to_string(r.state))},
           {"created_ts_ms", r.created_ts_ms},
           {"updated_ts_ms", r.updated_ts_ms},
           {"submitted_code", optional_json(r.submitted_code)},
           {"code_verified", r.code_verified},
           {"events", std::move(events)},
           {"trials", std::move(trials)}};
  storage_->put(session_snapshot_key(r.session_id), doc.dump());
}

std::size_t AssemblyService::recover() {
  std::size_t loaded = 0;
  for (const auto& key : storage_->list("sessions/")) {
    constexpr std::string_view kSuffix = "/session.json";
    if (key.size() <= kSuffix.size() || key.compare(key.size() - kSuffix.size(), kSuffix.size(), kSuffix) != 0) {
      continue;
    }
    const auto bytes = storage_->get(key);
    if (!bytes) continue;
    json doc;
    try {
      doc = json::parse(*bytes);
    } catch (const json::exception& e) {
      throw SchemaError("corrupt snapshot " + key + ": " + e.what());
    }
    auto slot = std::make_shared<Slot>();
    auto& r = slot->record;
    r.session_id = doc.at("session_id").get<std::string>();
    r.created_ts_ms = doc.at("created_ts_ms").get<std::int64_t>();
    for (const auto& e : doc.at("events")) {
      EventRecord ev{e.at("ts_ms").get<std::int64_t>(), e.at("trial").get<std::uint64_t>(),
                     e.at("name").get<std::string>(), e.at("data")};
      protocol::WireEnvelope env;
      env.ts_ms = ev.ts_ms;
      env.trial = ev.trial;
      slot->event_keys.insert(event_key(env, protocol::EventPayload{ev.name, ev.data}));
      r.apply_event(std::move(ev), config_.trials_per_participant);
    }
    // Replay gives the event-driven state; sweeps and other server-side
    // transitions are only in the snapshot.
    if (const auto state = session_state_from_string(doc.at("state").get<std::string>())) r.state = *state;
    r.updated_ts_ms = doc.at("updated_ts_ms").get<std::int64_t>();
    r.submitted_code = optional_from<std::string>(doc, "submitted_code");
    r.code_verified = doc.value("code_verified", false);
    for (const auto& [k, t] : doc.at("trials").items()) {
      r.trials.emplace(std::stoull(k), TrialBuffer::restored(t.at("chunk_count").get<std::uint64_t>(),
                                                             protocol::Checksum::from_hex(t.at("crc32").get<std::string>())));
    }
    // A crash between writing the raw payload and the snapshot leaves the
    // payload as the only record of the trial.
    for (const auto& trial_key : storage_->list(session_prefix(r.session_id))) {
      const auto name = trial_key.substr(session_prefix(r.session_id).size());
      if (name.rfind("trial_", 0) != 0 || name.size() < 11 || name.substr(name.size() - 4) != ".raw") continue;
      const auto k = std::stoull(name.substr(6, name.size() - 10));
      if (r.trials.count(k)) continue;
      if (const auto raw = storage_->get(trial_key)) {
        r.trials.emplace(k, TrialBuffer::restored(0, protocol::compute_checksum(*raw)));
      }
    }
    for (const auto& [_, b] : r.trials) {
      if (b.status() == TrialStatus::Reconstructed) trials_reconstructed_++;
    }
    std::unique_lock lock(sessions_mutex_);
    sessions_[r.session_id] = std::move(slot);
    ++loaded;
  }
  return loaded;
}

std::string AssemblyService::export_trial_csv(const std::string& id, std::uint64_t trial) const {
  auto slot = const_cast<AssemblyService*>(this)->slot_for(id, false);
  if (!slot) throw UnknownSession(id);
  {
    std::lock_guard lock(slot->mutex);
    const auto it = slot->record.trials.find(trial);
    if (it == slot->record.trials.end() || it->second.status() != TrialStatus::Reconstructed) {
      throw NotReady("trial " + std::to_string(trial) + " of session " + id + " is not reconstructed");
    }
  }
  auto csv = storage_->get(trial_csv_key(id, trial));
  if (!csv) throw NotReady("trial " + std::to_string(trial) + " of session " + id + " has no trajectory export");
  return std::move(*csv);
}

std::string AssemblyService::export_events_csv(const std::string& id) const {
  auto slot = const_cast<AssemblyService*>(this)->slot_for(id, false);
  if (!slot) throw UnknownSession(id);
  std::lock_guard lock(slot->mutex);
  auto csv = storage_->get(events_csv_key(id));
  return csv ? std::move(*csv) : std::string(kEventsCsvHeader);
}

SessionSummary AssemblyService::summarize(const SessionRecord& r) {
  SessionSummary s;
  s.session_id = r.session_id;
  s.participant_id = r.participant_id;
  s.treatment = r.treatment;
  s.cohort = r.cohort;
  s.os = r.os;
  s.browser = r.browser;
  s.onboarding_passed = r.onboarding_passed;
  s.state = r.state;
  s.created_ts_ms = r.created_ts_ms;
  s.updated_ts_ms = r.updated_ts_ms;
  s.first_event_ts_ms = r.first_event_ts_ms;
  s.completed_event_ts_ms = r.completed_event_ts_ms;
  if (!r.events.empty()) s.last_event_ts_ms = r.events.back().ts_ms;
  s.event_count = r.events.size();
  for (const auto& [k, b] : r.trials) {
    if (b.status() == TrialStatus::Reconstructed) s.reconstructed_trials.push_back(k);
  }
  s.submitted_code = r.submitted_code;
  s.code_verified = r.code_verified;
  return s;
}

std::vector<SessionSummary> AssemblyService::sessions() const {
  std::vector<std::shared_ptr<Slot>> slots;
  {
    std::shared_lock lock(sessions_mutex_);
    for (const auto& [_, slot] : sessions_) slots.push_back(slot);
  }
  std::vector<SessionSummary> out;
  out.reserve(slots.size());
  for (const auto& slot : slots) {
    std::lock_guard lock(slot->mutex);
    out.push_back(summarize(slot->record));
  }
  return out;
}

std::optional<SessionSummary> AssemblyService::find(const std::string& id) const {
  auto slot = const_cast<AssemblyService*>(this)->slot_for(id, false);
  if (!slot) return std::nullopt;
  std::lock_guard lock(slot->mutex);
  return summarize(slot->record);
}

ServiceStatus AssemblyService::status() const {
  ServiceStatus s;
  s.uptime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
  for (auto state : {SessionState::Onboarding, SessionState::InTrial, SessionState::Offboarding,
                     SessionState::Completed, SessionState::Failed, SessionState::Abandoned}) {
    s.sessions_by_state[std::string(to_string(state))] = 0;
  }
  for (const auto& summary : sessions()) {
    ++s.sessions_total;
    ++s.sessions_by_state[std::string(to_string(summary.state))];
  }
  s.trials_reconstructed = trials_reconstructed_.load();
  s.bytes_ingested = bytes_ingested_.load();
  return s;
}

void AssemblyService::record_code(const std::string& id, const std::string& code, bool verified) {
  auto slot = slot_for(id, false);
  if (!slot) throw UnknownSession(id);
  std::lock_guard lock(slot->mutex);
  slot->record.submitted_code = code;
  slot->record.code_verified = slot->record.code_verified || verified;
  slot->record.updated_ts_ms = clock_();
  persist_snapshot(slot->record);
}

std::size_t AssemblyService::sweep_idle(std::int64_t now_ms) {
  std::vector<std::shared_ptr<Slot>> slots;
  {
    std::shared_lock lock(sessions_mutex_);
    for (const auto& [_, slot] : sessions_) slots.push_back(slot);
  }
  std::size_t moved = 0;
  for (const auto& slot : slots) {
    std::lock_guard lock(slot->mutex);
    auto& r = slot->record;
    if (is_terminal(r.state) || now_ms - r.updated_ts_ms <= config_.idle_timeout_ms) continue;
    r.state = SessionState::Abandoned;
    r.updated_ts_ms = now_ms;
    persist_snapshot(r);
    ++moved;
  }
  return moved;
}

}  // namespace exac::assembly
