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

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "exac/assembly/service.hpp"
#include "exac/completion/completion.hpp"
#include "exac/management/health.hpp"
#include "exac/management/management.hpp"
#include "exac/management/recruitment.hpp"
#include "exac/manifest/manifest.hpp"

namespace exac::server {

struct HostConfig {
  std::string bind_host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  // Storage root; in-memory storage when unset.
  std::optional<std::filesystem::path> data_dir;
  std::optional<std::filesystem::path> registry_path;
  std::optional<std::filesystem::path> recruitment_log;
  manifest::ExperimentManifest manifest;
  assembly::AssemblyConfig assembly;
  management::ManagementConfig management;
  std::uint64_t challenge_seed = 0;
  std::int64_t sweep_interval_ms = 60'000;
  // Endpoint polled for /v1/mgmt/health; the host itself when unset.
  std::optional<std::string> monitor_endpoint;
  std::int64_t monitor_interval_ms = 1000;
};

// The assembly service, completion challenges and management operations
// behind one HTTP listener.
class ServiceHost {
 public:
  explicit ServiceHost(HostConfig config);
  ~ServiceHost();
  ServiceHost(const ServiceHost&) = delete;
  ServiceHost& operator=(const ServiceHost&) = delete;

  // Binds, recovers persisted sessions and serves on background threads.
  // Returns the bound port. Throws Error when the port is unavailable.
  int start();
  void stop();

  int port() const { return port_; }
  std::string endpoint() const;

  assembly::AssemblyService& assembly() { return *assembly_; }
  completion::ChallengeStore& challenges() { return challenges_; }
  management::Management& management() { return *management_; }
  management::Registry& registry() { return *registry_; }
  management::MockRecruitmentClient& recruitment() { return *recruitment_; }

  std::optional<completion::Challenge> find_challenge(const std::string& session_id) const;
  // Issues and persists a fresh challenge. Throws assembly::UnknownSession.
  completion::Challenge issue_challenge(const std::string& session_id);
  // Checks a participant's code against the session's challenge and
  // records it. Throws assembly::UnknownSession.
  bool submit_code(const std::string& session_id, const std::string& code);

 private:
  struct Http;

  void register_routes();
  void sweep_loop();

  HostConfig config_;
  std::shared_ptr<assembly::StorageBackend> storage_;
  std::unique_ptr<assembly::AssemblyService> assembly_;
  completion::ChallengeStore challenges_;
  std::shared_ptr<management::Registry> registry_;
  std::shared_ptr<management::MockRecruitmentClient> recruitment_;
  std::unique_ptr<management::Management> management_;
  std::unique_ptr<management::HealthMonitor> monitor_;
  std::unique_ptr<Http> http_;

  int port_ = 0;
  std::thread listener_;
  std::thread sweeper_;
  std::mutex sweep_mutex_;
  std::condition_variable sweep_cv_;
  bool stopping_ = false;
};

}  // namespace exac::server
