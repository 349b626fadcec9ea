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

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exac/error.hpp"
#include "exac/manifest/manifest.hpp"
#include "exac/util/fs.hpp"

namespace exac::manifest {

// Listed in dependency order: each kind requires all kinds before it.
enum class ResourceKind { storage_bucket, assembly_service, static_content, recruitment_hits };
inline constexpr std::array<ResourceKind, 4> kResourceOrder = {
    ResourceKind::storage_bucket, ResourceKind::assembly_service, ResourceKind::static_content,
    ResourceKind::recruitment_hits};

enum class ResourceStatus { planned, created, destroyed };

std::string_view to_string(ResourceKind kind);
std::string_view to_string(ResourceStatus status);

using Attrs = std::map<std::string, std::string>;

struct Resource {
  std::string id;
  ResourceKind kind = ResourceKind::storage_bucket;
  ResourceStatus status = ResourceStatus::planned;
  Attrs attrs;

  friend bool operator==(const Resource&, const Resource&) = default;
};

struct LifecycleState {
  std::vector<Resource> resources;
  std::uint64_t revision = 0;

  const Resource* find(ResourceKind kind) const;
  Resource* find(ResourceKind kind);
  std::size_t created_count() const;

  friend bool operator==(const LifecycleState&, const LifecycleState&) = default;
};

class StateCorrupt : public Error {
 public:
  using Error::Error;
};

class ExecutorError : public Error {
 public:
  using Error::Error;
};

nlohmann::json to_json(const LifecycleState& state);
// Throws StateCorrupt on malformed input.
LifecycleState state_from_json(const nlohmann::json& doc);
LifecycleState parse_state(std::string_view text);

// Throws StateCorrupt unless the created resources form a prefix of the
// dependency order.
void check_order(const LifecycleState& state);

struct Action {
  ResourceKind kind;
  std::string resource_id;

  friend bool operator==(const Action&, const Action&) = default;
};

std::string resource_id(const ExperimentManifest& manifest, ResourceKind kind);

// Create actions for every resource not currently created, in dependency
// order.
std::vector<Action> plan(const ExperimentManifest& manifest, const LifecycleState& state);

// Drives the external side effects of the lifecycle.
class Executor {
 public:
  virtual ~Executor() = default;
  // Returns attributes to record on the resource.
  virtual Attrs create(const Action& action, const ExperimentManifest& manifest, const LifecycleState& state) = 0;
  virtual void destroy(const Resource& resource) = 0;
};

// Called with the state after every mutation.
using Persist = std::function<void(const LifecycleState&)>;

// Runs `actions` in order. On ExecutorError the state reached so far has
// already been persisted and the error is rethrown.
LifecycleState apply(const std::vector<Action>& actions, LifecycleState state, Executor& executor,
                     const ExperimentManifest& manifest, const Persist& persist = {});

// Destroys created resources in reverse dependency order.
LifecycleState teardown(LifecycleState state, Executor& executor, const Persist& persist = {});

// Records calls; optionally fails on the n-th call (1-based).
class MockExecutor final : public Executor {
 public:
  explicit MockExecutor(std::optional<std::size_t> fail_on_call = std::nullopt) : fail_on_call_(fail_on_call) {}

  Attrs create(const Action& action, const ExperimentManifest& manifest, const LifecycleState& state) override;
  void destroy(const Resource& resource) override;

  const std::vector<std::string>& calls() const { return calls_; }

 private:
  void record(std::string call);

  std::optional<std::size_t> fail_on_call_;
  std::vector<std::string> calls_;
};

// The state file plus an advisory lock held for the store's lifetime.
class StateStore {
 public:
  // Throws util::FileLock::LockBusy when another process holds the lock.
  explicit StateStore(std::filesystem::path path);

  LifecycleState load() const;
  void save(const LifecycleState& state) const;
  Persist persister() const {
    return [this](const LifecycleState& s) { save(s); };
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::unique_ptr<util::FileLock> lock_;
};

}  // namespace exac::manifest
