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

#include <chrono>
#include <filesystem>
#include <string>

#include "exac/manifest/lifecycle.hpp"

namespace exac::cli {

struct LocalExecutorConfig {
  std::filesystem::path root;  // resource directory
  std::filesystem::path manifest_path;
  std::filesystem::path serve_exe;
  std::string bind_host = "127.0.0.1";
  int port = 0;
  std::chrono::milliseconds ready_timeout{10'000};
};

// Provisions resources as local artifacts: a data directory, a detached
// `serve` process, static console files and mock recruitment HITs.
class LocalExecutor final : public manifest::Executor {
 public:
  explicit LocalExecutor(LocalExecutorConfig config);

  manifest::Attrs create(const manifest::Action& action, const manifest::ExperimentManifest& manifest,
                         const manifest::LifecycleState& state) override;
  // The bucket's data outlives teardown; everything else is removed.
  void destroy(const manifest::Resource& resource) override;

 private:
  manifest::Attrs start_service(const manifest::LifecycleState& state);
  void stop_service(const manifest::Resource& resource);

  LocalExecutorConfig config_;
};

// Starts `argv` detached from the caller (own session, stdio to `log`).
// Returns once the intermediate child has exited.
void spawn_detached(const std::vector<std::string>& argv, const std::filesystem::path& log);

}  // namespace exac::cli
