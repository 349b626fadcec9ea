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

#include "exac/cli/local_executor.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "exac/http/client.hpp"
#include "exac/management/management.hpp"
#include "exac/util/clock.hpp"
#include "exac/util/fs.hpp"

namespace exac::cli {

namespace {

using manifest::ResourceKind;

const std::string& attr(const manifest::LifecycleState& state, ResourceKind kind, const std::string& key) {
  const auto* r = state.find(kind);
  if (!r || r->status != manifest::ResourceStatus::created || !r->attrs.count(key)) {
    throw manifest::ExecutorError(std::string(to_string(kind)) + " is not provisioned");
  }
  return r->attrs.at(key);
}

// Running and not a zombie.
bool process_alive(pid_t pid) {
  if (::kill(pid, 0) != 0) return errno != ESRCH;
  std::ifstream stat("/proc/" + std::to_string(pid) + "/stat");
  std::string line;
  if (!std::getline(stat, line)) return false;
  const auto close = line.rfind(')');
  return close == std::string::npos || close + 2 >= line.size() || line[close + 2] != 'Z';
}

bool is_our_server(pid_t pid) {
  std::ifstream f("/proc/" + std::to_string(pid) + "/cmdline", std::ios::binary);
  std::string cmd((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return cmd.find(std::string("serve") + '\0') != std::string::npos;
}

constexpr const char* kIndexHtml = R"(<!doctype html>
<html>
<head><meta charset="utf-8"><title>Experiment console</title></head>
<body>
<h1>Experiment console</h1>
<p>Service endpoint and poll interval are read from <a href="config.json">config.json</a>.</p>
<pre id="status">loading...</pre>
<script>
fetch('config.json').then(r => r.json()).then(cfg =>
  fetch(cfg.endpoint + '/v1/mgmt/funnel').then(r => r.json())
    .then(f => { document.getElementById('status').textContent = JSON.stringify(f, null, 2); }));
</script>
</body>
</html>
)";

}  // namespace

void spawn_detached(const std::vector<std::string>& argv, const std::filesystem::path& log) {
  std::vector<char*> raw;
  for (const auto& a : argv) raw.push_back(const_cast<char*>(a.c_str()));
  raw.push_back(nullptr);
  const int log_fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (log_fd < 0) throw manifest::ExecutorError("cannot open " + log.string() + ": " + std::strerror(errno));
  const int null_fd = ::open("/dev/null", O_RDONLY | O_CLOEXEC);

  const pid_t child = ::fork();
  if (child < 0) {
    ::close(log_fd);
    throw manifest::ExecutorError(std::string("fork failed: ") + std::strerror(errno));
  }
  if (child == 0) {
    ::setsid();
    if (::fork() != 0) ::_exit(0);
    ::dup2(null_fd, 0);
    ::dup2(log_fd, 1);
    ::dup2(log_fd, 2);
    // Inherited descriptors (state-file locks, sockets) must not outlive
    // the caller.
    if (::syscall(SYS_close_range, 3U, ~0U, 0U) != 0) {
      for (int fd = 3; fd < 1024; ++fd) ::close(fd);
    }
    sigset_t none;
    sigemptyset(&none);
    ::sigprocmask(SIG_SETMASK, &none, nullptr);
    ::execv(raw[0], raw.data());
    ::_exit(127);
  }
  ::close(log_fd);
  if (null_fd >= 0) ::close(null_fd);
  int status = 0;
  ::waitpid(child, &status, 0);
}

LocalExecutor::LocalExecutor(LocalExecutorConfig config) : config_(std::move(config)) {}

manifest::Attrs LocalExecutor::create(const manifest::Action& action, const manifest::ExperimentManifest& manifest,
                                      const manifest::LifecycleState& state) {
  switch (action.kind) {
    case ResourceKind::storage_bucket: {
      const auto path = config_.root / "bucket";
      std::filesystem::create_directories(path);
      return {{"path", std::filesystem::absolute(path).string()}};
    }
    case ResourceKind::assembly_service:
      return start_service(state);
    case ResourceKind::static_content: {
      const auto& endpoint = attr(state, ResourceKind::assembly_service, "endpoint");
      const auto dir = config_.root / "static";
      std::filesystem::create_directories(dir);
      util::write_file_atomic(dir / "index.html", kIndexHtml);
      util::write_file_atomic(dir / "config.json",
                              nlohmann::json{{"endpoint", endpoint}, {"poll_ms", 2000}}.dump(2) + "\n");
      const auto abs = std::filesystem::absolute(dir);
      return {{"path", abs.string()}, {"url", "file://" + (abs / "index.html").string()}};
    }
    case ResourceKind::recruitment_hits: {
      const auto& endpoint = attr(state, ResourceKind::assembly_service, "endpoint");
      auto registry = std::make_shared<management::Registry>(config_.root / "hits.jsonl");
      auto client = std::make_shared<management::MockRecruitmentClient>(config_.root / "recruitment.jsonl");
      management::Management mgmt(
          manifest, registry, client, [](const std::string&) { return std::nullopt; },
          [](const std::string&) { return std::nullopt; });
      const management::HitSpec spec{manifest.name, manifest.reward_base_usd, 1, endpoint};
      try {
        const auto ids = mgmt.create_hits(spec, 1, util::now_ms());
        return {{"hit_id", ids.at(0)}, {"journal", std::filesystem::absolute(config_.root / "hits.jsonl").string()}};
      } catch (const management::ClientError& e) {
        throw manifest::ExecutorError(e.what());
      }
    }
  }
  throw manifest::ExecutorError("unknown resource kind");
}

manifest::Attrs LocalExecutor::start_service(const manifest::LifecycleState& state) {
  const auto& bucket = attr(state, ResourceKind::storage_bucket, "path");
  std::filesystem::create_directories(config_.root);
  const auto ready = std::filesystem::absolute(config_.root / "service.ready.json");
  const auto log = std::filesystem::absolute(config_.root / "service.log");
  std::filesystem::remove(ready);

  spawn_detached({config_.serve_exe.string(), "serve", "--manifest",
                  std::filesystem::absolute(config_.manifest_path).string(), "--out", bucket, "--registry",
                  (std::filesystem::path(bucket) / "registry.jsonl").string(), "--endpoint",
                  "http://" + config_.bind_host + ":" + std::to_string(config_.port), "--ready-file", ready.string()},
                 log);

  const auto deadline = std::chrono::steady_clock::now() + config_.ready_timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (auto text = util::try_read_file(ready)) {
      const auto doc = nlohmann::json::parse(*text, nullptr, false);
      if (!doc.is_discarded() && doc.contains("endpoint") && doc.contains("pid")) {
        const auto endpoint = doc["endpoint"].get<std::string>();
        if (http::probe_health(http::parse_endpoint(endpoint))) {
          return {{"endpoint", endpoint},
                  {"pid", std::to_string(doc["pid"].get<long>())},
                  {"log", log.string()}};
        }
      }
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  throw manifest::ExecutorError("service did not become healthy; see " + log.string());
}

void LocalExecutor::stop_service(const manifest::Resource& resource) {
  auto it = resource.attrs.find("pid");
  if (it == resource.attrs.end()) return;
  const pid_t pid = static_cast<pid_t>(std::stol(it->second));
  if (pid <= 1 || !process_alive(pid) || !is_our_server(pid)) return;
  ::kill(pid, SIGTERM);
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
  while (process_alive(pid) && std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  if (process_alive(pid)) ::kill(pid, SIGKILL);
}

void LocalExecutor::destroy(const manifest::Resource& resource) {
  switch (resource.kind) {
    case ResourceKind::storage_bucket:
    case ResourceKind::recruitment_hits:
      return;
    case ResourceKind::assembly_service:
      stop_service(resource);
      return;
    case ResourceKind::static_content:
      if (auto it = resource.attrs.find("path"); it != resource.attrs.end()) std::filesystem::remove_all(it->second);
      return;
  }
}

}  // namespace exac::cli
