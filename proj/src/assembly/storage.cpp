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

#include "exac/assembly/storage.hpp"

#include <algorithm>
#include <mutex>

#include "exac/error.hpp"
#include "exac/util/fs.hpp"

namespace exac::assembly {

LocalDirectoryStorage::LocalDirectoryStorage(std::filesystem::path root) : root_(std::move(root)) {
  std::filesystem::create_directories(root_);
}

std::filesystem::path LocalDirectoryStorage::resolve(const std::string& key) const {
  if (key.empty() || key.front() == '/') throw InvariantError("invalid storage key '" + key + "'");
  std::filesystem::path rel(key);
  for (const auto& part : rel) {
    if (part == ".." || part == ".") throw InvariantError("invalid storage key '" + key + "'");
  }
  return root_ / rel;
}

void LocalDirectoryStorage::put(const std::string& key, std::string_view bytes) {
  util::write_file_atomic(resolve(key), bytes);
}

std::optional<std::string> LocalDirectoryStorage::get(const std::string& key) const {
  return util::try_read_file(resolve(key));
}

std::vector<std::string> LocalDirectoryStorage::list(std::string_view prefix) const {
  std::vector<std::string> keys;
  std::error_code ec;
  for (auto it = std::filesystem::recursive_directory_iterator(root_, ec);
       !ec && it != std::filesystem::recursive_directory_iterator(); it.increment(ec)) {
    if (!it->is_regular_file()) continue;
    auto key = std::filesystem::relative(it->path(), root_).generic_string();
    if (key.find(".tmp.") != std::string::npos) continue;
    if (key.compare(0, prefix.size(), prefix) == 0) keys.push_back(std::move(key));
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

void InMemoryStorage::put(const std::string& key, std::string_view bytes) {
  std::unique_lock lock(mutex_);
  objects_[key] = std::string(bytes);
  ++puts_[key];
}

std::optional<std::string> InMemoryStorage::get(const std::string& key) const {
  std::shared_lock lock(mutex_);
  const auto it = objects_.find(key);
  if (it == objects_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> InMemoryStorage::list(std::string_view prefix) const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> keys;
  for (auto it = objects_.lower_bound(std::string(prefix));
       it != objects_.end() && it->first.compare(0, prefix.size(), prefix) == 0; ++it) {
    keys.push_back(it->first);
  }
  return keys;
}

std::size_t InMemoryStorage::put_count() const {
  std::shared_lock lock(mutex_);
  std::size_t total = 0;
  for (const auto& [_, n] : puts_) total += n;
  return total;
}

std::size_t InMemoryStorage::put_count(const std::string& key) const {
  std::shared_lock lock(mutex_);
  const auto it = puts_.find(key);
  return it == puts_.end() ? 0 : it->second;
}

}  // namespace exac::assembly
