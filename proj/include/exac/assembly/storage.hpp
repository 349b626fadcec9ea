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

#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace exac::assembly {

// Object-store style persistence. Implementations must tolerate concurrent
// put/get on distinct keys.
class StorageBackend {
 public:
  virtual ~StorageBackend() = default;

  virtual void put(const std::string& key, std::string_view bytes) = 0;
  virtual std::optional<std::string> get(const std::string& key) const = 0;
  // Keys starting with `prefix`, sorted.
  virtual std::vector<std::string> list(std::string_view prefix) const = 0;
};

// Keys map to files under `root`; '/' separates directories. Writes are
// atomic (temp + rename).
class LocalDirectoryStorage final : public StorageBackend {
 public:
  explicit LocalDirectoryStorage(std::filesystem::path root);

  void put(const std::string& key, std::string_view bytes) override;
  std::optional<std::string> get(const std::string& key) const override;
  std::vector<std::string> list(std::string_view prefix) const override;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path resolve(const std::string& key) const;

  std::filesystem::path root_;
};

// Stand-in for a cloud bucket.
class InMemoryStorage final : public StorageBackend {
 public:
  void put(const std::string& key, std::string_view bytes) override;
  std::optional<std::string> get(const std::string& key) const override;
  std::vector<std::string> list(std::string_view prefix) const override;

  std::size_t put_count() const;
  std::size_t put_count(const std::string& key) const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::string> objects_;
  std::map<std::string, std::size_t> puts_;
};

}  // namespace exac::assembly
