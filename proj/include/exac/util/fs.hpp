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
#include <optional>
#include <string>
#include <string_view>

#include "exac/error.hpp"

namespace exac::util {

class IoError : public Error {
 public:
  using Error::Error;
};

std::string read_file(const std::filesystem::path& path);
std::optional<std::string> try_read_file(const std::filesystem::path& path);

// Writes to a sibling temp file, fsyncs, then renames over `path`. Readers
// observe either the old or the new content, never a torn file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// Appends one line and fsyncs.
void append_line(const std::filesystem::path& path, std::string_view line);

// Exclusive advisory lock (flock) on `path`, released on destruction.
// Acquisition never blocks: a held lock throws LockBusy.
class FileLock {
 public:
  class LockBusy : public Error {
   public:
    using Error::Error;
  };

  explicit FileLock(const std::filesystem::path& path);
  ~FileLock();
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

}  // namespace exac::util
