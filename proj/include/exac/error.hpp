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

#include <stdexcept>
#include <string>

namespace exac {

// Root of every error the library throws. Subsystems derive their own kinds
// so callers can map them to exit codes / HTTP statuses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unknown field or wrong type in a document.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// A value parsed fine but breaks a domain invariant.
class InvariantError : public Error {
 public:
  using Error::Error;
};

// Wire-level decode failure. `path()` names the offending field ("seq",
// "payload.b64", "$" for the document root).
class DecodeError : public Error {
 public:
  DecodeError(std::string path, const std::string& what)
      : Error("decode error at '" + path + "': " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace exac
