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
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "exac/error.hpp"

namespace exac::http {

// No response at all (connection refused, timeout, reset).
class TransportError : public Error {
 public:
  using Error::Error;
};

struct Endpoint {
  std::string host;
  int port = 0;

  std::string url() const { return "http://" + host + ":" + std::to_string(port); }
};

// Accepts "http://host:port" (trailing slash allowed) or "host:port".
// Throws InvariantError otherwise. Port 0 (any free port) is only valid
// for a listener.
Endpoint parse_endpoint(const std::string& text, bool allow_any_port = false);

struct Response {
  int status = 0;
  std::string body;
  std::string content_type;

  nlohmann::json json() const;
};

// Blocking HTTP/1.1 client with keep-alive. Not thread-safe; use one per
// thread.
class Client {
 public:
  explicit Client(const Endpoint& endpoint, std::chrono::milliseconds timeout = std::chrono::seconds(5));
  ~Client();
  Client(Client&&) noexcept;
  Client& operator=(Client&&) noexcept;

  Response get(const std::string& path);
  Response post(const std::string& path, const std::string& body,
                const std::string& content_type = "application/json");
  Response post_json(const std::string& path, const nlohmann::json& body) { return post(path, body.dump()); }

  const Endpoint& endpoint() const { return endpoint_; }

 private:
  struct Impl;
  Endpoint endpoint_;
  std::unique_ptr<Impl> impl_;
};

// GET /v1/health answered with 200.
bool probe_health(const Endpoint& endpoint, std::chrono::milliseconds timeout = std::chrono::milliseconds(500));

}  // namespace exac::http
