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

#include "exac/http/client.hpp"

#include <regex>

#include <httplib.h>

namespace exac::http {

Endpoint parse_endpoint(const std::string& text, bool allow_any_port) {
  static const std::regex kPattern(R"(^(?:http://)?([A-Za-z0-9.\-]+|\[[0-9A-Fa-f:]+\]):([0-9]{1,5})/?$)");
  std::smatch m;
  if (!std::regex_match(text, m, kPattern)) throw InvariantError("malformed endpoint '" + text + "'");
  const int port = std::stoi(m[2].str());
  if (port < (allow_any_port ? 0 : 1) || port > 65535) throw InvariantError("endpoint port out of range in '" + text + "'");
  return {m[1].str(), port};
}

nlohmann::json Response::json() const {
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("response is not JSON (status " + std::to_string(status) + "): " + e.what());
  }
}

struct Client::Impl {
  httplib::Client client;

  Impl(const Endpoint& ep, std::chrono::milliseconds timeout) : client(ep.host, ep.port) {
    client.set_keep_alive(true);
    client.set_tcp_nodelay(true);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
  }
};

Client::Client(const Endpoint& endpoint, std::chrono::milliseconds timeout)
    : endpoint_(endpoint), impl_(std::make_unique<Impl>(endpoint, timeout)) {}
Client::~Client() = default;
Client::Client(Client&&) noexcept = default;
Client& Client::operator=(Client&&) noexcept = default;

namespace {

Response convert(const httplib::Result& result, const Endpoint& ep, const std::string& path) {
  if (!result) {
    throw TransportError("request to " + ep.url() + path + " failed: " + httplib::to_string(result.error()));
  }
  return {result->status, result->body, result->get_header_value("Content-Type")};
}

}  // namespace

Response Client::get(const std::string& path) { return convert(impl_->client.Get(path), endpoint_, path); }

Response Client::post(const std::string& path, const std::string& body, const std::string& content_type) {
  return convert(impl_->client.Post(path, body, content_type), endpoint_, path);
}

bool probe_health(const Endpoint& endpoint, std::chrono::milliseconds timeout) {
  try {
    Client c(endpoint, timeout);
    return c.get("/v1/health").status == 200;
  } catch (const TransportError&) {
    return false;
  }
}

}  // namespace exac::http
