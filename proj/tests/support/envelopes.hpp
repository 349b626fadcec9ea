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

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "exac/protocol/chunking.hpp"
#include "exac/protocol/envelope.hpp"

namespace exac::testing {

inline protocol::WireEnvelope event(const std::string& session, const std::string& name,
                                    nlohmann::json data = nlohmann::json::object(), std::uint64_t trial = 0,
                                    std::int64_t ts_ms = 1000) {
  protocol::WireEnvelope e;
  e.session = session;
  e.trial = trial;
  e.ts_ms = ts_ms;
  if (data.is_null()) data = nlohmann::json::object();
  e.payload = protocol::EventPayload{name, std::move(data)};
  return e;
}

// Header, chunks, tail in wire order.
inline std::vector<protocol::WireEnvelope> stream_envelopes(const std::string& session, std::uint64_t trial,
                                                            const std::string& payload, std::size_t chunk_size) {
  auto s = protocol::chunk_payload(payload, chunk_size, {session, trial, 1000, 50.0});
  std::vector<protocol::WireEnvelope> out;
  out.reserve(s.chunks.size() + 2);
  out.push_back(std::move(s.header));
  for (auto& c : s.chunks) out.push_back(std::move(c));
  out.push_back(std::move(s.tail));
  return out;
}

}  // namespace exac::testing
