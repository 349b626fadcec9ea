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
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "exac/protocol/checksum.hpp"

namespace exac::protocol {

inline constexpr int kProtocolVersion = 1;

enum class Kind { event, header, chunk, tail };

std::string_view to_string(Kind kind);

struct EventPayload {
  std::string name;
  nlohmann::json data = nlohmann::json::object();

  friend bool operator==(const EventPayload&, const EventPayload&) = default;
};

struct HeaderPayload {
  std::string stream = "trajectory";
  std::vector<std::string> fields = {"t", "x", "y", "z", "yaw", "pitch"};
  double sample_hz = 50.0;

  friend bool operator==(const HeaderPayload&, const HeaderPayload&) = default;
};

// Holds the decoded bytes; base64 only exists on the wire.
struct ChunkPayload {
  std::string bytes;

  friend bool operator==(const ChunkPayload&, const ChunkPayload&) = default;
};

struct TailPayload {
  std::uint64_t chunk_count = 0;
  Checksum crc;

  friend bool operator==(const TailPayload&, const TailPayload&) = default;
};

using Payload = std::variant<EventPayload, HeaderPayload, ChunkPayload, TailPayload>;

// One JSON message on the wire. The kind is implied by the payload
// alternative; `seq` is present exactly for chunks.
struct WireEnvelope {
  int v = kProtocolVersion;
  std::string session;
  std::uint64_t trial = 0;
  std::optional<std::uint64_t> seq;
  std::int64_t ts_ms = 0;
  Payload payload;

  Kind kind() const { return static_cast<Kind>(payload.index()); }

  friend bool operator==(const WireEnvelope&, const WireEnvelope&) = default;
};

// Session ids end up in storage keys and URLs: 1..128 chars of
// [A-Za-z0-9._-], not starting with '.'.
bool valid_session_id(std::string_view id);

// Throws InvariantError if the envelope breaks its invariants.
void validate(const WireEnvelope& envelope);

// Field order v, session, kind, trial, seq, ts_ms, payload. Deterministic.
std::string encode_envelope(const WireEnvelope& envelope);

// Strict decode: unknown fields, wrong types and broken invariants raise
// DecodeError naming the field path.
WireEnvelope decode_envelope(std::string_view bytes);

}  // namespace exac::protocol
