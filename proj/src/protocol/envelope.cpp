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

#include "exac/protocol/envelope.hpp"

#include <cmath>
#include <set>

#include "exac/error.hpp"
#include "exac/util/base64.hpp"

namespace exac::protocol {
namespace {

using nlohmann::json;

std::string dump_json(const json& value) {
  try {
    return value.dump();
  } catch (const json::exception& e) {
    throw InvariantError(std::string("cannot serialize: ") + e.what());
  }
}

void require_keys(const json& obj, const std::string& prefix, std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* name : allowed) ok = ok || key == name;
    if (!ok) throw DecodeError(prefix + key, "unknown field");
  }
}

const json& field(const json& obj, const std::string& prefix, const char* name) {
  const auto it = obj.find(name);
  if (it == obj.end()) throw DecodeError(prefix + name, "missing");
  return *it;
}

std::uint64_t as_u64(const json& value, const std::string& path) {
  if (value.is_number_unsigned()) return value.get<std::uint64_t>();
  if (value.is_number_integer()) {
    const auto v = value.get<std::int64_t>();
    if (v >= 0) return static_cast<std::uint64_t>(v);
  }
  throw DecodeError(path, "expected non-negative integer");
}

std::string as_string(const json& value, const std::string& path) {
  if (!value.is_string()) throw DecodeError(path, "expected string");
  return value.get<std::string>();
}

Payload decode_payload(Kind kind, const json& p) {
  const std::string prefix = "payload.";
  if (!p.is_object()) throw DecodeError("payload", "expected object");
  switch (kind) {
    case Kind::event: {
      require_keys(p, prefix, {"name", "data"});
      EventPayload e;
      e.name = as_string(field(p, prefix, "name"), "payload.name");
      if (e.name.empty()) throw DecodeError("payload.name", "empty");
      const auto& data = field(p, prefix, "data");
      if (!data.is_object()) throw DecodeError("payload.data", "expected object");
      e.data = data;
      return e;
    }
    case Kind::header: {
      require_keys(p, prefix, {"stream", "fields", "sample_hz"});
      HeaderPayload h;
      h.stream = as_string(field(p, prefix, "stream"), "payload.stream");
      if (h.stream != "trajectory") throw DecodeError("payload.stream", "unsupported stream");
      const auto& fields = field(p, prefix, "fields");
      if (!fields.is_array()) throw DecodeError("payload.fields", "expected array");
      h.fields.clear();
      for (std::size_t i = 0; i < fields.size(); ++i) {
        h.fields.push_back(as_string(fields[i], "payload.fields[" + std::to_string(i) + "]"));
      }
      const auto& hz = field(p, prefix, "sample_hz");
      if (!hz.is_number() || !(hz.get<double>() > 0)) throw DecodeError("payload.sample_hz", "expected positive number");
      h.sample_hz = hz.get<double>();
      return h;
    }
    case Kind::chunk: {
      require_keys(p, prefix, {"b64"});
      try {
        return ChunkPayload{util::base64_decode(as_string(field(p, prefix, "b64"), "payload.b64"))};
      } catch (const DecodeError& e) {
        if (e.path() == "b64") throw DecodeError("payload.b64", e.what());
        throw;
      }
    }
    case Kind::tail: {
      require_keys(p, prefix, {"chunk_count", "crc32"});
      TailPayload t;
      t.chunk_count = as_u64(field(p, prefix, "chunk_count"), "payload.chunk_count");
      try {
        t.crc = Checksum::from_hex(as_string(field(p, prefix, "crc32"), "payload.crc32"));
      } catch (const DecodeError& e) {
        if (e.path() == "crc32") throw DecodeError("payload.crc32", e.what());
        throw;
      }
      return t;
    }
  }
  throw DecodeError("kind", "unreachable");
}

std::string encode_payload(const Payload& payload) {
  return std::visit(
      [](const auto& p) -> std::string {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, EventPayload>) {
          return "{\"name\":" + dump_json(p.name) + ",\"data\":" + dump_json(p.data) + "}";
        } else if constexpr (std::is_same_v<T, HeaderPayload>) {
          return "{\"stream\":" + dump_json(p.stream) + ",\"fields\":" + dump_json(p.fields) +
                 ",\"sample_hz\":" + dump_json(p.sample_hz) + "}";
        } else if constexpr (std::is_same_v<T, ChunkPayload>) {
          return "{\"b64\":\"" + util::base64_encode(p.bytes) + "\"}";
        } else {
          return "{\"chunk_count\":" + std::to_string(p.chunk_count) + ",\"crc32\":\"" + p.crc.hex() + "\"}";
        }
      },
      payload);
}

}  // namespace

std::string_view to_string(Kind kind) {
  switch (kind) {
    case Kind::event:
      return "event";
    case Kind::header:
      return "header";
    case Kind::chunk:
      return "chunk";
    case Kind::tail:
      return "tail";
  }
  return "?";
}

bool valid_session_id(std::string_view id) {
  if (id.empty() || id.size() > 128 || id.front() == '.') return false;
  for (const char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    if (!ok) return false;
  }
  return true;
}

void validate(const WireEnvelope& e) {
  if (e.v != kProtocolVersion) throw InvariantError("unsupported protocol version");
  if (!valid_session_id(e.session)) throw InvariantError("invalid session id");
  if ((e.kind() == Kind::chunk) != e.seq.has_value()) {
    throw InvariantError("seq must be present exactly for chunk envelopes");
  }
  if (e.ts_ms < 0) throw InvariantError("negative ts_ms");
  if (const auto* ev = std::get_if<EventPayload>(&e.payload)) {
    if (ev->name.empty()) throw InvariantError("empty event name");
    if (!ev->data.is_object()) throw InvariantError("event data must be an object");
  }
  if (const auto* h = std::get_if<HeaderPayload>(&e.payload)) {
    if (!(h->sample_hz > 0) || !std::isfinite(h->sample_hz)) throw InvariantError("sample_hz must be positive");
  }
}

std::string encode_envelope(const WireEnvelope& e) {
  validate(e);
  std::string out;
  out.reserve(96);
  out += "{\"v\":";
  out += std::to_string(e.v);
  out += ",\"session\":";
  out += dump_json(e.session);
  out += ",\"kind\":\"";
  out += to_string(e.kind());
  out += "\",\"trial\":";
  out += std::to_string(e.trial);
  if (e.seq) {
    out += ",\"seq\":";
    out += std::to_string(*e.seq);
  }
  out += ",\"ts_ms\":";
  out += std::to_string(e.ts_ms);
  out += ",\"payload\":";
  out += encode_payload(e.payload);
  out += "}";
  return out;
}

WireEnvelope decode_envelope(std::string_view bytes) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw DecodeError("$", e.what());
  }
  if (!doc.is_object()) throw DecodeError("$", "expected object");
  require_keys(doc, "", {"v", "session", "kind", "trial", "seq", "ts_ms", "payload"});

  WireEnvelope e;
  const auto& v = field(doc, "", "v");
  if (!v.is_number_integer() || v.get<std::int64_t>() != kProtocolVersion) {
    throw DecodeError("v", "unsupported protocol version");
  }
  e.session = as_string(field(doc, "", "session"), "session");
  if (!valid_session_id(e.session)) throw DecodeError("session", "invalid session id");

  const auto kind_text = as_string(field(doc, "", "kind"), "kind");
  Kind kind;
  if (kind_text == "event") {
    kind = Kind::event;
  } else if (kind_text == "header") {
    kind = Kind::header;
  } else if (kind_text == "chunk") {
    kind = Kind::chunk;
  } else if (kind_text == "tail") {
    kind = Kind::tail;
  } else {
    throw DecodeError("kind", "unknown kind '" + kind_text + "'");
  }

  e.trial = as_u64(field(doc, "", "trial"), "trial");
  const auto seq = doc.find("seq");
  if (kind == Kind::chunk) {
    if (seq == doc.end()) throw DecodeError("seq", "missing");
    e.seq = as_u64(*seq, "seq");
  } else if (seq != doc.end()) {
    throw DecodeError("seq", "only chunk envelopes carry seq");
  }
  const auto& ts = field(doc, "", "ts_ms");
  if (!ts.is_number_integer()) throw DecodeError("ts_ms", "expected integer");
  if (ts.is_number_unsigned() && ts.get<std::uint64_t>() > std::uint64_t(INT64_MAX)) {
    throw DecodeError("ts_ms", "out of range");
  }
  e.ts_ms = ts.get<std::int64_t>();
  if (e.ts_ms < 0) throw DecodeError("ts_ms", "negative");
  e.payload = decode_payload(kind, field(doc, "", "payload"));
  return e;
}

}  // namespace exac::protocol
