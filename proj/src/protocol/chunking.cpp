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

#include "exac/protocol/chunking.hpp"

#include "exac/error.hpp"

namespace exac::protocol {

ChunkedStream chunk_payload(std::string_view payload, std::size_t chunk_size,
                            const StreamContext& ctx) {
  if (chunk_size == 0) throw InvariantError("chunk_size must be >= 1");
  ChunkedStream out;
  out.header.session = ctx.session;
  out.header.trial = ctx.trial;
  out.header.ts_ms = ctx.ts_ms;
  HeaderPayload header;
  header.sample_hz = ctx.sample_hz;
  out.header.payload = header;

  const std::size_t count = (payload.size() + chunk_size - 1) / chunk_size;
  out.chunks.reserve(count);
  for (std::size_t seq = 0; seq < count; ++seq) {
    out.chunks.push_back(WireEnvelope{kProtocolVersion, ctx.session, ctx.trial, seq, ctx.ts_ms,
                                      ChunkPayload{std::string(payload.substr(seq * chunk_size, chunk_size))}});
  }

  out.tail.session = ctx.session;
  out.tail.trial = ctx.trial;
  out.tail.ts_ms = ctx.ts_ms;
  out.tail.payload = TailPayload{count, compute_checksum(payload)};
  return out;
}

}  // namespace exac::protocol
