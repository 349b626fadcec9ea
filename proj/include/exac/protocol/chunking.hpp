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

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "exac/protocol/envelope.hpp"

namespace exac::protocol {

struct StreamContext {
  std::string session;
  std::uint64_t trial = 0;
  std::int64_t ts_ms = 0;
  double sample_hz = 50.0;
};

struct ChunkedStream {
  WireEnvelope header;
  std::vector<WireEnvelope> chunks;  // seq 0..n-1
  WireEnvelope tail;
};

// Splits `payload` into ceil(len/chunk_size) chunks (all but the last full)
// framed by a header and a tail carrying the count and CRC. chunk_size must
// be >= 1.
ChunkedStream chunk_payload(std::string_view payload, std::size_t chunk_size,
                            const StreamContext& context);

}  // namespace exac::protocol
