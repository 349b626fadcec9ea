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
#include <string>
#include <string_view>

namespace exac::protocol {

// CRC-32/ISO-HDLC: reflected polynomial 0xEDB88320, init and final xor
// 0xFFFFFFFF. On the wire as 8 lowercase hex digits.
struct Checksum {
  std::uint32_t crc32 = 0;

  std::string hex() const;
  // Throws DecodeError("crc32") unless exactly 8 lowercase hex digits.
  static Checksum from_hex(std::string_view text);

  friend bool operator==(const Checksum&, const Checksum&) = default;
};

Checksum compute_checksum(std::string_view payload);

namespace crc32 {

// Kernels operate on the raw (pre-inverted) register; callers seed with
// 0xFFFFFFFF and xor the result. Every kernel must agree bit for bit with
// `Kernel::scalar`.
enum class Kernel { scalar, pclmul };

std::uint32_t update_scalar(std::uint32_t reg, const unsigned char* data, std::size_t len);
std::uint32_t update_pclmul(std::uint32_t reg, const unsigned char* data, std::size_t len);

bool supported(Kernel kernel);

// Picked once: the fastest supported kernel, unless EXAC_CRC_KERNEL=scalar.
Kernel active_kernel();
const char* kernel_name(Kernel kernel);

std::uint32_t update(std::uint32_t reg, const unsigned char* data, std::size_t len, Kernel kernel);

// Incremental CRC over a stream of pieces.
class Accumulator {
 public:
  Accumulator() = default;
  explicit Accumulator(Kernel kernel) : kernel_(kernel) {}

  void update(std::string_view bytes) {
    reg_ = crc32::update(reg_, reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(),
                         kernel_);
  }
  Checksum finish() const { return Checksum{reg_ ^ 0xFFFFFFFFu}; }

 private:
  Kernel kernel_ = active_kernel();
  std::uint32_t reg_ = 0xFFFFFFFFu;
};

}  // namespace crc32
}  // namespace exac::protocol
