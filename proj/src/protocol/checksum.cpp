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

#include "exac/protocol/checksum.hpp"

#include <cstdlib>
#include <string>

#include "exac/error.hpp"

namespace exac::protocol {
namespace crc32 {

bool pclmul_available();

bool supported(Kernel kernel) {
  switch (kernel) {
    case Kernel::scalar:
      return true;
    case Kernel::pclmul:
      return pclmul_available();
  }
  return false;
}

Kernel active_kernel() {
  static const Kernel chosen = [] {
    if (const char* forced = std::getenv("EXAC_CRC_KERNEL")) {
      if (std::string_view(forced) == "scalar") return Kernel::scalar;
    }
    return supported(Kernel::pclmul) ? Kernel::pclmul : Kernel::scalar;
  }();
  return chosen;
}

const char* kernel_name(Kernel kernel) {
  return kernel == Kernel::pclmul ? "pclmul" : "scalar";
}

std::uint32_t update(std::uint32_t reg, const unsigned char* data, std::size_t len, Kernel kernel) {
  if (kernel == Kernel::pclmul) return update_pclmul(reg, data, len);
  return update_scalar(reg, data, len);
}

}  // namespace crc32

std::string Checksum::hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(8, '0');
  for (int i = 0; i < 8; ++i) out[7 - i] = kDigits[(crc32 >> (4 * i)) & 0xF];
  return out;
}

Checksum Checksum::from_hex(std::string_view text) {
  if (text.size() != 8) throw DecodeError("crc32", "expected 8 hex digits");
  std::uint32_t value = 0;
  for (const char c : text) {
    std::uint32_t nibble;
    if (c >= '0' && c <= '9') {
      nibble = std::uint32_t(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      nibble = std::uint32_t(c - 'a' + 10);
    } else {
      throw DecodeError("crc32", "expected lowercase hex");
    }
    value = (value << 4) | nibble;
  }
  return Checksum{value};
}

Checksum compute_checksum(std::string_view payload) {
  crc32::Accumulator acc;
  acc.update(payload);
  return acc.finish();
}

}  // namespace exac::protocol
