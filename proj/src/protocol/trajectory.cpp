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

#include "exac/protocol/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "exac/error.hpp"

namespace exac::protocol {

void append_fixed6(std::string& out, double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed, 6);
  std::string_view text(buf, static_cast<std::size_t>(res.ptr - buf));
  if (text == "-0.000000") text.remove_prefix(1);
  out.append(text);
}

std::string format_fixed6(double value) {
  std::string out;
  append_fixed6(out, value);
  return out;
}

bool parse_double(std::string_view text, double& out) {
  if (text.empty()) return false;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size() && std::isfinite(out);
}

std::string encode_trajectory(std::span<const TrajectorySample> samples) {
  std::string out;
  out.reserve(samples.size() * 64);
  double prev_t = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    for (double v : {s.t, s.x, s.y, s.z, s.yaw, s.pitch}) {
      if (!std::isfinite(v)) throw InvariantError("sample " + std::to_string(i) + ": non-finite value");
    }
    if (s.t < 0) throw InvariantError("sample " + std::to_string(i) + ": negative t");
    if (i > 0 && s.t < prev_t) throw InvariantError("sample " + std::to_string(i) + ": t decreases");
    if (s.yaw < -180.0 || s.yaw >= 180.0) throw InvariantError("sample " + std::to_string(i) + ": yaw out of [-180,180)");
    if (s.pitch < -90.0 || s.pitch > 90.0) throw InvariantError("sample " + std::to_string(i) + ": pitch out of [-90,90]");
    prev_t = s.t;
    append_fixed6(out, s.t);
    for (double v : {s.x, s.y, s.z, s.yaw, s.pitch}) {
      out.push_back(',');
      append_fixed6(out, v);
    }
    out.push_back('\n');
  }
  return out;
}

std::vector<TrajectorySample> decode_trajectory(std::string_view bytes) {
  std::vector<TrajectorySample> samples;
  if (bytes.empty()) return samples;
  if (bytes.back() != '\n') throw DecodeError("line " + std::to_string(std::count(bytes.begin(), bytes.end(), '\n') + 1), "missing trailing newline");
  std::size_t line_no = 0;
  while (!bytes.empty()) {
    ++line_no;
    const auto nl = bytes.find('\n');
    std::string_view line = bytes.substr(0, nl);
    bytes.remove_prefix(nl + 1);
    double values[6];
    for (int f = 0; f < 6; ++f) {
      const auto comma = line.find(',');
      const bool last = f == 5;
      if (last != (comma == std::string_view::npos)) {
        throw DecodeError("line " + std::to_string(line_no), "expected 6 fields");
      }
      const auto field = last ? line : line.substr(0, comma);
      if (!parse_double(field, values[f])) {
        throw DecodeError("line " + std::to_string(line_no), "bad number '" + std::string(field) + "'");
      }
      if (!last) line.remove_prefix(comma + 1);
    }
    TrajectorySample s{values[0], values[1], values[2], values[3], values[4], values[5]};
    if (!samples.empty() && s.t < samples.back().t) {
      throw DecodeError("line " + std::to_string(line_no), "t decreases");
    }
    samples.push_back(s);
  }
  return samples;
}

}  // namespace exac::protocol
