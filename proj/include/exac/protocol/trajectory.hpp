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

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace exac::protocol {

// One pose sample. t is seconds since trial start, positions in meters,
// angles in degrees.
struct TrajectorySample {
  double t = 0;
  double x = 0;
  double y = 0;
  double z = 0;
  double yaw = 0;
  double pitch = 0;

  friend bool operator==(const TrajectorySample&, const TrajectorySample&) = default;
};

inline constexpr std::string_view kTrajectoryFields[] = {"t", "x", "y", "z", "yaw", "pitch"};

// Fixed 6-decimal rendering used everywhere a sample value is serialized.
// Values that round to zero print as "0.000000" (never "-0.000000").
std::string format_fixed6(double value);
void append_fixed6(std::string& out, double value);

// Lines "t,x,y,z,yaw,pitch\n", no header. Throws InvariantError on
// decreasing t or an out-of-range angle.
std::string encode_trajectory(std::span<const TrajectorySample> samples);

// Inverse of encode_trajectory. Throws DecodeError("line N") on malformed
// input.
std::vector<TrajectorySample> decode_trajectory(std::string_view bytes);

// Parses one decimal field; shared by the CSV readers.
bool parse_double(std::string_view text, double& out);

}  // namespace exac::protocol
