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
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "exac/error.hpp"

namespace exac::completion {

class EmptySalt : public Error {
 public:
  EmptySalt() : Error("salt must not be empty") {}
};

struct Challenge {
  std::string session_id;
  std::string nonce;  // 16 bytes, lowercase hex
  std::int64_t issued_ts_ms = 0;

  friend bool operator==(const Challenge&, const Challenge&) = default;
};

nlohmann::json to_json(const Challenge& challenge);
Challenge challenge_from_json(const nlohmann::json& doc);

// 12 uppercase RFC 4648 base32 characters, no padding.
struct CompletionCode {
  std::string code;

  friend bool operator==(const CompletionCode&, const CompletionCode&) = default;
};

inline constexpr std::size_t kCodeLength = 12;

Challenge generate_challenge(std::string session_id, std::mt19937_64& rng, std::int64_t now_ms);

// First 60 bits of SHA-256("<nonce>:<salt>:<session_id>") as base32.
CompletionCode derive_code(const Challenge& challenge, std::string_view salt);

// Case-insensitive; compares all characters regardless of where the first
// mismatch is. Malformed input (wrong length, non-base32) is simply false.
bool verify_code(std::string_view submitted, const Challenge& challenge, std::string_view salt);

// Latest challenge per session. Issuing again replaces the previous one.
class ChallengeStore {
 public:
  explicit ChallengeStore(std::uint64_t seed) : rng_(seed) {}

  Challenge issue(const std::string& session_id, std::int64_t now_ms);
  void put(const Challenge& challenge);
  std::optional<Challenge> find(const std::string& session_id) const;

 private:
  mutable std::mutex mutex_;
  std::mt19937_64 rng_;
  std::map<std::string, Challenge> by_session_;
};

}  // namespace exac::completion
