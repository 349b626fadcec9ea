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

#include "exac/completion/completion.hpp"

#include <openssl/evp.h>

#include <array>

namespace exac::completion {
namespace {

constexpr char kBase32[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZ234567";

std::array<unsigned char, 32> sha256(std::string_view bytes) {
  std::array<unsigned char, 32> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != digest.size()) {
    throw Error("SHA-256 failed");
  }
  return digest;
}

}  // namespace

nlohmann::json to_json(const Challenge& c) {
  return {{"session_id", c.session_id}, {"nonce", c.nonce}, {"issued_ts_ms", c.issued_ts_ms}};
}

Challenge challenge_from_json(const nlohmann::json& doc) {
  try {
    return Challenge{doc.at("session_id").get<std::string>(), doc.at("nonce").get<std::string>(),
                     doc.at("issued_ts_ms").get<std::int64_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("challenge: ") + e.what());
  }
}

Challenge generate_challenge(std::string session_id, std::mt19937_64& rng, std::int64_t now_ms) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string nonce;
  nonce.reserve(32);
  for (int word = 0; word < 2; ++word) {
    const std::uint64_t bits = rng();
    for (int b = 0; b < 8; ++b) {
      const auto byte = static_cast<unsigned>((bits >> (8 * b)) & 0xFF);
      nonce.push_back(kHex[byte >> 4]);
      nonce.push_back(kHex[byte & 0xF]);
    }
  }
  return Challenge{std::move(session_id), std::move(nonce), now_ms};
}

CompletionCode derive_code(const Challenge& challenge, std::string_view salt) {
  if (salt.empty()) throw EmptySalt();
  std::string material;
  material.reserve(challenge.nonce.size() + salt.size() + challenge.session_id.size() + 2);
  material.append(challenge.nonce).append(":").append(salt).append(":").append(challenge.session_id);
  const auto digest = sha256(material);

  std::uint64_t head = 0;
  for (int i = 0; i < 8; ++i) head = (head << 8) | digest[i];
  CompletionCode out;
  out.code.reserve(kCodeLength);
  for (std::size_t i = 0; i < kCodeLength; ++i) {
    out.code.push_back(kBase32[(head >> (59 - 5 * i)) & 0x1F]);
  }
  return out;
}

bool verify_code(std::string_view submitted, const Challenge& challenge, std::string_view salt) {
  if (submitted.size() != kCodeLength || salt.empty()) return false;
  const auto expected = derive_code(challenge, salt);
  unsigned diff = 0;
  for (std::size_t i = 0; i < kCodeLength; ++i) {
    char c = submitted[i];
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    diff |= static_cast<unsigned>(static_cast<unsigned char>(c) ^
                                  static_cast<unsigned char>(expected.code[i]));
  }
  return diff == 0;
}

Challenge ChallengeStore::issue(const std::string& session_id, std::int64_t now_ms) {
  std::lock_guard lock(mutex_);
  auto challenge = generate_challenge(session_id, rng_, now_ms);
  by_session_[session_id] = challenge;
  return challenge;
}

void ChallengeStore::put(const Challenge& challenge) {
  std::lock_guard lock(mutex_);
  by_session_[challenge.session_id] = challenge;
}

std::optional<Challenge> ChallengeStore::find(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  const auto it = by_session_.find(session_id);
  if (it == by_session_.end()) return std::nullopt;
  return it->second;
}

}  // namespace exac::completion
