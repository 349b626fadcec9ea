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
#include <variant>
#include <vector>

#include "exac/error.hpp"
#include "exac/protocol/envelope.hpp"

namespace exac::assembly {

enum class TrialStatus { Open, Reconstructed, ChecksumMismatch };

std::string_view to_string(TrialStatus status);

// Same key, different content.
class ConflictError : public Error {
 public:
  using Error::Error;
};

// try_reconstruct called without a tail.
class IncompleteError : public Error {
 public:
  using Error::Error;
};

struct MismatchReport {
  std::uint64_t chunk_count = 0;
  protocol::Checksum expected;
  protocol::Checksum actual;  // over the chunks present, in seq order
  std::vector<std::uint64_t> missing;
  std::vector<std::uint64_t> unexpected;  // seq >= chunk_count
};

struct MergeOutcome {
  bool duplicate = false;
  TrialStatus status = TrialStatus::Open;
  // Set exactly once: on the merge that moves the buffer to Reconstructed.
  std::optional<std::string> reconstructed;
  std::optional<MismatchReport> mismatch;
};

// Reassembly state for one (session, trial) stream.
//
// Header, chunks and tail may arrive in any order and any number of times.
// Once the tail is known and every seq below its chunk_count is present the
// buffer settles: Reconstructed when the CRC matches, ChecksumMismatch
// otherwise. A seq at or beyond chunk_count forces ChecksumMismatch. Both
// states are terminal. Chunk bytes are dropped after reconstruction; their
// CRCs stay so late duplicates can still be told apart from conflicts.
class TrialBuffer {
 public:
  static constexpr std::uint64_t kDefaultMaxChunks = std::uint64_t{1} << 20;

  explicit TrialBuffer(std::uint64_t max_chunks = kDefaultMaxChunks) : max_chunks_(max_chunks) {}

  // Rebuilds a buffer known to be Reconstructed (service restart).
  static TrialBuffer restored(std::uint64_t chunk_count, protocol::Checksum crc);

  MergeOutcome merge_header(const protocol::HeaderPayload& header);
  MergeOutcome merge_chunk(std::uint64_t seq, std::string bytes);
  MergeOutcome merge_tail(const protocol::TailPayload& tail);

  TrialStatus status() const { return status_; }
  const std::optional<protocol::HeaderPayload>& header() const { return header_; }
  const std::optional<protocol::TailPayload>& tail() const { return tail_; }
  std::uint64_t chunks_received() const { return received_; }
  std::uint64_t bytes_held() const { return bytes_held_; }

  // Concatenation in seq order if complete and the CRC matches, else a
  // report. Throws IncompleteError without a tail. Only meaningful while the
  // chunk bytes are still held (Open or ChecksumMismatch).
  std::variant<std::string, MismatchReport> try_reconstruct() const;

 private:
  MergeOutcome settle_if_ready();
  bool has_seq(std::uint64_t seq) const { return seq < present_.size() && present_[seq]; }

  std::uint64_t max_chunks_;
  std::optional<protocol::HeaderPayload> header_;
  std::optional<protocol::TailPayload> tail_;
  std::vector<std::string> chunks_;
  std::vector<char> present_;
  std::vector<std::uint32_t> chunk_crcs_;  // filled when chunks are released
  std::uint64_t received_ = 0;
  std::uint64_t in_range_ = 0;  // present seqs below chunk_count, valid once the tail is known
  std::uint64_t bytes_held_ = 0;
  bool has_unexpected_ = false;
  bool released_ = false;
  TrialStatus status_ = TrialStatus::Open;
};

}  // namespace exac::assembly
