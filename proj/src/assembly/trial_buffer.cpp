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

#include "exac/assembly/trial_buffer.hpp"

#include <algorithm>

namespace exac::assembly {

using protocol::Checksum;
using protocol::HeaderPayload;
using protocol::TailPayload;

std::string_view to_string(TrialStatus status) {
  switch (status) {
    case TrialStatus::Open:
      return "Open";
    case TrialStatus::Reconstructed:
      return "Reconstructed";
    case TrialStatus::ChecksumMismatch:
      return "ChecksumMismatch";
  }
  return "?";
}

TrialBuffer TrialBuffer::restored(std::uint64_t chunk_count, Checksum crc) {
  TrialBuffer b;
  b.tail_ = TailPayload{chunk_count, crc};
  b.status_ = TrialStatus::Reconstructed;
  b.released_ = true;
  b.received_ = chunk_count;
  b.in_range_ = chunk_count;
  return b;
}

MergeOutcome TrialBuffer::merge_header(const HeaderPayload& header) {
  if (header_) {
    if (*header_ != header) throw ConflictError("header differs from the one already received");
    return MergeOutcome{true, status_, std::nullopt, std::nullopt};
  }
  header_ = header;
  // A restored buffer never saw the header; a resend is still a duplicate.
  return MergeOutcome{released_, status_, std::nullopt, std::nullopt};
}

MergeOutcome TrialBuffer::merge_chunk(std::uint64_t seq, std::string bytes) {
  if (seq >= max_chunks_) throw InvariantError("seq " + std::to_string(seq) + " exceeds the per-trial chunk limit");

  if (released_) {
    if (tail_ && seq < tail_->chunk_count) {
      // Restored buffers carry no per-chunk CRCs; in-range resends are
      // accepted as duplicates.
      if (chunk_crcs_.empty() || protocol::compute_checksum(bytes).crc32 == chunk_crcs_[seq]) {
        return MergeOutcome{true, status_, std::nullopt, std::nullopt};
      }
    }
    throw ConflictError("chunk " + std::to_string(seq) + " conflicts with a reconstructed trial");
  }

  if (has_seq(seq)) {
    if (chunks_[seq] != bytes) throw ConflictError("chunk " + std::to_string(seq) + " resent with different bytes");
    return MergeOutcome{true, status_, std::nullopt, std::nullopt};
  }

  if (seq >= present_.size()) {
    const auto size = std::max<std::uint64_t>(seq + 1, present_.size() * 2);
    chunks_.resize(size);
    present_.resize(size, 0);
  }
  bytes_held_ += bytes.size();
  chunks_[seq] = std::move(bytes);
  present_[seq] = 1;
  ++received_;
  if (tail_) {
    if (seq < tail_->chunk_count) {
      ++in_range_;
    } else {
      has_unexpected_ = true;
    }
  }
  return settle_if_ready();
}

MergeOutcome TrialBuffer::merge_tail(const TailPayload& tail) {
  if (tail_) {
    if (*tail_ != tail) throw ConflictError("tail differs from the one already received");
    return MergeOutcome{true, status_, std::nullopt, std::nullopt};
  }
  if (tail.chunk_count > max_chunks_) throw InvariantError("chunk_count exceeds the per-trial chunk limit");
  tail_ = tail;
  in_range_ = 0;
  for (std::uint64_t seq = 0; seq < present_.size(); ++seq) {
    if (!present_[seq]) continue;
    if (seq < tail.chunk_count) {
      ++in_range_;
    } else {
      has_unexpected_ = true;
    }
  }
  return settle_if_ready();
}

MergeOutcome TrialBuffer::settle_if_ready() {
  MergeOutcome out;
  out.status = status_;
  if (status_ != TrialStatus::Open || !tail_) return out;
  if (!has_unexpected_ && in_range_ < tail_->chunk_count) return out;

  auto result = try_reconstruct();
  if (auto* payload = std::get_if<std::string>(&result)) {
    status_ = TrialStatus::Reconstructed;
    const auto n = tail_->chunk_count;
    chunk_crcs_.resize(n);
    for (std::uint64_t seq = 0; seq < n; ++seq) {
      chunk_crcs_[seq] = protocol::compute_checksum(chunks_[seq]).crc32;
    }
    std::vector<std::string>().swap(chunks_);
    std::vector<char>().swap(present_);
    bytes_held_ = 0;
    released_ = true;
    out.reconstructed = std::move(*payload);
  } else {
    status_ = TrialStatus::ChecksumMismatch;
    out.mismatch = std::move(std::get<MismatchReport>(result));
  }
  out.status = status_;
  return out;
}

std::variant<std::string, MismatchReport> TrialBuffer::try_reconstruct() const {
  if (!tail_) throw IncompleteError("no tail received");
  if (released_) throw IncompleteError("chunk bytes already released");
  const auto n = tail_->chunk_count;

  MismatchReport report;
  report.chunk_count = n;
  report.expected = tail_->crc;
  std::string payload;
  payload.reserve(bytes_held_);
  protocol::crc32::Accumulator crc;
  for (std::uint64_t seq = 0; seq < n; ++seq) {
    if (!has_seq(seq)) {
      report.missing.push_back(seq);
      continue;
    }
    payload += chunks_[seq];
  }
  for (std::uint64_t seq = n; seq < present_.size(); ++seq) {
    if (present_[seq]) report.unexpected.push_back(seq);
  }
  crc.update(payload);
  report.actual = crc.finish();
  if (report.missing.empty() && report.unexpected.empty() && report.actual == report.expected) {
    return payload;
  }
  return report;
}

}  // namespace exac::assembly
