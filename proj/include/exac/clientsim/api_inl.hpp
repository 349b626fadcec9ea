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

#include <thread>

namespace exac::clientsim {

template <typename Fn>
auto with_retries(const RetryPolicy& policy, std::uint64_t& retry_counter, Fn&& fn) -> decltype(fn()) {
  auto backoff = policy.base_backoff;
  for (int attempt = 0;; ++attempt) {
    try {
      return fn();
    } catch (const TransportError&) {
      if (attempt >= policy.retries) throw;
    }
    ++retry_counter;
    if (policy.sleep) {
      policy.sleep(backoff);
    } else {
      std::this_thread::sleep_for(backoff);
    }
    backoff *= 2;
  }
}

}  // namespace exac::clientsim
