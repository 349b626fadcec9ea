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

#include <string>
#include <string_view>

namespace exac::util {

// Standard alphabet, '=' padding.
std::string base64_encode(std::string_view bytes);

// Strict: rejects characters outside the alphabet, bad padding and
// non-canonical trailing bits. Throws DecodeError with path "b64".
std::string base64_decode(std::string_view text);

}  // namespace exac::util
