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
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "exac/error.hpp"

namespace exac::cli {

// Bad command line; maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

// --help was given; the message is the help text.
class HelpRequested : public Error {
 public:
  using Error::Error;
};

enum class Command { deploy, serve, simulate, monitor, verify, export_data, analyze, teardown };

std::string_view to_string(Command command);

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kDefaultEndpoint = "http://127.0.0.1:8080";

struct CliConfig {
  std::filesystem::path manifest = "experiment.json";
  std::filesystem::path state = "exac.state.json";
  // Flag, then EXAC_ENDPOINT; empty means "ask the state file, else the
  // default".
  std::string endpoint;
  std::optional<std::filesystem::path> registry;
  std::filesystem::path out = "exac-out";
  std::uint64_t seed = 0;
  std::uint64_t participants = 100;
  std::size_t parallelism = 8;
  std::int64_t interval_ms = 1000;

  // simulate
  std::string cohort = "session1";
  double fault_rate = 0;
  bool record = false;
  // monitor: stop after this many probes; 0 runs until interrupted
  std::uint64_t ticks = 0;
  // verify
  std::optional<std::string> session;
  std::optional<std::string> code;
  // serve
  std::optional<std::filesystem::path> ready_file;
};

struct ParsedArgs {
  Command command = Command::deploy;
  CliConfig config;
};

// `args` excludes the program name. Throws UsageError or HelpRequested.
ParsedArgs parse_args(const std::vector<std::string>& args, const char* env_endpoint);
ParsedArgs parse_args(int argc, const char* const* argv);

struct Context {
  // Binary that provides `serve` for deployments.
  std::filesystem::path self_exe = "/proc/self/exe";
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
};

// Runs a parsed command. Returns the process exit code; diagnostics go to
// ctx.err, machine output to ctx.out.
int execute(const ParsedArgs& args, const Context& ctx);

// parse_args + execute with exit-code mapping.
int run(int argc, const char* const* argv, const Context& ctx);

// Endpoint for client commands: explicit value, else the deployed service
// recorded in the state file, else the default.
std::string resolve_endpoint(const CliConfig& config);

}  // namespace exac::cli
