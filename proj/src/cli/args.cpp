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

#include <cstdlib>

#include <CLI11.hpp>

#include "exac/cli/cli.hpp"
#include "exac/http/client.hpp"

namespace exac::cli {

std::string_view to_string(Command command) {
  switch (command) {
    case Command::deploy:
      return "deploy";
    case Command::serve:
      return "serve";
    case Command::simulate:
      return "simulate";
    case Command::monitor:
      return "monitor";
    case Command::verify:
      return "verify";
    case Command::export_data:
      return "export";
    case Command::analyze:
      return "analyze";
    case Command::teardown:
      return "teardown";
  }
  return "?";
}

ParsedArgs parse_args(const std::vector<std::string>& args, const char* env_endpoint) {
  ParsedArgs parsed;
  auto& c = parsed.config;
  std::string endpoint;
  std::string registry;
  std::string ready_file;
  std::string session;
  std::string code;

  CLI::App app{"Experiment pipeline operator tool", "exac"};
  app.fallthrough();
  app.require_subcommand(1);
  app.add_option("--manifest", c.manifest, "Experiment manifest (JSON)");
  app.add_option("--state", c.state, "Lifecycle state file");
  app.add_option("--endpoint", endpoint, "Service URL (default: $EXAC_ENDPOINT, the deployed service, " +
                                             std::string(kDefaultEndpoint) + ")");
  app.add_option("--registry", registry, "Participant registry journal");
  app.add_option("--out", c.out, "Output / resource directory");
  app.add_option("--seed", c.seed, "Random seed");
  app.add_option("-n,--participants", c.participants, "Participants to simulate")->check(CLI::Range(1, 1'000'000));
  app.add_option("--parallelism", c.parallelism, "Concurrent simulated clients")->check(CLI::Range(1, 1024));
  app.add_option("--interval-ms", c.interval_ms, "Health probe interval")->check(CLI::Range(100, 3'600'000));

  auto* deploy = app.add_subcommand("deploy", "Plan and apply the experiment's resources");
  auto* serve = app.add_subcommand("serve", "Run the service until interrupted");
  serve->add_option("--ready-file", ready_file, "Written with {endpoint, pid} once listening");
  auto* simulate = app.add_subcommand("simulate", "Run simulated participants against the service");
  simulate->add_option("--cohort", c.cohort, "Cohort tag recorded with each session");
  simulate->add_option("--fault-rate", c.fault_rate, "Transport fault probability")->check(CLI::Range(0.0, 0.9));
  simulate->add_flag("--record", c.record, "Write client-side trajectories under --out/client");
  auto* monitor = app.add_subcommand("monitor", "Poll service health and the participant funnel");
  monitor->add_option("--ticks", c.ticks, "Stop after this many probes (0: until interrupted)");
  auto* verify = app.add_subcommand("verify", "Verify completion codes and pay rewards");
  verify->add_option("--session", session, "Session to verify (default: every session with a submitted code)");
  verify->add_option("--code", code, "Code to check (default: the code the participant submitted)");
  auto* exp = app.add_subcommand("export", "Download session CSVs to --out/export");
  auto* analyze = app.add_subcommand("analyze", "Export, compute metrics and fit the mixed model");
  auto* teardown = app.add_subcommand("teardown", "Destroy deployed resources");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested(app.help());
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested(app.help("", CLI::AppFormatMode::All));
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  const std::pair<CLI::App*, Command> commands[] = {
      {deploy, Command::deploy},   {serve, Command::serve},          {simulate, Command::simulate},
      {monitor, Command::monitor}, {verify, Command::verify},        {exp, Command::export_data},
      {analyze, Command::analyze}, {teardown, Command::teardown}};
  for (const auto& [sub, cmd] : commands) {
    if (sub->parsed()) parsed.command = cmd;
  }

  c.endpoint = !endpoint.empty() ? endpoint : (env_endpoint && *env_endpoint ? env_endpoint : "");
  if (!c.endpoint.empty()) {
    try {
      http::parse_endpoint(c.endpoint, parsed.command == Command::serve);
    } catch (const Error& e) {
      throw UsageError(std::string("--endpoint: ") + e.what());
    }
  }
  if (!registry.empty()) c.registry = registry;
  if (!ready_file.empty()) c.ready_file = ready_file;
  if (!session.empty()) c.session = session;
  if (!code.empty()) c.code = code;
  if (c.code && !c.session) throw UsageError("--code needs --session");
  return parsed;
}

ParsedArgs parse_args(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return parse_args(args, std::getenv("EXAC_ENDPOINT"));
}

}  // namespace exac::cli
