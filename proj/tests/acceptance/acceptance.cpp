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

#include <fcntl.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "exac/analysis/report.hpp"
#include "exac/assembly/trial_buffer.hpp"
#include "exac/clientsim/session.hpp"
#include "exac/http/client.hpp"
#include "exac/management/funnel.hpp"
#include "exac/management/health.hpp"
#include "exac/management/management.hpp"
#include "exac/manifest/lifecycle.hpp"
#include "exac/protocol/checksum.hpp"
#include "exac/protocol/trajectory.hpp"
#include "exac/server/host.hpp"
#include "exac/util/clock.hpp"
#include "exac/util/fs.hpp"
#include "support/cohorts.hpp"
#include "support/crc_oracle.hpp"
#include "support/envelopes.hpp"
#include "support/lmm_oracles.hpp"
#include "support/random_bytes.hpp"
#include "support/monitoring_table.hpp"
#include "support/temp_dir.hpp"

using namespace exac;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* title;
  std::function<Outcome()> run;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::int64_t steady_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string fmt(double v, int digits = 2) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

// Collects failed expectations; the first few are kept for the report.
class Expect {
 public:
  void operator()(bool ok, const std::string& what) {
    if (ok) return;
    if (failures_++ < 3) notes_.push_back(what);
  }
  bool ok() const { return failures_ == 0; }
  std::string summary() const {
    std::string s = std::to_string(failures_) + " failed:";
    for (const auto& n : notes_) s += " [" + n + "]";
    return s;
  }

 private:
  std::size_t failures_ = 0;
  std::vector<std::string> notes_;
};

// fork/exec of the exac binary; output goes to `log`.
pid_t spawn_exac(const std::vector<std::string>& args, const fs::path& cwd, const fs::path& log) {
  std::vector<std::string> argv{EXAC_BINARY};
  argv.insert(argv.end(), args.begin(), args.end());
  const pid_t pid = ::fork();
  if (pid < 0) throw Error("fork failed");
  if (pid == 0) {
    if (::chdir(cwd.c_str()) != 0) ::_exit(127);
    const int fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd >= 0) {
      ::dup2(fd, 1);
      ::dup2(fd, 2);
      ::close(fd);
    }
    std::vector<char*> raw;
    for (auto& a : argv) raw.push_back(a.data());
    raw.push_back(nullptr);
    ::execv(raw[0], raw.data());
    ::_exit(127);
  }
  return pid;
}

int wait_exit(pid_t pid) {
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) return -1;
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
}

int run_exac(const std::vector<std::string>& args, const fs::path& cwd, const fs::path& log) {
  return wait_exit(spawn_exac(args, cwd, log));
}

int free_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  socklen_t len = sizeof addr;
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    ::close(fd);
    throw Error("no free port");
  }
  ::close(fd);
  return ntohs(addr.sin_port);
}

const manifest::ExperimentManifest& test_manifest() {
  static const auto m = manifest::parse_manifest(R"({"name":"wayfinding","salt":"acceptance-salt"})");
  return m;
}

assembly::MergeOutcome merge(assembly::TrialBuffer& b, const protocol::WireEnvelope& e) {
  switch (e.kind()) {
    case protocol::Kind::header:
      return b.merge_header(std::get<protocol::HeaderPayload>(e.payload));
    case protocol::Kind::chunk:
      return b.merge_chunk(*e.seq, std::get<protocol::ChunkPayload>(e.payload).bytes);
    case protocol::Kind::tail:
      return b.merge_tail(std::get<protocol::TailPayload>(e.payload));
    default:
      throw Error("event in a trial stream");
  }
}

// Merges `envs` in `order`; returns the reconstructed payload if exactly
// one merge released it.
std::optional<std::string> feed(assembly::TrialBuffer& b, const std::vector<protocol::WireEnvelope>& envs,
                                const std::vector<std::uint32_t>& order, bool& released_twice) {
  std::optional<std::string> out;
  for (auto idx : order) {
    auto r = merge(b, envs[idx]);
    if (r.reconstructed) {
      if (out) released_twice = true;
      out = std::move(r.reconstructed);
    }
  }
  return out;
}

// Every envelope once plus about 10% duplicates, shuffled.
std::vector<std::uint32_t> shuffled_with_duplicates(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  const std::size_t dups = 1 + n / 10;
  for (std::size_t i = 0; i < dups; ++i) order.push_back(static_cast<std::uint32_t>(rng() % n));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

Outcome protocol_reassembly() {
  Stopwatch clock;
  Expect expect;
  std::mt19937_64 rng(0x5eed0001);
  constexpr std::size_t kMaxBytes = 200 * 1024;
  std::size_t streams = 0, corrupted = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t len = i == 0 ? 0 : i == 1 ? 1 : i == 2 ? kMaxBytes : rng() % (kMaxBytes + 1);
    const auto payload = testing::random_bytes(rng, len);
    const auto oracle = testing::crc32_bitwise(payload);
    for (std::size_t chunk : {std::size_t{1}, std::size_t{64}, std::size_t{4300}}) {
      const auto label = "payload " + std::to_string(i) + " chunk " + std::to_string(chunk);
      auto envs = testing::stream_envelopes("s", 1, payload, chunk);
      expect(std::get<protocol::TailPayload>(envs.back().payload).crc.crc32 == oracle, label + ": tail crc");

      bool twice = false;
      assembly::TrialBuffer good;
      const auto out = feed(good, envs, shuffled_with_duplicates(envs.size(), rng), twice);
      expect(good.status() == assembly::TrialStatus::Reconstructed && out && *out == payload && !twice,
             label + ": reassembly");
      ++streams;

      if (envs.size() > 2) {
        const std::size_t victim = 1 + rng() % (envs.size() - 2);
        auto& bytes = std::get<protocol::ChunkPayload>(envs[victim].payload).bytes;
        bytes[rng() % bytes.size()] ^= static_cast<char>(1u << (rng() % 8));
      } else {
        std::get<protocol::TailPayload>(envs.back().payload).crc.crc32 ^= 1u << (rng() % 32);
      }
      assembly::TrialBuffer bad;
      const auto leaked = feed(bad, envs, shuffled_with_duplicates(envs.size(), rng), twice);
      expect(bad.status() == assembly::TrialStatus::ChecksumMismatch && !leaked, label + ": corruption");
      ++corrupted;
    }
  }
  const double secs = clock.seconds();
  expect(secs < 120, "runtime " + fmt(secs) + " s");
  std::string detail = std::to_string(streams) + " streams reassembled, " + std::to_string(corrupted) +
                       " single-bit corruptions detected, " + fmt(secs, 1) + " s";
  if (!expect.ok()) detail = expect.summary() + "; " + detail;
  return {expect.ok(), detail};
}

Outcome crc_vectors() {
  Expect expect;
  const auto check = protocol::compute_checksum("123456789").crc32;
  expect(check == 0xCBF43926u, "check value");
  expect(check == testing::crc32_bitwise("123456789"), "oracle");
  expect(protocol::compute_checksum("").crc32 == 0, "empty");
  expect(testing::crc32_bitwise("") == 0, "oracle empty");
  std::string kernels;
  for (auto k : {protocol::crc32::Kernel::scalar, protocol::crc32::Kernel::pclmul}) {
    if (!protocol::crc32::supported(k)) continue;
    protocol::crc32::Accumulator acc(k);
    acc.update("123456789");
    expect(acc.finish().crc32 == 0xCBF43926u, protocol::crc32::kernel_name(k));
    kernels += std::string(kernels.empty() ? "" : ", ") + protocol::crc32::kernel_name(k);
  }
  std::ostringstream os;
  os << "crc(\"123456789\") = " << protocol::compute_checksum("123456789").hex() << ", crc(\"\") = "
     << protocol::compute_checksum("").hex() << ", kernels: " << kernels;
  return {expect.ok(), expect.ok() ? os.str() : expect.summary()};
}

// The last six fields of every data row, which are the sample columns.
std::string sample_text_of_export(const std::string& csv) {
  std::string out;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::size_t pos = line.size();
    for (int commas = 0; commas < 6 && pos != std::string::npos; ++commas) pos = line.rfind(',', pos - 1);
    out.append(line, pos + 1, std::string::npos);
    out.push_back('\n');
  }
  return out;
}

Outcome end_to_end() {
  testing::TempDir dir;
  const auto log = dir.path() / "commands.log";
  util::write_file_atomic(dir.path() / "experiment.json", manifest::to_json(test_manifest()).dump(2));
  Expect expect;
  Stopwatch clock;
  std::string steps;
  const std::vector<std::vector<std::string>> commands = {
      {"deploy"}, {"simulate", "-n", "100", "--record"}, {"analyze"}, {"teardown"}};
  std::string endpoint;
  for (const auto& args : commands) {
    if (args[0] == "teardown") {
      const auto state = manifest::parse_state(util::read_file(dir.path() / "exac.state.json"));
      if (const auto* r = state.find(manifest::ResourceKind::assembly_service)) endpoint = r->attrs.at("endpoint");
    }
    const int code = run_exac(args, dir.path(), log);
    steps += (steps.empty() ? "" : ", ") + args[0] + "=" + std::to_string(code);
    expect(code == 0, args[0] + " exit " + std::to_string(code));
    if (code != 0) break;
  }
  const double secs = clock.seconds();
  expect(secs < 60, "runtime " + fmt(secs) + " s");
  if (!expect.ok()) return {false, expect.summary() + "; " + util::try_read_file(log).value_or("")};

  expect(!endpoint.empty() && !http::probe_health(http::parse_endpoint(endpoint)), "service still up");
  const fs::path out = dir.path() / "exac-out";
  const auto listing = json::parse(util::read_file(out / "export" / "sessions.json"));
  std::size_t completed = 0, trials_compared = 0;
  std::set<std::string> service_completed;
  for (const auto& doc : listing) {
    const auto s = assembly::session_summary_from_json(doc);
    const auto client_dir = out / "client" / s.session_id;
    if (s.state == assembly::SessionState::Completed) {
      ++completed;
      service_completed.insert(s.session_id);
      expect(s.reconstructed_trials == std::vector<std::uint64_t>{1, 2, 3, 4, 5, 6},
             s.session_id + ": reconstructed trials");
      expect(fs::exists(client_dir / "trial_6.txt"), s.session_id + ": client recorded 6 trials");
    }
    for (auto k : s.reconstructed_trials) {
      const auto name = "trial_" + std::to_string(k);
      const auto client = util::try_read_file(client_dir / (name + ".txt"));
      const auto exported = util::try_read_file(out / "export" / "sessions" / s.session_id / (name + ".csv"));
      expect(client && exported && sample_text_of_export(*exported) == *client,
             s.session_id + " " + name + ": export differs from client samples");
      ++trials_compared;
    }
  }
  std::set<std::string> client_completed;
  const auto simulated = json::parse(util::read_file(out / "simulate_session1.json"));
  for (const auto& o : simulated["sessions"]) {
    if (o["completed"].get<bool>()) client_completed.insert(o["session_id"].get<std::string>());
  }
  expect(client_completed == service_completed, "completed sessions: client " + std::to_string(client_completed.size()) + ", service " + std::to_string(service_completed.size()));
  expect(completed > 0, "no completed sessions");
  expect(fs::exists(out / "analysis" / "report.json"), "analysis report");
  std::string detail = steps + "; " + fmt(secs, 1) + " s; " + std::to_string(completed) + " completed sessions, " +
                       std::to_string(trials_compared) + " exported trials identical to client samples";
  if (!expect.ok()) detail = expect.summary() + "; " + detail;
  return {expect.ok(), detail};
}

Outcome funnel_reproduction() {
  Expect expect;
  server::HostConfig cfg;
  cfg.manifest = test_manifest();
  server::ServiceHost host(cfg);
  host.start();
  const auto endpoint = http::parse_endpoint(host.endpoint());
  const clientsim::ApiFactory factory = [&] { return std::make_unique<clientsim::HttpServiceApi>(endpoint); };
  clientsim::SimAgentConfig sim;
  const auto result = clientsim::run_cohort(462, sim, cfg.manifest, factory, 8, 0, {}, "session1");
  const auto funnel = management::compute_funnel(host.assembly().sessions());
  host.stop();
  const auto& t = funnel.total;
  expect(result.report.errors == 0, "client errors");
  expect(t.accessed == 462, "accessed");
  expect(t.capable >= 286 && t.capable <= 346, "capable outside 316+-30");
  expect(t.completed >= 124 && t.completed <= 174, "completed outside 149+-25");

  const auto fixture = management::compute_funnel(testing::monitoring_table_sessions());
  expect(fixture.total.accessed == 462 && fixture.total.capable == 316 && fixture.total.completed == 149,
         "monitoring-table fixture");
  std::string detail = "simulated (accessed, capable, completed) = (" + std::to_string(t.accessed) + ", " +
                       std::to_string(t.capable) + ", " + std::to_string(t.completed) + "), fixture = (" +
                       std::to_string(fixture.total.accessed) + ", " + std::to_string(fixture.total.capable) + ", " +
                       std::to_string(fixture.total.completed) + ")";
  if (!expect.ok()) detail = expect.summary() + "; " + detail;
  return {expect.ok(), detail};
}

double relative_error(double got, double want) { return std::abs(got - want) / std::abs(want); }

Outcome lmm_oracle() {
  Expect expect;
  double worst_reml = 0, worst_ols = 0;
  std::size_t compared = 0, boundary = 0;
  for (std::size_t m : {3, 5, 10}) {
    for (std::size_t k : {2, 6}) {
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto data = testing::gaussian_data({{"Control", m, k}, {"A", m, k}, {"B", m, k}}, {{"A", 1}, {"B", -4}},
                                                 2.0, 1.0, 7000 + seed);
        const auto oracle = testing::anova_oracle(data);
        const auto fit = analysis::fit_random_intercept(data, analysis::ModelSpec{});
        if (oracle.sigma_u2 <= 0) {
          ++boundary;
          expect(fit.sigma_u2 == 0, "boundary");
          continue;
        }
        ++compared;
        const double err =
            std::max(relative_error(fit.sigma_u2, oracle.sigma_u2), relative_error(fit.sigma_e2, oracle.sigma_e2));
        worst_reml = std::max(worst_reml, err);
        expect(err <= 1e-6, "m=" + std::to_string(m) + " k=" + std::to_string(k) + " rel err " + std::to_string(err));
      }
    }
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto size = [&] { return 2 + rng() % 6; };
    const auto data = testing::gaussian_data(
        {{"Control", size(), size()}, {"A", size(), size()}, {"B", size(), 1 + rng() % 6}}, {{"A", 2}, {"B", -3}},
        1.5, 1.0, 8000 + seed);
    const auto oracle = testing::ols_oracle(data, "Control");
    const auto design = analysis::build_design(data, analysis::ModelSpec{});
    const auto at_zero = analysis::profile_at(design, 0.0);
    for (std::size_t j = 0; j < design.terms.size(); ++j) {
      const double err = std::abs(at_zero.beta[static_cast<Eigen::Index>(j)] - oracle.at(design.terms[j]));
      worst_ols = std::max(worst_ols, err);
      expect(err <= 1e-10, "ols " + design.terms[j]);
    }
  }
  std::ostringstream os;
  os << compared << " balanced fits, worst REML rel err " << worst_reml << " (" << boundary
     << " zero-boundary cases); 20 unbalanced lambda=0 fits, worst OLS abs err " << worst_ols;
  return {expect.ok(), expect.ok() ? os.str() : expect.summary() + "; " + os.str()};
}

Outcome result_pattern() {
  Stopwatch clock;
  const clientsim::SimAgentConfig cfg;
  int pass = 0, b_sig = 0, a_nonsig = 0, agree = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::vector<analysis::CohortData> cohorts{
        {"session1", testing::synthetic_cohort(cfg, 275, util::mix_seed(seed, 1))},
        {"session2", testing::synthetic_cohort(cfg, 495, util::mix_seed(seed, 2))}};
    const auto report = analysis::session_report(cohorts);
    bool b_all = true, a_all = true;
    for (const auto& c : report.cohorts) {
      for (const auto& w : c.wald) {
        if (w.term == "B") b_all = b_all && w.p < 0.05;
        if (w.term == "A") a_all = a_all && w.p > 0.05;
      }
    }
    const bool agreement = report.agreement.value_or(false);
    b_sig += b_all;
    a_nonsig += a_all;
    agree += agreement;
    pass += b_all && a_all && agreement;
  }
  const double secs = clock.seconds();
  const bool ok = pass >= 90 && secs < 300;
  std::ostringstream os;
  os << pass << "/100 replications show the pattern (need >= 90); p_B < 0.05 in both cohorts " << b_sig
     << "/100, p_A > 0.05 in both " << a_nonsig << "/100, agreement " << agree << "/100; " << fmt(secs, 1) << " s";
  return {ok, os.str()};
}

Outcome exactly_once_reward() {
  testing::TempDir dir;
  Expect expect;
  const auto& m = test_manifest();
  constexpr int kSessions = 50, kIncomplete = 5, kAttempts = 100;
  std::map<std::string, assembly::SessionSummary> sessions;
  std::map<std::string, completion::Challenge> challenges;
  std::map<std::string, std::string> codes;
  std::map<std::string, double> expected_total;
  std::mt19937_64 rng(0x5eed0007);
  for (int s = 0; s < kSessions + kIncomplete; ++s) {
    const auto id = "sess-" + std::to_string(s);
    assembly::SessionSummary summary;
    summary.session_id = id;
    summary.participant_id = "worker-" + std::to_string(s);
    summary.state = s < kSessions ? assembly::SessionState::Completed : assembly::SessionState::InTrial;
    const double minutes = 12.0 + 0.32 * s;
    summary.first_event_ts_ms = 1'700'000'000'000;
    summary.completed_event_ts_ms = *summary.first_event_ts_ms + static_cast<std::int64_t>(minutes * 60'000);
    sessions[id] = summary;
    challenges[id] = completion::generate_challenge(id, rng, 0);
    codes[id] = completion::derive_code(challenges[id], m.salt).code;
    if (s < kSessions) expected_total[id] = minutes < 20.0 ? 4.50 + 1.00 : 4.50;
  }
  auto registry = std::make_shared<management::Registry>(dir.path() / "registry.jsonl");
  auto client = std::make_shared<management::MockRecruitmentClient>();
  management::Management mgmt(
      m, registry, client,
      [&](const std::string& id) -> std::optional<assembly::SessionSummary> {
        const auto it = sessions.find(id);
        return it == sessions.end() ? std::nullopt : std::optional(it->second);
      },
      [&](const std::string& id) -> std::optional<completion::Challenge> {
        const auto it = challenges.find(id);
        return it == challenges.end() ? std::nullopt : std::optional(it->second);
      });

  std::vector<std::string> ids;
  for (const auto& [id, _] : sessions) ids.push_back(id);
  std::mutex mutex;
  std::map<std::string, int> rewarded;
  std::atomic<int> wrong_code_rewards{0};
  std::atomic<bool> go{false};
  std::vector<std::thread> threads;
  for (int t = 0; t < kAttempts; ++t) {
    threads.emplace_back([&, t] {
      std::mt19937_64 local(util::mix_seed(99, t));
      auto order = ids;
      std::shuffle(order.begin(), order.end(), local);
      while (!go.load()) std::this_thread::yield();
      for (const auto& id : order) {
        if (local() % 4 == 0) {
          std::string wrong = codes[id];
          wrong[0] = wrong[0] == 'A' ? 'B' : 'A';
          if (std::holds_alternative<management::RewardDecision>(mgmt.verify_and_reward(id, wrong, 0))) {
            ++wrong_code_rewards;
          }
        }
        if (std::holds_alternative<management::RewardDecision>(mgmt.verify_and_reward(id, codes[id], 0))) {
          std::lock_guard lock(mutex);
          ++rewarded[id];
        }
      }
    });
  }
  go = true;
  for (auto& th : threads) th.join();

  expect(wrong_code_rewards == 0, "wrong code rewarded");
  expect(!client->double_pay_detected(), "double pay");
  std::size_t bonus = 0;
  for (const auto& id : ids) {
    const bool verifiable = expected_total.count(id) > 0;
    expect(client->pay_count(id) == (verifiable ? 1u : 0u), id + ": pay calls " + std::to_string(client->pay_count(id)));
    expect(rewarded[id] == (verifiable ? 1 : 0), id + ": reward decisions");
  }
  for (const auto& call : client->calls()) {
    if (call.op != "pay") continue;
    const auto want = expected_total.at(call.session_id);
    expect(std::abs(call.amount_usd - want) < 1e-9, call.session_id + ": amount " + fmt(call.amount_usd));
    bonus += want > 4.50;
  }
  const management::Registry replayed(dir.path() / "registry.jsonl");
  for (const auto& [id, total] : expected_total) {
    const auto rec = replayed.by_session(id);
    expect(rec && rec->verified && rec->reward && std::abs(rec->reward->total_usd - total) < 1e-9,
           id + ": journal");
  }
  std::ostringstream os;
  os << kAttempts << " threads x " << ids.size() << " sessions: " << client->pay_count() << " pay calls for "
     << expected_total.size() << " verifiable sessions (" << bonus << " with bonus), 0 for " << kIncomplete
     << " unfinished";
  return {expect.ok(), expect.ok() ? os.str() : expect.summary() + "; " + os.str()};
}

// Kills the process while creating the n-th resource.
class KillingExecutor final : public manifest::Executor {
 public:
  explicit KillingExecutor(std::size_t n) : n_(n) {}
  manifest::Attrs create(const manifest::Action&, const manifest::ExperimentManifest&,
                         const manifest::LifecycleState&) override {
    if (++calls_ == n_) ::kill(::getpid(), SIGKILL);
    return {{"n", std::to_string(calls_)}};
  }
  void destroy(const manifest::Resource&) override {}

 private:
  std::size_t n_;
  std::size_t calls_ = 0;
};

// Creates and destroys slowly so a kill lands at an arbitrary point.
class SlowExecutor final : public manifest::Executor {
 public:
  explicit SlowExecutor(std::uint64_t seed) : rng_(seed) {}
  manifest::Attrs create(const manifest::Action& a, const manifest::ExperimentManifest&,
                         const manifest::LifecycleState&) override {
    pause();
    return {{"id", a.resource_id}};
  }
  void destroy(const manifest::Resource&) override { pause(); }

 private:
  void pause() { std::this_thread::sleep_for(std::chrono::microseconds(rng_() % 3000)); }
  std::mt19937_64 rng_;
};

Outcome lifecycle_idempotence() {
  using namespace manifest;
  Expect expect;
  const auto& m = test_manifest();
  std::mt19937_64 rng(0x5eed0008);
  std::size_t properties = 0;
  for (int round = 0; round < 200; ++round) {
    const auto tag = "round " + std::to_string(round);
    LifecycleState persisted;
    const Persist persist = [&](const LifecycleState& s) { persisted = s; };
    LifecycleState state;
    const std::size_t fail_at = rng() % 6;  // 0 or 5 never fail within four creates
    try {
      MockExecutor failing(fail_at == 0 ? std::nullopt : std::optional<std::size_t>(fail_at));
      state = apply(plan(m, {}), {}, failing, m, persist);
      expect(fail_at == 0 || fail_at == 5, tag + ": expected a failure");
    } catch (const ExecutorError&) {
      state = persisted;
      check_order(state);
      expect(state.created_count() == fail_at - 1, tag + ": created prefix");
      expect(plan(m, state).size() == 4 - (fail_at - 1), tag + ": remainder");
    }
    MockExecutor exec;
    state = apply(plan(m, state), state, exec, m, persist);
    expect(state.created_count() == 4, tag + ": complete");
    const auto before = state;
    MockExecutor idle;
    state = apply(plan(m, state), state, idle, m, persist);
    expect(plan(m, state).empty() && idle.calls().empty() && state == before, tag + ": second apply");

    const std::size_t destroy_fail = rng() % 6;
    try {
      MockExecutor failing(destroy_fail == 0 ? std::nullopt : std::optional<std::size_t>(destroy_fail));
      state = teardown(state, failing, persist);
    } catch (const ExecutorError&) {
      state = persisted;
      check_order(state);
    }
    MockExecutor down;
    state = teardown(state, down, persist);
    expect(state.created_count() == 0 && persisted == state, tag + ": teardown empties state");
    MockExecutor idle_down;
    state = teardown(state, idle_down, persist);
    expect(idle_down.calls().empty(), tag + ": second teardown");
    expect(plan(m, state).size() == 4, tag + ": redeployable");
    expect(parse_state(to_json(state).dump()) == state, tag + ": round trip");
    properties += 8;
  }

  std::size_t kills = 0;
  auto check_after_kill = [&](const fs::path& path, const std::string& tag) {
    try {
      StateStore store(path);
      auto s = store.load();
      check_order(s);
      const auto remainder = plan(m, s);
      expect(remainder.size() == 4 - s.created_count(), tag + ": remainder");
      MockExecutor exec;
      s = apply(remainder, s, exec, m, store.persister());
      expect(exec.calls().size() == remainder.size() && s.created_count() == 4, tag + ": resume");
      expect(plan(m, store.load()).empty(), tag + ": converged");
    } catch (const std::exception& e) {
      expect(false, tag + ": " + e.what());
    }
    ++kills;
  };
  for (std::size_t n = 1; n <= 4; ++n) {
    testing::TempDir dir;
    const auto path = dir.path() / "exac.state.json";
    const pid_t pid = ::fork();
    if (pid == 0) {
      StateStore store(path);
      KillingExecutor exec(n);
      apply(plan(m, {}), {}, exec, m, store.persister());
      ::_exit(0);
    }
    expect(wait_exit(pid) == 128 + SIGKILL, "child not killed");
    check_after_kill(path, "kill at create " + std::to_string(n));
  }
  for (int k = 0; k < 20; ++k) {
    testing::TempDir dir;
    const auto path = dir.path() / "exac.state.json";
    const pid_t pid = ::fork();
    if (pid == 0) {
      StateStore store(path);
      SlowExecutor exec(static_cast<std::uint64_t>(k));
      for (;;) {
        auto s = store.load();
        s = apply(plan(m, s), s, exec, m, store.persister());
        teardown(s, exec, store.persister());
      }
    }
    std::this_thread::sleep_for(std::chrono::microseconds(2000 + rng() % 20000));
    ::kill(pid, SIGKILL);
    wait_exit(pid);
    check_after_kill(path, "random kill " + std::to_string(k));
  }
  std::ostringstream os;
  os << "200 randomized apply/teardown rounds (" << properties << " properties), " << kills
     << " killed applies resumed from a parseable state file";
  return {expect.ok(), expect.ok() ? os.str() : expect.summary() + "; " + os.str()};
}

// `exac serve` on a fixed port, killed with SIGKILL.
class ServiceProcess {
 public:
  ServiceProcess(fs::path dir, int port) : dir_(std::move(dir)), port_(port) {
    util::write_file_atomic(dir_ / "experiment.json", manifest::to_json(test_manifest()).dump());
  }
  ~ServiceProcess() { kill(); }

  http::Endpoint endpoint() const { return {"127.0.0.1", port_}; }

  bool start() {
    pid_ = spawn_exac({"serve", "--manifest", "experiment.json", "--out", "data", "--endpoint",
                       "http://127.0.0.1:" + std::to_string(port_)},
                      dir_, dir_ / "serve.log");
    for (int i = 0; i < 200; ++i) {
      if (http::probe_health(endpoint(), std::chrono::milliseconds(200))) return true;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    return false;
  }

  void kill() {
    if (pid_ <= 0) return;
    ::kill(pid_, SIGKILL);
    wait_exit(pid_);
    pid_ = -1;
  }

 private:
  fs::path dir_;
  int port_;
  pid_t pid_ = -1;
};

Outcome monitoring() {
  testing::TempDir dir;
  Expect expect;
  constexpr std::int64_t kInterval = 200;
  std::mt19937_64 rng(0x5eed0009);
  ServiceProcess service(dir.path(), free_port());
  std::size_t episodes = 0, alarms_total = 0;
  for (int schedule = 0; schedule < 20; ++schedule) {
    const auto tag = "schedule " + std::to_string(schedule);
    const int outages = 1 + static_cast<int>(rng() % 2);
    std::vector<std::int64_t> alarm_ts;
    std::mutex mutex;
    std::vector<std::pair<std::int64_t, std::int64_t>> windows;
    if (!service.start()) return {false, tag + ": service did not start"};
    management::HealthMonitor monitor(
        {{"assembly_service", [&] { return http::probe_health(service.endpoint(), std::chrono::milliseconds(150)); }}},
        kInterval, 3,
        [&](const management::AlarmEvent& e) {
          std::lock_guard lock(mutex);
          alarm_ts.push_back(e.ts_ms);
        },
        {}, steady_ms);
    monitor.start();
    for (int o = 0; o < outages; ++o) {
      std::this_thread::sleep_for(std::chrono::milliseconds(500 + rng() % 400));
      const auto down_at = steady_ms();
      service.kill();
      std::this_thread::sleep_for(std::chrono::milliseconds(1000 + rng() % 600));
      const bool up = service.start();
      expect(up, tag + ": restart");
      windows.emplace_back(down_at, steady_ms());
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(500 + rng() % 400));
    monitor.stop();
    service.kill();

    std::lock_guard lock(mutex);
    episodes += windows.size();
    alarms_total += alarm_ts.size();
    expect(alarm_ts.size() == windows.size(), tag + ": " + std::to_string(alarm_ts.size()) + " alarms for " +
                                                  std::to_string(windows.size()) + " outages");
    for (std::size_t i = 0; i < std::min(alarm_ts.size(), windows.size()); ++i) {
      expect(alarm_ts[i] >= windows[i].first && alarm_ts[i] <= windows[i].second + kInterval,
             tag + ": alarm outside its outage");
    }
  }
  std::ostringstream os;
  os << "20 schedules, " << episodes << " outages, " << alarms_total << " alarms (interval " << kInterval
     << " ms, threshold 3)";
  return {expect.ok(), expect.ok() ? os.str() : expect.summary() + "; " + os.str()};
}

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "protocol reassembly", protocol_reassembly},
      {2, "crc vectors", crc_vectors},
      {3, "end-to-end cohort", end_to_end},
      {4, "funnel reproduction", funnel_reproduction},
      {5, "mixed-model oracle", lmm_oracle},
      {6, "result-pattern reproduction", result_pattern},
      {7, "exactly-once reward", exactly_once_reward},
      {8, "lifecycle idempotence", lifecycle_idempotence},
      {9, "health monitoring", monitoring},
  };
  return all;
}

}  // namespace

// Runs the numbered criteria given on the command line, or all of them.
int main(int argc, char** argv) {
  ::signal(SIGPIPE, SIG_IGN);
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  bool all_pass = true;
  for (const auto& c : criteria()) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all_pass = all_pass && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.title << "): " << o.detail
              << std::endl;
  }
  return all_pass ? 0 : 1;
}
