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

#include "exac/manifest/lifecycle.hpp"

#include <algorithm>

namespace exac::manifest {

using nlohmann::json;

std::string_view to_string(ResourceKind kind) {
  switch (kind) {
    case ResourceKind::storage_bucket:
      return "storage_bucket";
    case ResourceKind::assembly_service:
      return "assembly_service";
    case ResourceKind::static_content:
      return "static_content";
    case ResourceKind::recruitment_hits:
      return "recruitment_hits";
  }
  return "?";
}

std::string_view to_string(ResourceStatus status) {
  switch (status) {
    case ResourceStatus::planned:
      return "planned";
    case ResourceStatus::created:
      return "created";
    case ResourceStatus::destroyed:
      return "destroyed";
  }
  return "?";
}

namespace {

std::optional<ResourceKind> kind_from_string(std::string_view s) {
  for (auto k : kResourceOrder) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::optional<ResourceStatus> status_from_string(std::string_view s) {
  for (auto st : {ResourceStatus::planned, ResourceStatus::created, ResourceStatus::destroyed}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

void bump(LifecycleState& state, const Persist& persist) {
  ++state.revision;
  if (persist) persist(state);
}

Resource& ensure_resource(LifecycleState& state, const Action& action) {
  if (auto* r = state.find(action.kind)) return *r;
  Resource r;
  r.id = action.resource_id;
  r.kind = action.kind;
  const auto pos = std::find_if(state.resources.begin(), state.resources.end(),
                                [&](const Resource& other) { return other.kind > action.kind; });
  return *state.resources.insert(pos, std::move(r));
}

}  // namespace

const Resource* LifecycleState::find(ResourceKind kind) const {
  const auto it = std::find_if(resources.begin(), resources.end(), [kind](const auto& r) { return r.kind == kind; });
  return it == resources.end() ? nullptr : &*it;
}

Resource* LifecycleState::find(ResourceKind kind) {
  return const_cast<Resource*>(std::as_const(*this).find(kind));
}

std::size_t LifecycleState::created_count() const {
  return static_cast<std::size_t>(std::count_if(resources.begin(), resources.end(),
                                                [](const auto& r) { return r.status == ResourceStatus::created; }));
}

json to_json(const LifecycleState& state) {
  json resources = json::array();
  for (const auto& r : state.resources) {
    resources.push_back({{"id", r.id},
                         {"kind", std::string(to_string(r.kind))},
                         {"status", std::string(to_string(r.status))},
                         {"attrs", r.attrs}});
  }
  return {{"resources", std::move(resources)}, {"revision", state.revision}};
}

LifecycleState state_from_json(const json& doc) {
  LifecycleState state;
  try {
    state.revision = doc.at("revision").get<std::uint64_t>();
    for (const auto& item : doc.at("resources")) {
      Resource r;
      r.id = item.at("id").get<std::string>();
      const auto kind = kind_from_string(item.at("kind").get<std::string>());
      const auto status = status_from_string(item.at("status").get<std::string>());
      if (!kind || !status) throw StateCorrupt("unknown resource kind or status");
      r.kind = *kind;
      r.status = *status;
      r.attrs = item.value("attrs", Attrs{});
      if (state.find(r.kind)) throw StateCorrupt("duplicate resource kind " + std::string(to_string(r.kind)));
      state.resources.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw StateCorrupt(std::string("malformed state: ") + e.what());
  }
  return state;
}

LifecycleState parse_state(std::string_view text) {
  try {
    return state_from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw StateCorrupt(std::string("state file is not valid JSON: ") + e.what());
  }
}

void check_order(const LifecycleState& state) {
  bool gap = false;
  for (auto kind : kResourceOrder) {
    const auto* r = state.find(kind);
    const bool created = r && r->status == ResourceStatus::created;
    if (created && gap) {
      throw StateCorrupt(std::string(to_string(kind)) + " is created but a dependency is not");
    }
    if (!created) gap = true;
  }
}

std::string resource_id(const ExperimentManifest& manifest, ResourceKind kind) {
  return manifest.name + "-" + std::string(to_string(kind));
}

std::vector<Action> plan(const ExperimentManifest& manifest, const LifecycleState& state) {
  check_order(state);
  std::vector<Action> out;
  for (auto kind : kResourceOrder) {
    const auto* r = state.find(kind);
    if (!r || r->status != ResourceStatus::created) out.push_back({kind, resource_id(manifest, kind)});
  }
  return out;
}

LifecycleState apply(const std::vector<Action>& actions, LifecycleState state, Executor& executor,
                     const ExperimentManifest& manifest, const Persist& persist) {
  if (actions.empty()) return state;
  check_order(state);
  for (const auto& a : actions) {
    auto& r = ensure_resource(state, a);
    if (r.status != ResourceStatus::created) r.status = ResourceStatus::planned;
  }
  bump(state, persist);

  for (const auto& a : actions) {
    const auto idx = static_cast<std::size_t>(std::find(kResourceOrder.begin(), kResourceOrder.end(), a.kind) -
                                              kResourceOrder.begin());
    for (std::size_t dep = 0; dep < idx; ++dep) {
      const auto* d = state.find(kResourceOrder[dep]);
      if (!d || d->status != ResourceStatus::created) {
        throw InvariantError("cannot create " + a.resource_id + " before " +
                             std::string(to_string(kResourceOrder[dep])));
      }
    }
    if (state.find(a.kind)->status == ResourceStatus::created) continue;
    Attrs attrs;
    try {
      attrs = executor.create(a, manifest, state);
    } catch (const ExecutorError&) {
      throw;
    } catch (const std::exception& e) {
      throw ExecutorError("create " + a.resource_id + ": " + e.what());
    }
    auto* r = state.find(a.kind);
    r->id = a.resource_id;
    r->status = ResourceStatus::created;
    r->attrs = std::move(attrs);
    bump(state, persist);
  }
  return state;
}

LifecycleState teardown(LifecycleState state, Executor& executor, const Persist& persist) {
  for (auto it = kResourceOrder.rbegin(); it != kResourceOrder.rend(); ++it) {
    auto* r = state.find(*it);
    if (!r || r->status != ResourceStatus::created) continue;
    try {
      executor.destroy(*r);
    } catch (const ExecutorError&) {
      throw;
    } catch (const std::exception& e) {
      throw ExecutorError("destroy " + r->id + ": " + e.what());
    }
    r->status = ResourceStatus::destroyed;
    bump(state, persist);
  }
  return state;
}

void MockExecutor::record(std::string call) {
  calls_.push_back(std::move(call));
  if (fail_on_call_ && calls_.size() == *fail_on_call_) throw ExecutorError("injected failure on " + calls_.back());
}

Attrs MockExecutor::create(const Action& action, const ExperimentManifest&, const LifecycleState&) {
  record("create:" + std::string(to_string(action.kind)));
  return {{"mock", "true"}};
}

void MockExecutor::destroy(const Resource& resource) { record("destroy:" + std::string(to_string(resource.kind))); }

StateStore::StateStore(std::filesystem::path path)
    : path_(std::move(path)), lock_(std::make_unique<util::FileLock>(path_.string() + ".lock")) {}

LifecycleState StateStore::load() const {
  const auto text = util::try_read_file(path_);
  if (!text) return {};
  return parse_state(*text);
}

void StateStore::save(const LifecycleState& state) const { util::write_file_atomic(path_, to_json(state).dump(2) + "\n"); }

}  // namespace exac::manifest
