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

#include "exac/manifest/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace exac::manifest {

using nlohmann::json;

namespace {

bool known_field(std::string_view key) {
  static constexpr std::array<std::string_view, 10> kFields = {
      "name",           "treatments",       "trials_per_participant", "sample_period_ms", "chunk_size_bytes",
      "reward_base_usd", "reward_bonus_usd", "bonus_threshold_min",    "salt",             "protocol_doc"};
  return std::find(kFields.begin(), kFields.end(), key) != kFields.end();
}

void require_object(const json& doc, const std::string& where) {
  if (!doc.is_object()) throw SchemaError(where + ": expected an object");
}

std::string get_string(const json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (!v.is_string()) throw SchemaError(std::string(key) + ": expected a string");
  return v.get<std::string>();
}

std::uint64_t get_uint(const json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (!v.is_number_integer()) throw SchemaError(std::string(key) + ": expected an integer");
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  const auto value = v.get<std::int64_t>();
  if (value < 0) throw InvariantError(std::string(key) + ": must be positive");
  return static_cast<std::uint64_t>(value);
}

double get_number(const json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (!v.is_number()) throw SchemaError(std::string(key) + ": expected a number");
  return v.get<double>();
}

std::map<std::string, std::string> get_string_map(const json& doc, const std::string& where) {
  require_object(doc, where);
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : doc.items()) {
    if (!v.is_string()) throw SchemaError(where + "." + k + ": expected a string");
    out[k] = v.get<std::string>();
  }
  return out;
}

}  // namespace

void check_invariants(const ExperimentManifest& m) {
  if (m.name.empty()) throw InvariantError("name: must be non-empty");
  if (m.salt.empty()) throw InvariantError("salt: must be non-empty");
  if (m.treatments.empty()) throw InvariantError("treatments: must be non-empty");
  std::set<std::string> seen;
  for (const auto& t : m.treatments) {
    if (t.empty()) throw InvariantError("treatments: labels must be non-empty");
    if (!seen.insert(t).second) throw InvariantError("treatments: duplicate label '" + t + "'");
  }
  if (m.trials_per_participant < 1) throw InvariantError("trials_per_participant: must be positive");
  if (m.sample_period_ms < 1) throw InvariantError("sample_period_ms: must be >= 1");
  if (m.chunk_size_bytes < 64) throw InvariantError("chunk_size_bytes: must be >= 64");
  auto non_negative = [](double v, const char* what) {
    if (!std::isfinite(v) || v < 0) throw InvariantError(std::string(what) + ": must be non-negative");
  };
  non_negative(m.reward_base_usd, "reward_base_usd");
  non_negative(m.reward_bonus_usd, "reward_bonus_usd");
  if (!std::isfinite(m.bonus_threshold_min) || m.bonus_threshold_min <= 0) {
    throw InvariantError("bonus_threshold_min: must be positive");
  }
  if (m.protocol_doc) {
    for (const auto& [k, v] : m.protocol_doc->entries) {
      if (std::find(kVrCheckKeys.begin(), kVrCheckKeys.end(), k) == kVrCheckKeys.end()) {
        throw SchemaError("protocol_doc." + k + ": unknown key");
      }
      if (v.empty()) throw InvariantError("protocol_doc." + k + ": must be non-empty");
    }
  }
}

ExperimentManifest manifest_from_json(const json& doc) {
  require_object(doc, "manifest");
  for (const auto& [k, _] : doc.items()) {
    if (!known_field(k)) throw SchemaError(k + ": unknown field");
  }
  if (!doc.contains("name")) throw SchemaError("name: required");
  if (!doc.contains("salt")) throw SchemaError("salt: required");

  ExperimentManifest m;
  m.name = get_string(doc, "name");
  m.salt = get_string(doc, "salt");
  if (doc.contains("treatments")) {
    const auto& t = doc.at("treatments");
    if (!t.is_array()) throw SchemaError("treatments: expected an array");
    m.treatments.clear();
    for (const auto& label : t) {
      if (!label.is_string()) throw SchemaError("treatments: expected strings");
      m.treatments.push_back(label.get<std::string>());
    }
  }
  if (doc.contains("trials_per_participant")) m.trials_per_participant = get_uint(doc, "trials_per_participant");
  if (doc.contains("sample_period_ms")) m.sample_period_ms = get_uint(doc, "sample_period_ms");
  if (doc.contains("chunk_size_bytes")) m.chunk_size_bytes = get_uint(doc, "chunk_size_bytes");
  if (doc.contains("reward_base_usd")) m.reward_base_usd = get_number(doc, "reward_base_usd");
  if (doc.contains("reward_bonus_usd")) m.reward_bonus_usd = get_number(doc, "reward_bonus_usd");
  if (doc.contains("bonus_threshold_min")) m.bonus_threshold_min = get_number(doc, "bonus_threshold_min");
  if (doc.contains("protocol_doc") && !doc.at("protocol_doc").is_null()) {
    m.protocol_doc = VrCheckDoc{get_string_map(doc.at("protocol_doc"), "protocol_doc")};
  }
  check_invariants(m);
  return m;
}

ExperimentManifest parse_manifest(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("manifest is not valid JSON: ") + e.what());
  }
  return manifest_from_json(doc);
}

json to_json(const ExperimentManifest& m) {
  json out{{"name", m.name},
           {"treatments", m.treatments},
           {"trials_per_participant", m.trials_per_participant},
           {"sample_period_ms", m.sample_period_ms},
           {"chunk_size_bytes", m.chunk_size_bytes},
           {"reward_base_usd", m.reward_base_usd},
           {"reward_bonus_usd", m.reward_bonus_usd},
           {"bonus_threshold_min", m.bonus_threshold_min},
           {"salt", m.salt}};
  if (m.protocol_doc) out["protocol_doc"] = m.protocol_doc->entries;
  return out;
}

std::string_view to_string(ServiceKind kind) {
  switch (kind) {
    case ServiceKind::storage:
      return "storage";
    case ServiceKind::compute:
      return "compute";
    case ServiceKind::recruitment:
      return "recruitment";
  }
  return "?";
}

std::vector<ServiceRequirement> parse_services(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("services file is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw SchemaError("services: expected an array");
  std::vector<ServiceRequirement> out;
  std::set<std::string> names;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& item = doc[i];
    const auto where = "services[" + std::to_string(i) + "]";
    require_object(item, where);
    for (const auto& [k, _] : item.items()) {
      if (k != "name" && k != "kind" && k != "params") throw SchemaError(where + "." + k + ": unknown field");
    }
    ServiceRequirement req;
    try {
      req.name = get_string(item, "name");
      const auto kind = get_string(item, "kind");
      if (kind == "storage") {
        req.kind = ServiceKind::storage;
      } else if (kind == "compute") {
        req.kind = ServiceKind::compute;
      } else if (kind == "recruitment") {
        req.kind = ServiceKind::recruitment;
      } else {
        throw SchemaError("kind: unknown value '" + kind + "'");
      }
    } catch (const json::out_of_range&) {
      throw SchemaError(where + ": name and kind are required");
    }
    if (item.contains("params")) req.params = get_string_map(item.at("params"), where + ".params");
    if (!names.insert(req.name).second) throw InvariantError(where + ": duplicate name '" + req.name + "'");
    out.push_back(std::move(req));
  }
  return out;
}

json to_json(const std::vector<ServiceRequirement>& services) {
  json out = json::array();
  for (const auto& s : services) {
    out.push_back({{"name", s.name}, {"kind", std::string(to_string(s.kind))}, {"params", s.params}});
  }
  return out;
}

ValidationReport validate_manifest(const ExperimentManifest& m, const std::vector<ServiceRequirement>& services) {
  ValidationReport report;
  for (const auto key : kVrCheckKeys) {
    if (!m.protocol_doc || !m.protocol_doc->entries.count(std::string(key))) {
      report.warnings.push_back("missing protocol_doc." + std::string(key));
    }
  }
  auto has = [&services](ServiceKind kind) {
    return std::any_of(services.begin(), services.end(), [kind](const auto& s) { return s.kind == kind; });
  };
  if (!has(ServiceKind::storage)) report.errors.push_back("missing storage");
  if (!has(ServiceKind::compute)) report.errors.push_back("missing compute");
  return report;
}

}  // namespace exac::manifest
