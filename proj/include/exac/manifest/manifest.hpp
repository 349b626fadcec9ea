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

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "exac/error.hpp"

namespace exac::manifest {

// Protocol-checklist entries, keyed by the ten recognized questions.
inline constexpr std::array<std::string_view, 10> kVrCheckKeys = {
    "domain_specificity",        "ecological_validity", "technical_feasibility", "user_feasibility",
    "user_motivation",           "task_adaptability",   "performance_quantification",
    "immersive_capacities",      "training_feasibility", "predictable_pitfalls"};

struct VrCheckDoc {
  std::map<std::string, std::string> entries;
};

struct ExperimentManifest {
  std::string name;
  std::vector<std::string> treatments = {"Control", "A", "B"};
  std::uint64_t trials_per_participant = 6;
  std::uint64_t sample_period_ms = 20;
  std::uint64_t chunk_size_bytes = 4300;
  double reward_base_usd = 4.50;
  double reward_bonus_usd = 1.00;
  double bonus_threshold_min = 20;
  std::string salt;
  std::optional<VrCheckDoc> protocol_doc;
};

// Throws SchemaError (unknown field, wrong type, missing name/salt) or
// InvariantError.
ExperimentManifest parse_manifest(std::string_view text);
ExperimentManifest manifest_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentManifest& manifest);

// Throws InvariantError when a field is out of range.
void check_invariants(const ExperimentManifest& manifest);

enum class ServiceKind { storage, compute, recruitment };

std::string_view to_string(ServiceKind kind);

struct ServiceRequirement {
  std::string name;
  ServiceKind kind = ServiceKind::storage;
  std::map<std::string, std::string> params;
};

// A JSON array of requirements. Names must be unique.
std::vector<ServiceRequirement> parse_services(std::string_view text);
nlohmann::json to_json(const std::vector<ServiceRequirement>& services);

struct ValidationReport {
  std::vector<std::string> warnings;
  std::vector<std::string> errors;

  bool empty() const { return warnings.empty() && errors.empty(); }
};

ValidationReport validate_manifest(const ExperimentManifest& manifest,
                                   const std::vector<ServiceRequirement>& services);

}  // namespace exac::manifest
