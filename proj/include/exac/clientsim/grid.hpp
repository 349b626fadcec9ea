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
#include <map>
#include <random>
#include <string>
#include <vector>

#include "exac/error.hpp"
#include "exac/protocol/trajectory.hpp"

namespace exac::clientsim {

struct Cell {
  int x = 0;
  int z = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
};

class Unreachable : public Error {
 public:
  using Error::Error;
};

// Walkable-cell floor plan; one cell is one meter.
class Grid {
 public:
  // Rows of '#' (wall), '.' (floor), 'O' (origin), digits '1'..'9'
  // (targets, numbered in trial order). Throws InvariantError on bad input
  // and Unreachable when a target cannot be reached from the origin.
  static Grid parse(const std::vector<std::string>& rows);

  int width() const { return width_; }
  int height() const { return height_; }
  bool walkable(Cell c) const;
  Cell origin() const { return origin_; }
  const std::vector<Cell>& targets() const { return targets_; }

  // Walkable 4-neighbours in a fixed order.
  std::vector<Cell> neighbors(Cell c) const;
  // BFS step counts to `target`; -1 where unreachable.
  const std::vector<int>& distances_to(std::size_t target_index) const { return distances_[target_index]; }
  int distance(std::size_t target_index, Cell from) const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<char> walkable_;
  Cell origin_;
  std::vector<Cell> targets_;
  std::vector<std::vector<int>> distances_;
};

// Central corridor with the origin in its middle and six target rooms,
// every target 15 steps away.
const Grid& default_grid();

struct SimAgentConfig {
  std::uint64_t seed = 0;
  const Grid* grid = &default_grid();
  // Probability of a shortest-path step; otherwise a uniform neighbour.
  double bias = 0.70;
  std::map<std::string, double> treatment_bias = {{"Control", 0.70}, {"A", 0.70}, {"B", 0.85}};
  std::uint64_t sample_period_ms = 20;
  double speed_cells_per_s = 1.4;
  double capability_pass_p = 0.68;
  double completion_p = 0.47;
  std::uint64_t max_steps = 100'000;

  double bias_for(const std::string& treatment) const;
};

// Throws InvariantError on out-of-range probabilities or periods.
void validate(const SimAgentConfig& config);

// Cells visited by a biased walk from the origin to target `trial - 1`
// (trials are 1-based, wrapping over the targets). Stops at the target or
// after max_steps moves.
std::vector<Cell> biased_walk(const SimAgentConfig& config, double bias, std::uint64_t trial, std::mt19937_64& rng);

// Samples the walk every sample period plus once on arrival. Positions are
// interpolated between cells at eye height; yaw faces the direction of
// travel. Values are rounded to the wire precision so they survive the
// trajectory encoding unchanged.
std::vector<protocol::TrajectorySample> sample_walk(const std::vector<Cell>& walk, const SimAgentConfig& config);

std::vector<protocol::TrajectorySample> simulate_trajectory(const SimAgentConfig& config, const std::string& treatment,
                                                            std::uint64_t trial, std::mt19937_64& rng);

}  // namespace exac::clientsim
