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

#include "exac/clientsim/grid.hpp"

#include <cmath>
#include <deque>

namespace exac::clientsim {

namespace {

constexpr double kEyeHeight = 1.6;

double quantize(double v) {
  const double q = std::round(v * 1e6) / 1e6;
  return q == 0.0 ? 0.0 : q;
}

}  // namespace

Grid Grid::parse(const std::vector<std::string>& rows) {
  Grid g;
  if (rows.empty() || rows[0].empty()) throw InvariantError("grid is empty");
  g.height_ = static_cast<int>(rows.size());
  g.width_ = static_cast<int>(rows[0].size());
  g.walkable_.assign(static_cast<std::size_t>(g.width_ * g.height_), 0);
  std::map<int, Cell> targets;
  bool has_origin = false;
  for (int z = 0; z < g.height_; ++z) {
    if (static_cast<int>(rows[z].size()) != g.width_) throw InvariantError("grid rows differ in length");
    for (int x = 0; x < g.width_; ++x) {
      const char c = rows[z][x];
      const Cell cell{x, z};
      if (c == '#') continue;
      if (c == 'O') {
        if (has_origin) throw InvariantError("grid has more than one origin");
        has_origin = true;
        g.origin_ = cell;
      } else if (c >= '1' && c <= '9') {
        if (!targets.emplace(c - '0', cell).second) throw InvariantError("duplicate target label");
      } else if (c != '.') {
        throw InvariantError(std::string("unknown grid symbol '") + c + "'");
      }
      g.walkable_[static_cast<std::size_t>(z * g.width_ + x)] = 1;
    }
  }
  if (!has_origin) throw InvariantError("grid has no origin");
  if (targets.empty()) throw InvariantError("grid has no targets");
  for (const auto& [_, cell] : targets) g.targets_.push_back(cell);

  for (const auto& target : g.targets_) {
    std::vector<int> dist(g.walkable_.size(), -1);
    std::deque<Cell> queue{target};
    dist[static_cast<std::size_t>(target.z * g.width_ + target.x)] = 0;
    while (!queue.empty()) {
      const auto c = queue.front();
      queue.pop_front();
      const int d = dist[static_cast<std::size_t>(c.z * g.width_ + c.x)];
      for (const auto n : g.neighbors(c)) {
        auto& slot = dist[static_cast<std::size_t>(n.z * g.width_ + n.x)];
        if (slot < 0) {
          slot = d + 1;
          queue.push_back(n);
        }
      }
    }
    if (dist[static_cast<std::size_t>(g.origin_.z * g.width_ + g.origin_.x)] < 0) {
      throw Unreachable("target at (" + std::to_string(target.x) + "," + std::to_string(target.z) +
                        ") is not reachable from the origin");
    }
    g.distances_.push_back(std::move(dist));
  }
  return g;
}

bool Grid::walkable(Cell c) const {
  return c.x >= 0 && c.z >= 0 && c.x < width_ && c.z < height_ &&
         walkable_[static_cast<std::size_t>(c.z * width_ + c.x)] != 0;
}

std::vector<Cell> Grid::neighbors(Cell c) const {
  std::vector<Cell> out;
  for (const Cell n : {Cell{c.x + 1, c.z}, Cell{c.x - 1, c.z}, Cell{c.x, c.z + 1}, Cell{c.x, c.z - 1}}) {
    if (walkable(n)) out.push_back(n);
  }
  return out;
}

int Grid::distance(std::size_t target_index, Cell from) const {
  return distances_.at(target_index)[static_cast<std::size_t>(from.z * width_ + from.x)];
}

const Grid& default_grid() {
  static const Grid grid = Grid::parse({
      "###########################",
      "#.......#.........#.......#",
      "#.......#....2....#.......#",
      "#...1...#.........#...3...#",
      "#.......#########.#.......#",
      "#.......#.........#.......#",
      "####.#######...#######.####",
      "#.........................#",
      "#.........................#",
      "#............O............#",
      "#.........................#",
      "#.........................#",
      "####.#######...#######.####",
      "#.......#.........#.......#",
      "#.......#########.#.......#",
      "#...4...#.........#...6...#",
      "#.......#....5....#.......#",
      "#.......#.........#.......#",
      "###########################",
  });
  return grid;
}

double SimAgentConfig::bias_for(const std::string& treatment) const {
  const auto it = treatment_bias.find(treatment);
  return it == treatment_bias.end() ? bias : it->second;
}

void validate(const SimAgentConfig& c) {
  auto prob = [](double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvariantError(std::string(what) + " must be within [0, 1]");
  };
  prob(c.bias, "bias");
  for (const auto& [_, b] : c.treatment_bias) prob(b, "treatment bias");
  prob(c.capability_pass_p, "capability_pass_p");
  prob(c.completion_p, "completion_p");
  if (c.sample_period_ms < 1) throw InvariantError("sample_period_ms must be >= 1");
  if (!(c.speed_cells_per_s > 0)) throw InvariantError("speed must be positive");
  if (c.grid == nullptr) throw InvariantError("no grid");
}

std::vector<Cell> biased_walk(const SimAgentConfig& config, double bias, std::uint64_t trial, std::mt19937_64& rng) {
  const Grid& g = *config.grid;
  if (trial < 1) throw InvariantError("trials are numbered from 1");
  const auto target_index = static_cast<std::size_t>((trial - 1) % g.targets().size());
  const Cell target = g.targets()[target_index];
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<Cell> walk{g.origin()};
  Cell at = g.origin();
  for (std::uint64_t step = 0; step < config.max_steps && !(at == target); ++step) {
    const auto options = g.neighbors(at);
    const bool greedy = coin(rng) < bias;
    if (greedy) {
      const int here = g.distance(target_index, at);
      std::vector<Cell> closer;
      for (const auto n : options) {
        if (g.distance(target_index, n) == here - 1) closer.push_back(n);
      }
      at = closer[std::uniform_int_distribution<std::size_t>(0, closer.size() - 1)(rng)];
    } else {
      at = options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
    }
    walk.push_back(at);
  }
  return walk;
}

std::vector<protocol::TrajectorySample> sample_walk(const std::vector<Cell>& walk, const SimAgentConfig& config) {
  std::vector<protocol::TrajectorySample> out;
  if (walk.empty()) return out;
  const auto moves = walk.size() - 1;
  const double speed = config.speed_cells_per_s;
  const double total_s = static_cast<double>(moves) / speed;
  const double period_s = static_cast<double>(config.sample_period_ms) / 1000.0;

  auto sample_at = [&](double t) {
    const double progress = std::min(t * speed, static_cast<double>(moves));
    auto seg = static_cast<std::size_t>(progress);
    if (seg >= moves && moves > 0) seg = moves - 1;
    const double frac = moves == 0 ? 0.0 : progress - static_cast<double>(seg);
    const Cell a = walk[seg];
    const Cell b = moves == 0 ? a : walk[seg + 1];
    const double dx = b.x - a.x;
    const double dz = b.z - a.z;
    double yaw = (dx == 0 && dz == 0) ? 0.0 : std::atan2(dx, dz) * 180.0 / M_PI;
    yaw = quantize(yaw);
    if (yaw >= 180.0) yaw -= 360.0;
    return protocol::TrajectorySample{quantize(t), quantize(a.x + frac * dx), kEyeHeight, quantize(a.z + frac * dz),
                                      yaw, 0.0};
  };

  for (std::uint64_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * period_s;
    if (t >= total_s) break;
    out.push_back(sample_at(t));
  }
  const auto last = sample_at(total_s);
  if (out.empty() || out.back().t < last.t) out.push_back(last);
  return out;
}

std::vector<protocol::TrajectorySample> simulate_trajectory(const SimAgentConfig& config, const std::string& treatment,
                                                            std::uint64_t trial, std::mt19937_64& rng) {
  return sample_walk(biased_walk(config, config.bias_for(treatment), trial, rng), config);
}

}  // namespace exac::clientsim
