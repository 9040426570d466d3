#pragma once

// Hilly cost landscapes on a grid and the goal-conditioned path-planning MDPs
// built on top of them.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "metairl/error.hpp"
#include "metairl/mdp.hpp"
#include "metairl/rng.hpp"

namespace metairl {

struct Cell {
  std::size_t x = 0;
  std::size_t y = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
};

/// A cost peak whose contribution decays as peak * exp(-decay * distance).
struct Hill {
  double cx = 0.0;
  double cy = 0.0;
  double peak = 1.0;
  double decay = 1.0;

  friend bool operator==(const Hill&, const Hill&) = default;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct Terrain {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Hill> hills;
  double base_cost = 0.0;
  std::uint64_t seed = 0;

  std::size_t n_cells() const noexcept { return width * height; }
  std::size_t index(Cell c) const noexcept { return c.y * width + c.x; }
  Cell cell(std::size_t state) const noexcept { return {state % width, state / width}; }

  friend bool operator==(const Terrain&, const Terrain&) = default;
};

struct Task {
  std::size_t goal = 0;
  double goal_bonus = 10.0;

  friend bool operator==(const Task&, const Task&) = default;
};

/// Grid moves. Up decreases y (row index), down increases it.
enum class Move : std::size_t { Up = 0, Down = 1, Left = 2, Right = 3 };
inline constexpr std::size_t kNumMoves = 4;

struct TerrainParams {
  std::size_t width = 8;
  std::size_t height = 8;
  std::size_t n_hills = 3;
  Interval peak_range{1.0, 5.0};
  Interval decay_range{0.3, 1.0};
  double base_cost = 0.1;
};

inline Terrain generate_terrain(std::size_t width, std::size_t height, std::size_t n_hills,
                                Interval peak_range, Interval decay_range, double base_cost,
                                std::uint64_t seed) {
  if (width < 2 || height < 2) throw InvalidArgument("terrain must be at least 2x2");
  auto check = [](Interval r, const char* name) {
    if (!(r.lo > 0.0) || !(r.hi >= r.lo) || !std::isfinite(r.hi))
      throw InvalidRange(std::string(name) + " must be a nonempty interval of positive values");
  };
  check(peak_range, "peak range");
  check(decay_range, "decay range");
  if (!(base_cost >= 0.0)) throw InvalidArgument("base cost must be nonnegative");

  Terrain t{width, height, {}, base_cost, seed};
  Rng rng(seed);
  t.hills.reserve(n_hills);
  for (std::size_t i = 0; i < n_hills; ++i) {
    Hill h;
    h.cx = uniform01(rng) * static_cast<double>(width);
    h.cy = uniform01(rng) * static_cast<double>(height);
    h.peak = uniform_real(rng, peak_range.lo, peak_range.hi);
    h.decay = uniform_real(rng, decay_range.lo, decay_range.hi);
    t.hills.push_back(h);
  }
  return t;
}

inline Terrain generate_terrain(const TerrainParams& p, std::uint64_t seed) {
  return generate_terrain(p.width, p.height, p.n_hills, p.peak_range, p.decay_range, p.base_cost,
                          seed);
}

inline double cost_at(const Terrain& terrain, Cell c) {
  if (c.x >= terrain.width || c.y >= terrain.height) throw OutOfBounds("cell outside the terrain");
  double cost = terrain.base_cost;
  for (const auto& h : terrain.hills) {
    const double dx = static_cast<double>(c.x) - h.cx;
    const double dy = static_cast<double>(c.y) - h.cy;
    cost += h.peak * std::exp(-h.decay * std::sqrt(dx * dx + dy * dy));
  }
  return cost;
}

inline std::vector<double> cost_map(const Terrain& terrain) {
  std::vector<double> costs(terrain.n_cells());
  for (std::size_t s = 0; s < costs.size(); ++s) costs[s] = cost_at(terrain, terrain.cell(s));
  return costs;
}

/// Successor of `state` under `move` with boundary clamping.
inline std::size_t grid_step(std::size_t width, std::size_t height, std::size_t state, Move move) {
  std::size_t x = state % width;
  std::size_t y = state / width;
  switch (move) {
    case Move::Up:
      if (y > 0) --y;
      break;
    case Move::Down:
      if (y + 1 < height) ++y;
      break;
    case Move::Left:
      if (x > 0) --x;
      break;
    case Move::Right:
      if (x + 1 < width) ++x;
      break;
  }
  return y * width + x;
}

/// Ground-truth reward: -cost everywhere, plus the goal bonus at the goal.
inline std::vector<double> task_reward(const Terrain& terrain, const Task& task) {
  auto r = cost_map(terrain);
  for (double& v : r) v = -v;
  r[task.goal] += task.goal_bonus;
  return r;
}

inline Mdp ground_truth_mdp(const Terrain& terrain, const Task& task, double gamma,
                            bool goal_absorbing = true) {
  const std::size_t n = terrain.n_cells();
  if (task.goal >= n) throw OutOfBounds("task goal outside the terrain");
  std::vector<std::vector<Transition>> trans(n * kNumMoves);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < kNumMoves; ++a) {
      const std::size_t next = (goal_absorbing && s == task.goal)
                                   ? s
                                   : grid_step(terrain.width, terrain.height, s, Move{a});
      trans[s * kNumMoves + a] = {Transition{next, 1.0}};
    }
  }
  return Mdp(n, kNumMoves, std::move(trans), task_reward(terrain, task), gamma);
}

/// Draws `n_tasks` distinct goal cells (partial Fisher-Yates).
inline std::vector<Task> make_tasks(const Terrain& terrain, std::size_t n_tasks, double goal_bonus,
                                    std::uint64_t seed) {
  const std::size_t n = terrain.n_cells();
  if (n_tasks > n) throw TooManyTasks("requested " + std::to_string(n_tasks) + " tasks but only " +
                                      std::to_string(n) + " cells");
  if (!(goal_bonus > 0.0)) throw InvalidArgument("goal bonus must be positive");
  std::vector<std::size_t> cells(n);
  std::iota(cells.begin(), cells.end(), std::size_t{0});
  Rng rng(seed);
  std::vector<Task> tasks;
  tasks.reserve(n_tasks);
  for (std::size_t i = 0; i < n_tasks; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, n - i));
    std::swap(cells[i], cells[j]);
    tasks.push_back(Task{cells[i], goal_bonus});
  }
  return tasks;
}

}  // namespace metairl
