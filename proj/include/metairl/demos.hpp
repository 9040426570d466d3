#pragma once

// Demonstration trajectories sampled from the Boltzmann action model over an
// optimal Q, grouped per task.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "metairl/error.hpp"
#include "metairl/mdp.hpp"
#include "metairl/rng.hpp"
#include "metairl/terrain.hpp"

namespace metairl {

struct StateAction {
  std::size_t state = 0;
  std::size_t action = 0;

  friend bool operator==(const StateAction&, const StateAction&) = default;
};

struct Trajectory {
  std::vector<StateAction> steps;
  std::size_t task_id = 0;
  bool truncated = false;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct DemoSet {
  std::vector<std::vector<Trajectory>> per_task;
  double demo_b = 10.0;
  std::uint64_t seed = 0;

  std::size_t n_tasks() const noexcept { return per_task.size(); }

  /// All (state, action) pairs of one task in trajectory order.
  std::vector<StateAction> pairs(std::size_t task) const {
    std::vector<StateAction> out;
    for (const auto& traj : per_task.at(task))
      out.insert(out.end(), traj.steps.begin(), traj.steps.end());
    return out;
  }

  /// Keeps the first `n_tasks` tasks and the first `n_traj` trajectories of each.
  DemoSet prefix(std::size_t n_tasks, std::size_t n_traj) const {
    if (n_tasks > per_task.size()) throw InvalidArgument("demo prefix asks for more tasks than available");
    DemoSet out{{}, demo_b, seed};
    for (std::size_t i = 0; i < n_tasks; ++i) {
      const auto& src = per_task[i];
      if (n_traj > src.size()) throw InvalidArgument("demo prefix asks for more trajectories than available");
      out.per_task.emplace_back(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(n_traj));
    }
    return out;
  }
};

/// Samples an index from a discrete distribution with one uniform draw.
inline std::size_t sample_categorical(Rng& rng, std::span<const double> probs) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding left u above the cumulative sum; take the last nonzero entry.
  for (std::size_t i = probs.size(); i-- > 0;)
    if (probs[i] > 0.0) return i;
  return probs.size() - 1;
}

/// Rolls out the Boltzmann policy from `start`. Every recorded pair carries an
/// action; on reaching `goal` the pair (goal, a) is recorded and the rollout
/// stops. Hitting `max_len` pairs without reaching the goal sets `truncated`.
inline Trajectory sample_trajectory(const Mdp& mdp, std::span<const double> q, double b,
                                    std::size_t start, std::size_t max_len, std::size_t goal,
                                    std::uint64_t rng_seed, std::size_t task_id = 0) {
  const std::size_t na = mdp.n_actions();
  if (q.size() != mdp.n_states() * na) throw ShapeMismatch("q table does not match the mdp");
  if (start >= mdp.n_states()) throw OutOfBounds("start state outside the mdp");
  if (max_len == 0) throw InvalidArgument("max_len must be positive");

  Rng rng(rng_seed);
  Trajectory traj;
  traj.task_id = task_id;
  std::size_t s = start;
  std::vector<double> next_probs;
  while (true) {
    const auto policy = boltzmann_policy(q.subspan(s * na, na), b);
    const std::size_t a = sample_categorical(rng, policy);
    traj.steps.push_back({s, a});
    if (s == goal) break;
    if (traj.steps.size() >= max_len) {
      traj.truncated = true;
      break;
    }
    const auto succ = mdp.successors(s, a);
    next_probs.resize(succ.size());
    for (std::size_t i = 0; i < succ.size(); ++i) next_probs[i] = succ[i].prob;
    s = succ[sample_categorical(rng, next_probs)].next;
  }
  return traj;
}

/// Throws InvalidArgument unless consecutive pairs are reachable under `mdp`.
inline void validate_trajectory(const Trajectory& traj, const Mdp& mdp) {
  if (traj.steps.empty()) throw InvalidArgument("empty trajectory");
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const auto [s, a] = traj.steps[t];
    if (s >= mdp.n_states() || a >= mdp.n_actions())
      throw InvalidArgument("trajectory step " + std::to_string(t) + " out of range");
    if (t + 1 < traj.steps.size() && !(mdp.probability(s, a, traj.steps[t + 1].state) > 0.0))
      throw InvalidArgument("trajectory step " + std::to_string(t) + " is not transition-consistent");
  }
}

struct DemoParams {
  std::size_t n_traj = 10;
  double b = 10.0;
  std::size_t max_len = 0;  // 0: 25 * max(width, height)
  double gamma = 0.9;
};

inline std::size_t default_max_len(const Terrain& terrain) {
  return 25 * std::max(terrain.width, terrain.height);
}

/// For each task: solve the ground-truth MDP exactly, then sample trajectories
/// from uniformly drawn non-goal start cells. Trajectory j of task i uses seed
/// mix64(mix64(seed, i), j).
inline DemoSet generate_demos(const Terrain& terrain, std::span<const Task> tasks, std::size_t n_traj,
                              double b, std::size_t max_len, double gamma, std::uint64_t seed) {
  if (!(b > 0.0)) throw InvalidArgument("demo confidence b must be positive");
  if (max_len == 0) max_len = default_max_len(terrain);
  const std::size_t n = terrain.n_cells();
  DemoSet demos{{}, b, seed};
  demos.per_task.resize(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (n_traj == 0) continue;
    const Mdp mdp = ground_truth_mdp(terrain, tasks[i], gamma, true);
    const ValueSolution sol = value_iteration(mdp, BackupOperator::hard_max(), 1e-9);
    const std::uint64_t task_seed = mix64(seed, i);
    for (std::size_t j = 0; j < n_traj; ++j) {
      const std::uint64_t traj_seed = mix64(task_seed, j);
      Rng start_rng(splitmix64(traj_seed));
      std::size_t start = static_cast<std::size_t>(uniform_index(start_rng, n - 1));
      if (start >= tasks[i].goal) ++start;
      demos.per_task[i].push_back(
          sample_trajectory(mdp, sol.q, b, start, max_len, tasks[i].goal, traj_seed, i));
    }
  }
  return demos;
}

inline DemoSet generate_demos(const Terrain& terrain, std::span<const Task> tasks,
                              const DemoParams& p, std::uint64_t seed) {
  return generate_demos(terrain, tasks, p.n_traj, p.b, p.max_len, p.gamma, seed);
}

}  // namespace metairl
