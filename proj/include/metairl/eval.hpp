#pragma once

// Reward-recovery accuracy and the sharing-loss x task-count x trajectory-count
// sweep over randomly generated worlds.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "metairl/demos.hpp"
#include "metairl/error.hpp"
#include "metairl/losses.hpp"
#include "metairl/rng.hpp"
#include "metairl/terrain.hpp"
#include "metairl/trainer.hpp"
#include "metairl/vrfn.hpp"

namespace metairl {

/// Pearson product-moment correlation.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeMismatch("pearson inputs differ in length");
  if (x.size() < 2) throw InvalidArgument("pearson needs at least two samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw ZeroVariance("pearson of a constant vector");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Accuracy of a recovered reward: correlation over all states, goal included.
inline double evaluate_task(std::span<const double> learned_r, std::span<const double> true_r) {
  return pearson(learned_r, true_r);
}

struct WorldParams {
  TerrainParams terrain;
  double goal_bonus = 10.0;
  double gamma = 0.9;
};

struct SweepConfig {
  std::size_t n_worlds = 10;
  std::vector<std::size_t> task_counts;  // default 1..16
  std::vector<std::size_t> traj_counts;  // default 1..10
  std::vector<SharingKind> loss_kinds;   // default: all five
  WorldParams world;
  DemoParams demos;
  TrainConfig train;
  FeatureKind features = FeatureKind::Coords;
  std::uint64_t seed = 0;

  static SweepConfig defaults() {
    SweepConfig c;
    for (std::size_t i = 1; i <= 16; ++i) c.task_counts.push_back(i);
    for (std::size_t i = 1; i <= 10; ++i) c.traj_counts.push_back(i);
    for (auto d : kAllDivergences) c.loss_kinds.push_back(SharingKind{d, 1.0, SharingDomain::AllStates});
    return c;
  }

  std::size_t max_tasks() const { return *std::max_element(task_counts.begin(), task_counts.end()); }
  std::size_t max_trajs() const { return *std::max_element(traj_counts.begin(), traj_counts.end()); }

  void validate() const {
    if (n_worlds == 0) throw InvalidArgument("sweep needs at least one world");
    if (task_counts.empty() || traj_counts.empty() || loss_kinds.empty())
      throw InvalidArgument("sweep axes must be nonempty");
    for (auto c : task_counts)
      if (c == 0) throw InvalidArgument("task counts must be positive");
    for (auto c : traj_counts)
      if (c == 0) throw InvalidArgument("trajectory counts must be positive");
    if (max_tasks() > world.terrain.width * world.terrain.height)
      throw TooManyTasks("task count exceeds the number of cells");
  }
};

/// One world's generated data: terrain, tasks and the full demo set from which
/// every sweep cell takes a prefix.
struct World {
  Terrain terrain;
  std::vector<Task> tasks;
  DemoSet demos;
  std::vector<Mdp> mdps;
};

/// World w derives terrain, task and demo seeds from mix64(seed, w).
inline std::uint64_t world_seed(std::uint64_t base, std::size_t world_id) { return mix64(base, world_id); }

inline World make_world(const WorldParams& wp, const DemoParams& dp, std::size_t n_tasks, std::size_t n_traj,
                        std::uint64_t seed) {
  World w;
  w.terrain = generate_terrain(wp.terrain, mix64(seed, 1));
  w.tasks = make_tasks(w.terrain, n_tasks, wp.goal_bonus, mix64(seed, 2));
  w.demos = generate_demos(w.terrain, w.tasks, n_traj, dp.b, dp.max_len, wp.gamma, mix64(seed, 3));
  w.mdps.reserve(w.tasks.size());
  for (const auto& t : w.tasks) w.mdps.push_back(ground_truth_mdp(w.terrain, t, wp.gamma, true));
  return w;
}

struct SweepRecord {
  std::size_t world_id = 0;
  Divergence loss_kind = Divergence::None;
  std::size_t n_tasks = 0;
  std::size_t n_trajs = 0;
  std::size_t task_id = 0;
  std::optional<double> correlation;  // empty when the cell or task failed
  std::string status = "ok";
};

struct AggregateRow {
  Divergence loss_kind = Divergence::None;
  std::size_t n_tasks = 0;
  std::size_t n_trajs = 0;
  double mean_correlation = 0.0;  // NaN when no record succeeded
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
};

struct SweepResult {
  std::vector<SweepRecord> records;
};

/// Trains one cell and scores each task. Failures become per-record status tags.
inline std::vector<SweepRecord> run_cell(const World& world, const SharingKind& kind, std::size_t n_tasks,
                                         std::size_t n_trajs, const StateFeatures& features, TrainConfig train_cfg,
                                         std::size_t world_id) {
  std::vector<SweepRecord> out;
  auto fill = [&](const std::string& status) {
    out.clear();
    for (std::size_t i = 0; i < n_tasks; ++i) out.push_back({world_id, kind.kind, n_tasks, n_trajs, i, std::nullopt, status});
  };
  try {
    train_cfg.objective.sharing = kind;
    const DemoSet demos = world.demos.prefix(n_tasks, n_trajs);
    const std::span<const Mdp> mdps(world.mdps.data(), n_tasks);
    const TrainResult res = train(mdps, demos, features, train_cfg);
    const auto learned = learned_rewards(res, mdps, features, train_cfg.objective.backup);
    for (std::size_t i = 0; i < n_tasks; ++i) {
      SweepRecord rec{world_id, kind.kind, n_tasks, n_trajs, i, std::nullopt, "ok"};
      try {
        rec.correlation = evaluate_task(learned[i], mdps[i].reward());
      } catch (const ZeroVariance&) {
        rec.status = "zero_variance";
      }
      out.push_back(std::move(rec));
    }
  } catch (const NonConvergence&) {
    fill("non_convergence");
  } catch (const NonFiniteLoss&) {
    fill("non_finite_loss");
  } catch (const Error&) {
    fill("error");
  }
  return out;
}

/// Runs every (world, loss kind, task count, trajectory count) cell. Cells are
/// independent jobs distributed over `jobs` threads; records come back in
/// (world, loss kind, task count, trajectory count, task) order regardless.
/// All cells of one world share the training seed, so loss kinds are compared
/// on identical initializations and demonstrations.
inline SweepResult run_sweep(const SweepConfig& cfg, std::size_t jobs = 1) {
  cfg.validate();
  const std::size_t n_tasks_total = cfg.max_tasks();
  const std::size_t n_traj_total = cfg.max_trajs();
  const StateFeatures features = make_features(cfg.features, cfg.world.terrain.width, cfg.world.terrain.height);

  std::vector<World> worlds;
  worlds.reserve(cfg.n_worlds);
  for (std::size_t w = 0; w < cfg.n_worlds; ++w)
    worlds.push_back(make_world(cfg.world, cfg.demos, n_tasks_total, n_traj_total, world_seed(cfg.seed, w)));

  struct CellJob {
    std::size_t world, kind, n_tasks, n_trajs;
  };
  std::vector<CellJob> cells;
  for (std::size_t w = 0; w < cfg.n_worlds; ++w)
    for (std::size_t k = 0; k < cfg.loss_kinds.size(); ++k)
      for (auto nt : cfg.task_counts)
        for (auto nj : cfg.traj_counts) cells.push_back({w, k, nt, nj});

  std::vector<std::vector<SweepRecord>> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < cells.size(); c = next++) {
      const CellJob& cell = cells[c];
      TrainConfig tc = cfg.train;
      tc.seed = mix64(world_seed(cfg.seed, cell.world), 4);
      results[c] = run_cell(worlds[cell.world], cfg.loss_kinds[cell.kind], cell.n_tasks, cell.n_trajs, features, tc,
                            cell.world);
    }
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, cells.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  SweepResult out;
  for (auto& r : results) out.records.insert(out.records.end(), r.begin(), r.end());
  return out;
}

/// Mean correlation per (loss kind, task count, trajectory count); failed
/// records are excluded from the mean and counted.
inline std::vector<AggregateRow> aggregate(const SweepResult& result) {
  using Key = std::tuple<int, std::size_t, std::size_t>;
  std::map<Key, AggregateRow> rows;
  std::map<Key, std::vector<double>> values;
  for (const auto& r : result.records) {
    const Key key{static_cast<int>(r.loss_kind), r.n_tasks, r.n_trajs};
    auto& row = rows[key];
    row.loss_kind = r.loss_kind;
    row.n_tasks = r.n_tasks;
    row.n_trajs = r.n_trajs;
    if (r.correlation) {
      ++row.n_ok;
      values[key].push_back(*r.correlation);
    } else {
      ++row.n_failed;
    }
  }
  std::vector<AggregateRow> out;
  out.reserve(rows.size());
  for (auto& [key, row] : rows) {
    // Summing in sorted order makes the mean independent of record order.
    auto& v = values[key];
    std::sort(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += x;
    row.mean_correlation = row.n_ok > 0 ? sum / static_cast<double>(row.n_ok) : std::nan("");
    out.push_back(row);
  }
  return out;
}

}  // namespace metairl
