#include "commands.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "metairl/config.hpp"
#include "metairl/demos.hpp"
#include "metairl/error.hpp"
#include "metairl/eval.hpp"
#include "metairl/io.hpp"
#include "metairl/terrain.hpp"
#include "metairl/trainer.hpp"
#include "metairl/vrfn.hpp"

namespace metairl::cli {
namespace {

namespace fs = std::filesystem;

/// Raised for semantically invalid flag values (exit code 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

template <typename T>
void apply_if_set(const CLI::Option* opt, const T& value, T& target) {
  if (opt->count() > 0) target = value;
}

RunConfig load_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return config_from_string(read_text_file(path));
}

void write_file(const fs::path& path, std::string_view text) { write_text_file(path.string(), text); }

std::vector<std::size_t> parse_widths(const std::string& s) {
  std::vector<std::size_t> out;
  if (s.empty() || s == "none") return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(item, &pos);
      if (pos != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError("bad layer width '" + item + "' in --hidden");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// gen-world

struct GenWorldArgs {
  std::string config;
  std::uint64_t seed = 0;
  std::size_t width = 8, height = 8, hills = 3, tasks = 10;
  double goal_bonus = 10.0, gamma = 0.9, base_cost = 0.1;
  std::string out;
  CLI::Option *o_width, *o_height, *o_hills, *o_tasks, *o_bonus, *o_gamma, *o_base;
};

void add_gen_world(CLI::App& app, GenWorldArgs& a) {
  auto* sub = app.add_subcommand("gen-world", "Generate a random terrain with goal tasks");
  sub->add_option("--config", a.config, "Run config JSON supplying defaults");
  sub->add_option("--seed", a.seed, "World seed");
  a.o_width = sub->add_option("--width", a.width, "Grid width")->check(CLI::Range(2, 1 << 16));
  a.o_height = sub->add_option("--height", a.height, "Grid height")->check(CLI::Range(2, 1 << 16));
  a.o_hills = sub->add_option("--hills", a.hills, "Number of hills");
  a.o_tasks = sub->add_option("--tasks", a.tasks, "Number of goal tasks");
  a.o_bonus = sub->add_option("--goal-bonus", a.goal_bonus, "Extra reward at the goal");
  a.o_gamma = sub->add_option("--gamma", a.gamma, "Discount factor");
  a.o_base = sub->add_option("--base-cost", a.base_cost, "Cost floor of every cell");
  sub->add_option("--out", a.out, "Output world JSON")->required();
}

int cmd_gen_world(const GenWorldArgs& a, std::ostream& out) {
  RunConfig rc = load_config(a.config);
  auto& wp = rc.sweep.world;
  apply_if_set(a.o_width, a.width, wp.terrain.width);
  apply_if_set(a.o_height, a.height, wp.terrain.height);
  apply_if_set(a.o_hills, a.hills, wp.terrain.n_hills);
  apply_if_set(a.o_tasks, a.tasks, rc.world_tasks);
  apply_if_set(a.o_bonus, a.goal_bonus, wp.goal_bonus);
  apply_if_set(a.o_gamma, a.gamma, wp.gamma);
  apply_if_set(a.o_base, a.base_cost, wp.terrain.base_cost);
  if (!(wp.gamma >= 0.0 && wp.gamma < 1.0)) throw UsageError("--gamma must lie in [0, 1)");

  WorldFile w;
  w.terrain = generate_terrain(wp.terrain, mix64(a.seed, 1));
  w.tasks = make_tasks(w.terrain, rc.world_tasks, wp.goal_bonus, mix64(a.seed, 2));
  w.gamma = wp.gamma;
  write_text_file(a.out, world_to_string(w));

  Json effective = config_to_json(rc);
  effective["seed"] = a.seed;
  out << a.out << '\n' << "config_hash " << hash_hex(fnv1a64(effective.dump())) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// gen-demos

struct GenDemosArgs {
  std::string world, out;
  std::size_t n_traj = 10, max_len = 0;
  double b = 10.0;
  std::uint64_t seed = 0;
};

void add_gen_demos(CLI::App& app, GenDemosArgs& a) {
  auto* sub = app.add_subcommand("gen-demos", "Sample demonstrations from the ground-truth planner");
  sub->add_option("--world", a.world, "World JSON")->required();
  sub->add_option("--n-traj", a.n_traj, "Trajectories per task");
  sub->add_option("--b", a.b, "Boltzmann confidence of the demonstrator")->check(CLI::PositiveNumber);
  sub->add_option("--max-len", a.max_len, "Trajectory length cap (0: 25 * max(width, height))");
  sub->add_option("--seed", a.seed, "Sampling seed");
  sub->add_option("--out", a.out, "Output demo CSV")->required();
}

int cmd_gen_demos(const GenDemosArgs& a, std::ostream& out) {
  const WorldFile w = read_world(a.world);
  const DemoSet demos = generate_demos(w.terrain, w.tasks, a.n_traj, a.b, a.max_len, w.gamma, mix64(a.seed, 3));
  write_text_file(a.out, demos_to_string(demos, w.terrain));
  std::size_t rows = 0, truncated = 0;
  for (const auto& bucket : demos.per_task) {
    for (const auto& t : bucket) {
      rows += t.steps.size();
      truncated += t.truncated ? 1 : 0;
    }
  }
  out << a.out << '\n' << "rows " << rows << '\n' << "truncated " << truncated << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config, world, demos, out_dir;
  std::string loss = "huber", backup = "max", hidden = "64,32", activation = "tanh", features = "coords",
              domain = "all";
  double lambda = 1.0, lr = 0.01, b = 1.0, k = 1.0, delta = 1.0, tol = 1e-6;
  std::size_t iters = 2000;
  std::uint64_t seed = 0;
  bool check_grads = false;
  CLI::Option *o_loss, *o_backup, *o_hidden, *o_activation, *o_features, *o_domain, *o_lambda, *o_lr, *o_b, *o_k,
      *o_delta, *o_tol, *o_iters, *o_seed;
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* sub = app.add_subcommand("train", "Jointly learn per-task and baseline rewards from demonstrations");
  sub->add_option("--config", a.config, "Run config JSON supplying defaults");
  sub->add_option("--world", a.world, "World JSON")->required();
  sub->add_option("--demos", a.demos, "Demo CSV")->required();
  a.o_loss = sub->add_option("--loss", a.loss, "Sharing loss")
                 ->check(CLI::IsMember({"none", "l2", "huber", "stdev", "entropy"}));
  a.o_lambda = sub->add_option("--lambda", a.lambda, "Sharing weight")->check(CLI::NonNegativeNumber);
  a.o_delta = sub->add_option("--delta", a.delta, "Huber threshold")->check(CLI::PositiveNumber);
  a.o_domain = sub->add_option("--domain", a.domain, "States compared by the sharing loss")
                   ->check(CLI::IsMember({"all", "visited"}));
  a.o_lr = sub->add_option("--lr", a.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  a.o_iters = sub->add_option("--iters", a.iters, "Maximum iterations");
  a.o_tol = sub->add_option("--tol", a.tol, "Stop when the objective changes by less than this")
                ->check(CLI::NonNegativeNumber);
  a.o_b = sub->add_option("--b", a.b, "Boltzmann confidence in the likelihood")->check(CLI::PositiveNumber);
  a.o_backup = sub->add_option("--backup", a.backup, "Bellman backup operator")
                   ->check(CLI::IsMember({"max", "lse", "bgi"}));
  a.o_k = sub->add_option("--k", a.k, "Sharpness of the bgi backup")->check(CLI::PositiveNumber);
  a.o_hidden = sub->add_option("--hidden", a.hidden, "Hidden layer widths, comma separated, or 'none'");
  a.o_activation =
      sub->add_option("--activation", a.activation, "Hidden activation")->check(CLI::IsMember({"tanh", "relu"}));
  a.o_features =
      sub->add_option("--features", a.features, "State encoding")->check(CLI::IsMember({"coords", "onehot"}));
  a.o_seed = sub->add_option("--seed", a.seed, "Initialization seed");
  sub->add_option("--out-dir", a.out_dir, "Checkpoint directory")->required();
  sub->add_flag("--check-grads", a.check_grads, "Finite-difference check of every gradient (slow)");
}

RunConfig train_config(const TrainArgs& a) {
  RunConfig rc = load_config(a.config);
  auto& tc = rc.sweep.train;
  auto& obj = tc.objective;
  if (a.o_loss->count()) obj.sharing.kind = parse_divergence(a.loss);
  apply_if_set(a.o_lambda, a.lambda, obj.lambda);
  apply_if_set(a.o_delta, a.delta, obj.sharing.delta);
  if (a.o_domain->count()) obj.sharing.domain = parse_domain(a.domain);
  apply_if_set(a.o_lr, a.lr, tc.lr);
  apply_if_set(a.o_iters, a.iters, tc.max_iters);
  apply_if_set(a.o_tol, a.tol, tc.converge_tol);
  apply_if_set(a.o_b, a.b, obj.b);
  if (a.o_backup->count()) obj.backup.kind = parse_backup_kind(a.backup);
  apply_if_set(a.o_k, a.k, obj.backup.k);
  if (a.o_hidden->count()) tc.hidden = parse_widths(a.hidden);
  if (a.o_activation->count()) tc.activation = parse_activation(a.activation);
  if (a.o_features->count()) rc.sweep.features = parse_feature_kind(a.features);
  apply_if_set(a.o_seed, a.seed, tc.seed);
  tc.check_grads = a.check_grads;
  return rc;
}

void write_checkpoints(const fs::path& dir, const TrainResult& res, const RunConfig& rc, const WorldFile& w) {
  fs::create_directories(dir);
  write_file(dir / "baseline.json", params_to_string(res.theta_b));
  for (std::size_t i = 0; i < res.thetas.size(); ++i)
    write_file(dir / ("task_" + std::to_string(i) + ".json"), params_to_string(res.thetas[i]));
  const auto& tc = rc.sweep.train;
  Json manifest{{"config_hash", hash_hex(config_hash(rc))},
                {"iteration", res.iterations_run},
                {"objective", res.history.empty() ? Json(nullptr) : Json(res.history.back().total)},
                {"converged", res.converged},
                {"n_tasks", res.thetas.size()},
                {"gamma", w.gamma},
                {"backup", std::string(to_string(tc.objective.backup.kind))},
                {"k", tc.objective.backup.k},
                {"features", std::string(to_string(rc.sweep.features))},
                {"loss", std::string(to_string(tc.objective.sharing.kind))},
                {"lambda", tc.objective.lambda},
                {"b", tc.objective.b},
                {"seed", tc.seed}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  std::ostringstream log;
  log << "iter,objective,irl_term,sharing_term\n";
  for (std::size_t i = 0; i < res.history.size(); ++i) {
    const auto& h = res.history[i];
    log << i << ',' << format_double(h.total) << ',' << format_double(h.irl) << ',' << format_double(h.sharing)
        << '\n';
  }
  write_file(dir / "train_log.csv", log.str());
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const RunConfig rc = train_config(a);
  const WorldFile w = read_world(a.world);
  const DemoSet demos = demos_from_string(read_text_file(a.demos), w.terrain, w.tasks);
  const auto mdps = w.task_mdps();
  try {
    for (std::size_t i = 0; i < demos.n_tasks(); ++i)
      for (const auto& t : demos.per_task[i]) validate_trajectory(t, mdps[i]);
  } catch (const InvalidArgument& e) {
    throw FormatError(a.demos + ": " + e.what());
  }
  const StateFeatures features = make_features(rc.sweep.features, w.terrain.width, w.terrain.height);
  const TrainResult res = train(mdps, demos, features, rc.sweep.train);
  write_checkpoints(a.out_dir, res, rc, w);
  out << a.out_dir << '\n' << "iterations " << res.iterations_run << '\n';
  if (!res.history.empty()) out << "objective " << format_double(res.history.back().total) << '\n';
  out << "converged " << (res.converged ? "true" : "false") << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string world, checkpoints, out;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  auto* sub = app.add_subcommand("eval", "Correlate recovered rewards with the ground truth");
  sub->add_option("--world", a.world, "World JSON")->required();
  sub->add_option("--checkpoints", a.checkpoints, "Checkpoint directory written by train")->required();
  sub->add_option("--out", a.out, "Output CSV")->required();
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const WorldFile w = read_world(a.world);
  const fs::path dir(a.checkpoints);
  const Json manifest = detail::parse_json(read_text_file((dir / "manifest.json").string()), "manifest");
  BackupOperator op;
  FeatureKind features_kind = FeatureKind::Coords;
  try {
    op.kind = parse_backup_kind(manifest.value("backup", std::string("max")));
    op.k = manifest.value("k", 1.0);
    features_kind = parse_feature_kind(manifest.value("features", std::string("coords")));
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  const StateFeatures features = make_features(features_kind, w.terrain.width, w.terrain.height);

  std::ostringstream csv;
  csv << "task_id,correlation,status\n";
  for (std::size_t i = 0; i < w.tasks.size(); ++i) {
    const fs::path path = dir / ("task_" + std::to_string(i) + ".json");
    if (!fs::exists(path)) throw FormatError("missing checkpoint '" + path.string() + "'");
    const VrParams p = params_from_string(read_text_file(path.string()));
    const Mdp mdp = w.task_mdp(i);
    const auto learned = r_from_vr(forward(p, features), mdp, op);
    csv << i << ',';
    try {
      csv << format_double(evaluate_task(learned, mdp.reward())) << ",ok\n";
    } catch (const ZeroVariance&) {
      csv << ",zero_variance\n";
    }
  }
  write_text_file(a.out, csv.str());
  out << a.out << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
  std::string config, out_dir;
  std::size_t jobs = 1;
};

void add_sweep(CLI::App& app, SweepArgs& a) {
  auto* sub = app.add_subcommand("sweep", "Run the loss-kind x task-count x trajectory-count experiment");
  sub->add_option("--config", a.config, "Run config JSON");
  sub->add_option("--out-dir", a.out_dir, "Output directory")->required();
  sub->add_option("--jobs", a.jobs, "Parallel workers")->check(CLI::Range(1, 1024));
}

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  const RunConfig rc = load_config(a.config);
  const SweepResult result = run_sweep(rc.sweep, a.jobs);
  const auto rows = aggregate(result);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  write_file(dir / "results.csv", results_to_csv(result));
  write_file(dir / "aggregate.csv", aggregate_to_csv(rows));
  std::vector<std::size_t> panels = rc.sweep.task_counts;
  std::sort(panels.begin(), panels.end());
  panels.erase(std::unique(panels.begin(), panels.end()), panels.end());
  for (auto n : panels) write_file(dir / ("panel_" + std::to_string(n) + ".svg"), aggregate_panel_svg(rows, n));
  std::size_t failed = 0;
  for (const auto& r : result.records) failed += r.correlation ? 0 : 1;
  out << "config_hash " << hash_hex(config_hash(rc)) << '\n'
      << "records " << result.records.size() << '\n'
      << "failed " << failed << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// inspect

struct InspectArgs {
  std::string world;
};

void add_inspect(CLI::App& app, InspectArgs& a) {
  auto* sub = app.add_subcommand("inspect", "Summarize a world file");
  sub->add_option("--world", a.world, "World JSON")->required();
}

int cmd_inspect(const InspectArgs& a, std::ostream& out) {
  const WorldFile w = read_world(a.world);
  const auto costs = cost_map(w.terrain);
  const auto [lo, hi] = std::minmax_element(costs.begin(), costs.end());
  out << "size " << w.terrain.width << "x" << w.terrain.height << '\n'
      << "hills " << w.terrain.hills.size() << '\n'
      << "tasks " << w.tasks.size() << '\n'
      << "gamma " << format_double(w.gamma) << '\n'
      << "cost_min " << format_double(*lo) << '\n'
      << "cost_max " << format_double(*hi) << '\n'
      << "flat " << (*lo == *hi ? "true" : "false") << '\n';
  char buf[32];
  for (std::size_t y = 0; y < w.terrain.height; ++y) {
    for (std::size_t x = 0; x < w.terrain.width; ++x) {
      std::snprintf(buf, sizeof buf, "%s%6.2f", x ? " " : "", costs[w.terrain.index({x, y})]);
      out << buf;
    }
    out << '\n';
  }
  for (std::size_t i = 0; i < w.tasks.size(); ++i) {
    const Cell c = w.terrain.cell(w.tasks[i].goal);
    out << "task " << i << " goal " << c.x << ',' << c.y << " bonus " << format_double(w.tasks[i].goal_bonus) << '\n';
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-task inverse reinforcement learning with a shared baseline reward"};
  app.require_subcommand(1);

  GenWorldArgs gen_world;
  GenDemosArgs gen_demos;
  TrainArgs train_args;
  EvalArgs eval_args;
  SweepArgs sweep_args;
  InspectArgs inspect_args;
  add_gen_world(app, gen_world);
  add_gen_demos(app, gen_demos);
  add_train(app, train_args);
  add_eval(app, eval_args);
  add_sweep(app, sweep_args);
  add_inspect(app, inspect_args);

  std::vector<std::string> storage(args);
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (app.got_subcommand("gen-world")) return cmd_gen_world(gen_world, out);
    if (app.got_subcommand("gen-demos")) return cmd_gen_demos(gen_demos, out);
    if (app.got_subcommand("train")) return cmd_train(train_args, out);
    if (app.got_subcommand("eval")) return cmd_eval(eval_args, out);
    if (app.got_subcommand("sweep")) return cmd_sweep(sweep_args, out);
    if (app.got_subcommand("inspect")) return cmd_inspect(inspect_args, out);
  } catch (const NonFiniteLoss& e) {
    err << "error: " << e.what() << '\n' << "iteration " << e.iteration() << '\n';
    return kNumericalError;
  } catch (const NonConvergence& e) {
    err << "error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const GradientCheckFailed& e) {
    err << "error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }
  return kUsageError;
}

}  // namespace metairl::cli
