#pragma once

// Joint full-batch Adam descent on the multi-task objective over the baseline
// network and every per-task network.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "metairl/error.hpp"
#include "metairl/losses.hpp"
#include "metairl/rng.hpp"
#include "metairl/vrfn.hpp"

namespace metairl {

struct TrainConfig {
  double lr = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t max_iters = 2000;
  double converge_tol = 1e-6;
  std::uint64_t seed = 0;
  MetaObjectiveConfig objective;
  std::vector<std::size_t> hidden = {64, 32};
  Activation activation = Activation::Tanh;
  bool check_grads = false;
  /// Index of the first task for init-seed derivation, so a subset of tasks can
  /// be trained with the seeds it would get inside a larger run.
  std::size_t task_index_offset = 0;

  void validate() const {
    if (!(lr > 0.0)) throw InvalidArgument("learning rate must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
      throw InvalidArgument("adam betas must lie in [0, 1)");
    if (!(converge_tol >= 0.0)) throw InvalidArgument("convergence tolerance must be nonnegative");
    if (!(objective.b > 0.0)) throw InvalidArgument("boltzmann confidence b must be positive");
    if (!(objective.lambda >= 0.0)) throw InvalidArgument("sharing weight lambda must be nonnegative");
  }
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

inline void adam_step(VrParams& params, const VrParams& grads, AdamState& state, const TrainConfig& cfg) {
  const std::size_t n = params.values.size();
  if (grads.values.size() != n || state.m.size() != n || state.v.size() != n)
    throw ShapeMismatch("adam step shapes disagree");
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
  for (std::size_t k = 0; k < n; ++k) {
    const double g = grads.values[k];
    state.m[k] = cfg.adam_beta1 * state.m[k] + (1.0 - cfg.adam_beta1) * g;
    state.v[k] = cfg.adam_beta2 * state.v[k] + (1.0 - cfg.adam_beta2) * g * g;
    const double m_hat = state.m[k] / c1;
    const double v_hat = state.v[k] / c2;
    params.values[k] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
  }
}

/// Relative gradient error |a - n| / max(|a|, |n|, floor). The floor turns the
/// check into an absolute one for gradients too small to resolve by finite
/// differences of an O(100) objective.
inline double gradient_relative_error(double analytic, double numeric, double floor = 1e-4) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct TrainResult {
  VrParams theta_b;
  std::vector<VrParams> thetas;
  std::vector<ObjectiveValue> history;
  std::size_t iterations_run = 0;
  bool converged = false;

  std::vector<double> objective_history() const {
    std::vector<double> h;
    h.reserve(history.size());
    for (const auto& o : history) h.push_back(o.total);
    return h;
  }
};

inline Arch make_arch(const TrainConfig& cfg, std::size_t input_dim) {
  return Arch{input_dim, cfg.hidden, cfg.activation};
}

/// Initial seeds: baseline mix64(seed, 0), task i mix64(seed, i + 1).
inline std::uint64_t baseline_init_seed(std::uint64_t seed) { return mix64(seed, 0); }
inline std::uint64_t task_init_seed(std::uint64_t seed, std::size_t task) { return mix64(seed, task + 1); }

namespace detail {

/// Central differences on `samples` random coordinates across all parameter
/// sets; returns the worst relative error.
inline double spot_check_gradient(VrParams theta_b, std::vector<VrParams> thetas, std::span<const Mdp> mdps,
                                  const StateFeatures& features, std::span<const TaskData> tasks,
                                  const MetaObjectiveConfig& cfg, const ObjectiveGradient& analytic,
                                  std::size_t samples, Rng& rng) {
  constexpr double h = 1e-5;
  const std::size_t n_sets = thetas.size() + 1;
  double worst = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    const std::size_t set = static_cast<std::size_t>(uniform_index(rng, n_sets));
    VrParams& p = set == 0 ? theta_b : thetas[set - 1];
    const VrParams& g = set == 0 ? analytic.grad_b : analytic.grads[set - 1];
    const std::size_t c = static_cast<std::size_t>(uniform_index(rng, p.size()));
    const double orig = p.values[c];
    p.values[c] = orig + h;
    const double up = meta_objective(theta_b, thetas, mdps, features, tasks, cfg).total;
    p.values[c] = orig - h;
    const double down = meta_objective(theta_b, thetas, mdps, features, tasks, cfg).total;
    p.values[c] = orig;
    worst = std::max(worst, gradient_relative_error(g.values[c], (up - down) / (2.0 * h)));
  }
  return worst;
}

}  // namespace detail

/// Trains on the transition structure of `mdps` (their rewards are never read).
/// Each iteration evaluates the objective and its gradient at the current
/// parameters, records it, and stops once the change from the previous
/// iteration falls below `converge_tol`; otherwise every parameter set takes
/// one Adam step.
inline TrainResult train(std::span<const Mdp> mdps, const DemoSet& demos, const StateFeatures& features,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (demos.n_tasks() != mdps.size()) throw ShapeMismatch("demo task count does not match mdp count");
  const Arch arch = make_arch(cfg, features.dim);
  const auto tasks = prepare_tasks(demos, features.n_states());

  TrainResult res;
  res.theta_b = init_params(arch, baseline_init_seed(cfg.seed));
  res.thetas.reserve(mdps.size());
  for (std::size_t i = 0; i < mdps.size(); ++i) res.thetas.push_back(init_params(arch, task_init_seed(cfg.seed, cfg.task_index_offset + i)));

  AdamState opt_b(arch.num_params());
  std::vector<AdamState> opt(mdps.size(), AdamState(arch.num_params()));
  const bool sharing = cfg.objective.sharing_active();
  Rng check_rng(mix64(cfg.seed, 0xC0FFEE));

  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    const ObjectiveGradient og = meta_objective_grad(res.theta_b, res.thetas, mdps, features, tasks, cfg.objective);
    if (!std::isfinite(og.value.total)) throw NonFiniteLoss(it);
    if (cfg.check_grads) {
      const double err = detail::spot_check_gradient(res.theta_b, res.thetas, mdps, features, tasks,
                                                     cfg.objective, og, 10, check_rng);
      if (!(err < 1e-4)) throw GradientCheckFailed(it, err);
    }
    res.history.push_back(og.value);
    res.iterations_run = it + 1;
    if (it > 0 && std::abs(og.value.total - res.history[it - 1].total) < cfg.converge_tol) {
      res.converged = true;
      break;
    }
    if (sharing) adam_step(res.theta_b, og.grad_b, opt_b, cfg);
    for (std::size_t i = 0; i < res.thetas.size(); ++i) adam_step(res.thetas[i], og.grads[i], opt[i], cfg);
  }
  return res;
}

/// Recovered per-task rewards of a trained model.
inline std::vector<std::vector<double>> learned_rewards(const TrainResult& res, std::span<const Mdp> mdps,
                                                        const StateFeatures& features, const BackupOperator& op) {
  std::vector<std::vector<double>> out;
  out.reserve(res.thetas.size());
  for (std::size_t i = 0; i < res.thetas.size(); ++i) out.push_back(r_from_vr(forward(res.thetas[i], features), mdps[i], op));
  return out;
}

}  // namespace metairl
