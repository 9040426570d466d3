#pragma once

// IRL negative log-likelihood under the Boltzmann action model, the
// reward-sharing divergences, and the combined multi-task objective
//
//   sum_i [ nll_i(theta_i) + lambda * D(r_i, r_b) ]
//
// with exact gradients for every parameter set.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metairl/demos.hpp"
#include "metairl/error.hpp"
#include "metairl/mdp.hpp"
#include "metairl/vrfn.hpp"

namespace metairl {

enum class Divergence { None, L2, Huber, Stdev, Entropy };
enum class SharingDomain { AllStates, VisitedStates };

struct SharingKind {
  Divergence kind = Divergence::Huber;
  double delta = 1.0;
  SharingDomain domain = SharingDomain::AllStates;
};

inline constexpr Divergence kAllDivergences[] = {Divergence::None, Divergence::L2, Divergence::Huber,
                                                 Divergence::Stdev, Divergence::Entropy};

inline std::string_view to_string(Divergence d) {
  switch (d) {
    case Divergence::None: return "none";
    case Divergence::L2: return "l2";
    case Divergence::Huber: return "huber";
    case Divergence::Stdev: return "stdev";
    case Divergence::Entropy: return "entropy";
  }
  return "?";
}

inline Divergence parse_divergence(std::string_view s) {
  for (auto d : kAllDivergences)
    if (to_string(d) == s) return d;
  throw InvalidArgument("unknown sharing loss '" + std::string(s) + "'");
}

struct MetaObjectiveConfig {
  double b = 1.0;
  double lambda = 1.0;
  SharingKind sharing;
  BackupOperator backup;

  bool sharing_active() const noexcept { return sharing.kind != Divergence::None && lambda != 0.0; }
};

inline double huber(double a, double delta) {
  const double m = std::abs(a);
  return m <= delta ? 0.5 * a * a : delta * (m - 0.5 * delta);
}

struct DivergenceValue {
  double value = 0.0;
  std::vector<double> grad;  // d D / d r_i, full state length (zero outside the mask)
};

/// D(r_i, r_b) over the states selected by `mask` (all states when empty),
/// together with its gradient in r_i. The gradient in r_b is the negation.
/// Non-differentiable points take the zero subgradient.
inline DivergenceValue sharing_divergence_grad(std::span<const double> r_i, std::span<const double> r_b,
                                               const std::vector<bool>* mask, const SharingKind& kind) {
  if (r_i.size() != r_b.size()) throw ShapeMismatch("reward vectors differ in length");
  if (!(kind.delta > 0.0)) throw InvalidArgument("huber delta must be positive");
  DivergenceValue out{0.0, std::vector<double>(r_i.size(), 0.0)};
  if (kind.kind == Divergence::None) return out;

  std::vector<std::size_t> idx;
  idx.reserve(r_i.size());
  for (std::size_t s = 0; s < r_i.size(); ++s)
    if (mask == nullptr || mask->empty() || (*mask)[s]) idx.push_back(s);
  if (idx.empty()) throw EmptyDomain("sharing divergence over an empty state set");
  std::vector<double> d(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) d[k] = r_i[idx[k]] - r_b[idx[k]];
  const double n = static_cast<double>(d.size());

  switch (kind.kind) {
    case Divergence::None:
      break;
    case Divergence::L2: {
      double ss = 0.0;
      for (double x : d) ss += x * x;
      out.value = std::sqrt(ss);
      if (out.value > 0.0)
        for (std::size_t k = 0; k < d.size(); ++k) out.grad[idx[k]] = d[k] / out.value;
      break;
    }
    case Divergence::Huber: {
      for (std::size_t k = 0; k < d.size(); ++k) {
        out.value += huber(d[k], kind.delta);
        out.grad[idx[k]] = std::clamp(d[k], -kind.delta, kind.delta);
      }
      break;
    }
    case Divergence::Stdev: {
      double mean = 0.0;
      for (double x : d) mean += x;
      mean /= n;
      double var = 0.0;
      for (double x : d) var += (x - mean) * (x - mean);
      var /= n;
      out.value = std::sqrt(var);
      if (out.value > 0.0)
        for (std::size_t k = 0; k < d.size(); ++k) out.grad[idx[k]] = (d[k] - mean) / (n * out.value);
      break;
    }
    case Divergence::Entropy: {
      // H(softmax(d)); dH/dd_j = -p_j (log p_j + H).
      const double m = *std::max_element(d.begin(), d.end());
      double z = 0.0;
      for (double x : d) z += std::exp(x - m);
      const double log_z = std::log(z);
      double h = 0.0;
      std::vector<double> logp(d.size());
      for (std::size_t k = 0; k < d.size(); ++k) {
        logp[k] = d[k] - m - log_z;
        h -= std::exp(logp[k]) * logp[k];
      }
      out.value = h;
      for (std::size_t k = 0; k < d.size(); ++k) out.grad[idx[k]] = -std::exp(logp[k]) * (logp[k] + h);
      break;
    }
  }
  return out;
}

inline double sharing_divergence(std::span<const double> r_i, std::span<const double> r_b,
                                 const std::vector<bool>* mask, const SharingKind& kind) {
  return sharing_divergence_grad(r_i, r_b, mask, kind).value;
}

struct NllValue {
  double value = 0.0;
  std::vector<double> d_q;  // d nll / d Q, n_states x n_actions
};

/// -sum_{(s,a)} [ b Q(s,a) - log sum_a' exp(b Q(s,a')) ] and its gradient in Q.
inline NllValue irl_nll_q(std::span<const double> q, std::size_t n_actions,
                          std::span<const StateAction> pairs, double b) {
  if (pairs.empty()) throw EmptyDemos("no demonstrated state-action pairs");
  if (!(b > 0.0)) throw InvalidArgument("boltzmann confidence b must be positive");
  NllValue out{0.0, std::vector<double>(q.size(), 0.0)};
  for (const auto& [s, a] : pairs) {
    const auto row = q.subspan(s * n_actions, n_actions);
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(b * (v - m));
    out.value += std::log(z) - b * (row[a] - m);
    for (std::size_t k = 0; k < n_actions; ++k)
      out.d_q[s * n_actions + k] += b * std::exp(b * (row[k] - m)) / z;
    out.d_q[s * n_actions + a] -= b;
  }
  return out;
}

inline double irl_nll(const VrParams& params, const Mdp& mdp, const StateFeatures& features,
                      std::span<const StateAction> pairs, double b) {
  const auto q = q_from_vr(forward(params, features), mdp);
  return irl_nll_q(q, mdp.n_actions(), pairs, b).value;
}

inline double irl_nll(const VrParams& params, const Mdp& mdp, const StateFeatures& features,
                      std::span<const Trajectory> demos, double b) {
  std::vector<StateAction> pairs;
  for (const auto& t : demos) pairs.insert(pairs.end(), t.steps.begin(), t.steps.end());
  return irl_nll(params, mdp, features, pairs, b);
}

inline std::vector<bool> visited_mask(std::span<const StateAction> pairs, std::size_t n_states) {
  std::vector<bool> mask(n_states, false);
  for (const auto& p : pairs) mask[p.state] = true;
  return mask;
}

/// Baseline reward: the baseline network's output read directly as r_b(s).
inline std::vector<double> baseline_reward(const VrParams& theta_b, const StateFeatures& features) {
  return forward(theta_b, features);
}

struct ObjectiveValue {
  double total = 0.0;
  double irl = 0.0;
  double sharing = 0.0;  // lambda-weighted
};

struct ObjectiveGradient {
  ObjectiveValue value;
  VrParams grad_b;
  std::vector<VrParams> grads;
};

/// Demonstration pairs per task, prepared once for repeated evaluation.
struct TaskData {
  std::vector<StateAction> pairs;
  std::vector<bool> visited;
};

inline std::vector<TaskData> prepare_tasks(const DemoSet& demos, std::size_t n_states) {
  std::vector<TaskData> out;
  out.reserve(demos.n_tasks());
  for (std::size_t i = 0; i < demos.n_tasks(); ++i) {
    auto pairs = demos.pairs(i);
    auto mask = visited_mask(pairs, n_states);
    out.push_back({std::move(pairs), std::move(mask)});
  }
  return out;
}

namespace detail {

inline void check_objective_inputs(std::span<const VrParams> thetas, std::span<const Mdp> mdps,
                                   std::span<const TaskData> tasks, const StateFeatures& features) {
  if (thetas.size() != mdps.size() || thetas.size() != tasks.size())
    throw ShapeMismatch("task parameter, mdp and demo counts differ");
  for (const auto& m : mdps)
    if (m.n_states() != features.n_states()) throw ShapeMismatch("mdp state count does not match features");
}

template <bool WithGrad>
ObjectiveGradient meta_objective_impl(const VrParams& theta_b, std::span<const VrParams> thetas,
                                      std::span<const Mdp> mdps, const StateFeatures& features,
                                      std::span<const TaskData> tasks, const MetaObjectiveConfig& cfg) {
  check_objective_inputs(thetas, mdps, tasks, features);
  const bool sharing = cfg.sharing_active();
  const std::size_t n = features.n_states();

  ObjectiveGradient out;
  ForwardPass base_pass;
  std::vector<double> d_rb;
  if (sharing) {
    base_pass = forward_pass(theta_b, features);
    if constexpr (WithGrad) d_rb.assign(n, 0.0);
  }
  if constexpr (WithGrad) out.grads.reserve(thetas.size());

  for (std::size_t i = 0; i < thetas.size(); ++i) {
    const Mdp& mdp = mdps[i];
    const ForwardPass pass = forward_pass(thetas[i], features);
    const auto vr = pass.output();
    const auto q = q_from_vr(vr, mdp);
    NllValue nll = irl_nll_q(q, mdp.n_actions(), tasks[i].pairs, cfg.b);
    out.value.irl += nll.value;

    std::vector<double> d_vr(n, 0.0);
    if constexpr (WithGrad) q_from_vr_backward(nll.d_q, mdp, d_vr);

    if (sharing) {
      const auto v = v_from_q(q, mdp, cfg.backup);
      std::vector<double> r(n);
      for (std::size_t s = 0; s < n; ++s) r[s] = vr[s] - mdp.gamma() * v[s];
      const std::vector<bool>* mask =
          cfg.sharing.domain == SharingDomain::VisitedStates ? &tasks[i].visited : nullptr;
      auto div = sharing_divergence_grad(r, base_pass.output(), mask, cfg.sharing);
      out.value.sharing += cfg.lambda * div.value;
      if constexpr (WithGrad) {
        for (std::size_t s = 0; s < n; ++s) {
          div.grad[s] *= cfg.lambda;
          d_rb[s] -= div.grad[s];
        }
        r_from_vr_backward(q, mdp, cfg.backup, div.grad, d_vr);
      }
    }
    if constexpr (WithGrad) out.grads.push_back(backward(thetas[i], pass, d_vr));
  }
  out.value.total = out.value.irl + out.value.sharing;
  if constexpr (WithGrad) out.grad_b = sharing ? backward(theta_b, base_pass, d_rb) : theta_b.zeros_like();
  return out;
}

}  // namespace detail

inline ObjectiveValue meta_objective(const VrParams& theta_b, std::span<const VrParams> thetas,
                                     std::span<const Mdp> mdps, const StateFeatures& features,
                                     std::span<const TaskData> tasks, const MetaObjectiveConfig& cfg) {
  return detail::meta_objective_impl<false>(theta_b, thetas, mdps, features, tasks, cfg).value;
}

inline ObjectiveValue meta_objective(const VrParams& theta_b, std::span<const VrParams> thetas,
                                     std::span<const Mdp> mdps, const StateFeatures& features,
                                     const DemoSet& demos, const MetaObjectiveConfig& cfg) {
  const auto tasks = prepare_tasks(demos, features.n_states());
  return meta_objective(theta_b, thetas, mdps, features, tasks, cfg);
}

inline ObjectiveGradient meta_objective_grad(const VrParams& theta_b, std::span<const VrParams> thetas,
                                             std::span<const Mdp> mdps, const StateFeatures& features,
                                             std::span<const TaskData> tasks,
                                             const MetaObjectiveConfig& cfg) {
  return detail::meta_objective_impl<true>(theta_b, thetas, mdps, features, tasks, cfg);
}

}  // namespace metairl
