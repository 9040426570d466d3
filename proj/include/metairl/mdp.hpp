#pragma once

// Finite MDPs, Bellman backup operators, the Boltzmann action model and an
// exact value-iteration solver.
//
// Reward accrues on the state entered:
//   Q(s,a) = sum_{s'} P(s'|s,a) * (r(s') + gamma * backup(Q(s',.)))

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "metairl/error.hpp"

namespace metairl {

struct Transition {
  std::size_t next = 0;
  double prob = 0.0;

  friend bool operator==(const Transition&, const Transition&) = default;
};

class Mdp {
 public:
  /// `transitions` is indexed by s * n_actions + a.
  Mdp(std::size_t n_states, std::size_t n_actions,
      std::vector<std::vector<Transition>> transitions, std::vector<double> reward,
      double gamma)
      : n_states_(n_states),
        n_actions_(n_actions),
        transitions_(std::move(transitions)),
        reward_(std::move(reward)),
        gamma_(gamma) {
    validate();
  }

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t n_actions() const noexcept { return n_actions_; }
  double gamma() const noexcept { return gamma_; }
  const std::vector<double>& reward() const noexcept { return reward_; }

  std::span<const Transition> successors(std::size_t s, std::size_t a) const {
    return transitions_[s * n_actions_ + a];
  }

  /// Probability of landing in `next` from (s, a).
  double probability(std::size_t s, std::size_t a, std::size_t next) const {
    double p = 0.0;
    for (const auto& t : successors(s, a))
      if (t.next == next) p += t.prob;
    return p;
  }

 private:
  void validate() const {
    if (n_states_ == 0 || n_actions_ == 0) throw InvalidMdp("mdp needs at least one state and action");
    if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw InvalidMdp("gamma must lie in [0, 1)");
    if (reward_.size() != n_states_) throw InvalidMdp("reward size does not match state count");
    if (transitions_.size() != n_states_ * n_actions_)
      throw InvalidMdp("transition table size does not match states x actions");
    for (std::size_t i = 0; i < transitions_.size(); ++i) {
      const auto& row = transitions_[i];
      if (row.empty()) throw InvalidMdp("(state, action) " + std::to_string(i) + " has no successor");
      double total = 0.0;
      for (const auto& t : row) {
        if (t.next >= n_states_) throw InvalidMdp("successor index out of range");
        if (!(t.prob >= 0.0)) throw InvalidMdp("negative transition probability");
        total += t.prob;
      }
      if (std::abs(total - 1.0) > 1e-12) throw InvalidMdp("transition probabilities do not sum to 1");
    }
    for (double r : reward_)
      if (!std::isfinite(r)) throw InvalidMdp("non-finite reward");
  }

  std::size_t n_states_;
  std::size_t n_actions_;
  std::vector<std::vector<Transition>> transitions_;
  std::vector<double> reward_;
  double gamma_;
};

enum class BackupKind { HardMax, LogSumExp, Bgi };

/// Aggregation over actions that turns Q(s,.) into V(s).
/// Bgi is the k-sharpened log-sum-exp (1/k) log sum exp(k q).
struct BackupOperator {
  BackupKind kind = BackupKind::HardMax;
  double k = 1.0;

  static BackupOperator hard_max() { return {}; }
  static BackupOperator log_sum_exp() { return {BackupKind::LogSumExp, 1.0}; }
  static BackupOperator bgi(double k) {
    if (!(k > 0.0)) throw InvalidArgument("bgi sharpness k must be positive");
    return {BackupKind::Bgi, k};
  }
};

namespace detail {

inline double log_sum_exp_scaled(std::span<const double> x, double scale) {
  const double m = *std::max_element(x.begin(), x.end());
  double sum = 0.0;
  for (double v : x) sum += std::exp(scale * (v - m));
  return scale * m + std::log(sum);
}

inline std::size_t argmax_lowest(std::span<const double> x) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x[i] > x[best]) best = i;
  return best;
}

}  // namespace detail

inline double backup(std::span<const double> q_row, const BackupOperator& op) {
  if (q_row.empty()) throw InvalidArgument("backup of an empty row");
  switch (op.kind) {
    case BackupKind::HardMax:
      return *std::max_element(q_row.begin(), q_row.end());
    case BackupKind::LogSumExp:
      return detail::log_sum_exp_scaled(q_row, 1.0);
    case BackupKind::Bgi:
      return detail::log_sum_exp_scaled(q_row, op.k) / op.k;
  }
  return 0.0;
}

/// d backup / d q_row written into `out`. HardMax yields the indicator of the
/// first maximal entry.
inline void backup_gradient(std::span<const double> q_row, const BackupOperator& op,
                            std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (op.kind == BackupKind::HardMax) {
    out[detail::argmax_lowest(q_row)] = 1.0;
    return;
  }
  const double scale = op.kind == BackupKind::Bgi ? op.k : 1.0;
  const double m = *std::max_element(q_row.begin(), q_row.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < q_row.size(); ++i) {
    out[i] = std::exp(scale * (q_row[i] - m));
    sum += out[i];
  }
  for (double& v : out) v /= sum;
}

/// Boltzmann action distribution exp(b q) / sum exp(b q).
inline std::vector<double> boltzmann_policy(std::span<const double> q_row, double b) {
  if (q_row.empty()) throw InvalidArgument("boltzmann policy of an empty row");
  if (!(b > 0.0)) throw InvalidArgument("boltzmann confidence b must be positive");
  const double m = *std::max_element(q_row.begin(), q_row.end());
  std::vector<double> p(q_row.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < q_row.size(); ++i) {
    p[i] = std::exp(b * (q_row[i] - m));
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

struct ValueSolution {
  std::vector<double> v;
  std::vector<double> q;  // row-major, n_states x n_actions
  std::size_t iterations = 0;
  double residual = 0.0;

  std::span<const double> q_row(std::size_t s, std::size_t n_actions) const {
    return std::span<const double>(q).subspan(s * n_actions, n_actions);
  }
};

/// Jacobi value iteration from V = 0. The residual is the sup-norm change of Q
/// in the last sweep; v is recomputed from the returned q so that, for HardMax,
/// v[s] == max_a q[s,a] bit for bit.
inline ValueSolution value_iteration(const Mdp& mdp, const BackupOperator& op = {},
                                     double tol = 1e-9, std::size_t max_iter = 10'000) {
  if (!(tol > 0.0)) throw InvalidArgument("value iteration tolerance must be positive");
  const std::size_t ns = mdp.n_states();
  const std::size_t na = mdp.n_actions();
  const auto& r = mdp.reward();
  const double gamma = mdp.gamma();

  ValueSolution sol;
  sol.v.assign(ns, 0.0);
  sol.q.assign(ns * na, 0.0);
  std::vector<double> q_next(ns * na);
  double residual = std::numeric_limits<double>::infinity();
  std::size_t it = 0;
  while (it < max_iter) {
    ++it;
    residual = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t a = 0; a < na; ++a) {
        double acc = 0.0;
        for (const auto& t : mdp.successors(s, a)) acc += t.prob * (r[t.next] + gamma * sol.v[t.next]);
        q_next[s * na + a] = acc;
        residual = std::max(residual, std::abs(acc - sol.q[s * na + a]));
      }
    }
    sol.q.swap(q_next);
    for (std::size_t s = 0; s < ns; ++s) sol.v[s] = backup(sol.q_row(s, na), op);
    if (residual <= tol) break;
  }
  sol.iterations = it;
  sol.residual = residual;
  if (residual > tol) throw NonConvergence(residual, it);
  return sol;
}

/// Greedy action (lowest index on ties) for every state.
inline std::vector<std::size_t> greedy_policy(const ValueSolution& sol, std::size_t n_actions) {
  std::vector<std::size_t> pi(sol.v.size());
  for (std::size_t s = 0; s < pi.size(); ++s) pi[s] = detail::argmax_lowest(sol.q_row(s, n_actions));
  return pi;
}

}  // namespace metairl
