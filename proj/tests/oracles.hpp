#pragma once

// Test-only reference computations. Nothing here calls into the solver or
// gradient code paths it is used to check.

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "metairl/mdp.hpp"

namespace metairl::oracle {

/// Solves A x = b by Gaussian elimination with partial pivoting (A row-major n x n).
inline std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r * n + c]) > std::abs(a[piv * n + c])) piv = r;
    if (a[piv * n + c] == 0.0) throw std::runtime_error("singular system");
    if (piv != c) {
      for (std::size_t k = 0; k < n; ++k) std::swap(a[c * n + k], a[piv * n + k]);
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r * n + c] / a[c * n + c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) a[r * n + k] -= f * a[c * n + k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t r = n; r-- > 0;) {
    double acc = b[r];
    for (std::size_t k = r + 1; k < n; ++k) acc -= a[r * n + k] * x[k];
    x[r] = acc / a[r * n + r];
  }
  return x;
}

/// Exact value of a fixed deterministic policy: V = P_pi r + gamma P_pi V.
inline std::vector<double> policy_value(const Mdp& mdp, const std::vector<std::size_t>& pi) {
  const std::size_t n = mdp.n_states();
  std::vector<double> a(n * n, 0.0), rhs(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    a[s * n + s] += 1.0;
    for (const auto& t : mdp.successors(s, pi[s])) {
      a[s * n + t.next] -= mdp.gamma() * t.prob;
      rhs[s] += t.prob * mdp.reward()[t.next];
    }
  }
  return solve_linear(std::move(a), std::move(rhs));
}

/// Howard policy iteration with exact linear policy evaluation.
inline std::vector<double> policy_iteration_values(const Mdp& mdp) {
  const std::size_t n = mdp.n_states();
  const std::size_t na = mdp.n_actions();
  std::vector<std::size_t> pi(n, 0);
  for (int round = 0; round < 1000; ++round) {
    const auto v = policy_value(mdp, pi);
    bool changed = false;
    for (std::size_t s = 0; s < n; ++s) {
      auto q = [&](std::size_t a) {
        double acc = 0.0;
        for (const auto& t : mdp.successors(s, a)) acc += t.prob * (mdp.reward()[t.next] + mdp.gamma() * v[t.next]);
        return acc;
      };
      const double current = q(pi[s]);
      for (std::size_t a = 0; a < na; ++a) {
        if (q(a) > current + 1e-12) {
          pi[s] = a;
          changed = true;
          break;
        }
      }
    }
    if (!changed) return v;
  }
  throw std::runtime_error("policy iteration did not stabilize");
}

/// Discounted return sum_t gamma^t r(s_{t+1}) of following `next` from s for
/// `steps` transitions (deterministic single-action chains).
inline double discounted_path_return(const std::vector<std::size_t>& next, const std::vector<double>& reward,
                                     double gamma, std::size_t s, std::size_t steps) {
  double total = 0.0, g = 1.0;
  for (std::size_t t = 0; t < steps; ++t) {
    s = next[s];
    total += g * reward[s];
    g *= gamma;
  }
  return total;
}

/// Central finite difference of f at x along coordinate i.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, std::size_t i, double h = 1e-5) {
  const double orig = x[i];
  x[i] = orig + h;
  const double up = f(x);
  x[i] = orig - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

/// Probabilities of a softmax computed directly from exp without shifting.
inline std::vector<double> naive_softmax(const std::vector<double>& x, double scale) {
  std::vector<double> p(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) z += p[i] = std::exp(scale * x[i]);
  for (double& v : p) v /= z;
  return p;
}

}  // namespace metairl::oracle
