#pragma once

// The VR function f(s) = r(s) + gamma * V*(s) as a small fully connected
// network, the maps it induces
//
//   Q(s,a) = sum_{s'} P(s'|s,a) f(s')
//   V(s)   = backup_a Q(s,a)
//   r(s)   = f(s) - gamma * V(s)
//
// and their reverse-mode derivatives.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "metairl/error.hpp"
#include "metairl/mdp.hpp"
#include "metairl/rng.hpp"

namespace metairl {

enum class Activation { Tanh, ReLU };

struct Arch {
  std::size_t input_dim = 2;
  std::vector<std::size_t> hidden = {64, 32};
  Activation activation = Activation::Tanh;

  static constexpr std::size_t output_dim = 1;

  std::size_t n_layers() const noexcept { return hidden.size() + 1; }
  std::size_t layer_in(std::size_t l) const { return l == 0 ? input_dim : hidden[l - 1]; }
  std::size_t layer_out(std::size_t l) const { return l == hidden.size() ? output_dim : hidden[l]; }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < n_layers(); ++l) n += layer_out(l) * (layer_in(l) + 1);
    return n;
  }

  void validate() const {
    if (input_dim == 0) throw InvalidArgument("input dimension must be positive");
    for (auto w : hidden)
      if (w == 0) throw InvalidArgument("hidden layer widths must be positive");
  }

  friend bool operator==(const Arch&, const Arch&) = default;
};

/// Network parameters stored flat. Layer l occupies a weight block
/// (out x in, row-major) followed by its bias vector.
struct VrParams {
  Arch arch;
  std::vector<double> values;

  VrParams() = default;
  explicit VrParams(Arch a) : arch(std::move(a)), values(arch.num_params(), 0.0) {}

  std::size_t size() const noexcept { return values.size(); }

  std::size_t weight_offset(std::size_t l) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < l; ++i) off += arch.layer_out(i) * (arch.layer_in(i) + 1);
    return off;
  }
  std::size_t bias_offset(std::size_t l) const {
    return weight_offset(l) + arch.layer_out(l) * arch.layer_in(l);
  }

  std::span<double> weights(std::size_t l) {
    return {values.data() + weight_offset(l), arch.layer_out(l) * arch.layer_in(l)};
  }
  std::span<const double> weights(std::size_t l) const {
    return {values.data() + weight_offset(l), arch.layer_out(l) * arch.layer_in(l)};
  }
  std::span<double> bias(std::size_t l) { return {values.data() + bias_offset(l), arch.layer_out(l)}; }
  std::span<const double> bias(std::size_t l) const {
    return {values.data() + bias_offset(l), arch.layer_out(l)};
  }

  /// Zero-filled parameters of the same shape.
  VrParams zeros_like() const { return VrParams(arch); }

  friend bool operator==(const VrParams&, const VrParams&) = default;
};

/// Per-state input rows, n_states x dim, row-major.
struct StateFeatures {
  std::size_t dim = 0;
  std::vector<double> data;

  std::size_t n_states() const noexcept { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const double> row(std::size_t s) const { return {data.data() + s * dim, dim}; }
};

enum class FeatureKind { Coords, OneHot };

/// Normalized grid coordinates (x / (width-1), y / (height-1)).
inline StateFeatures coordinate_features(std::size_t width, std::size_t height) {
  if (width < 2 || height < 2) throw InvalidArgument("coordinate features need a grid of at least 2x2");
  StateFeatures f{2, std::vector<double>(2 * width * height)};
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t s = y * width + x;
      f.data[2 * s] = static_cast<double>(x) / static_cast<double>(width - 1);
      f.data[2 * s + 1] = static_cast<double>(y) / static_cast<double>(height - 1);
    }
  }
  return f;
}

inline StateFeatures one_hot_features(std::size_t n_states) {
  StateFeatures f{n_states, std::vector<double>(n_states * n_states, 0.0)};
  for (std::size_t s = 0; s < n_states; ++s) f.data[s * n_states + s] = 1.0;
  return f;
}

inline StateFeatures make_features(FeatureKind kind, std::size_t width, std::size_t height) {
  return kind == FeatureKind::Coords ? coordinate_features(width, height)
                                     : one_hot_features(width * height);
}

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
inline VrParams init_params(const Arch& arch, std::uint64_t seed) {
  arch.validate();
  VrParams p(arch);
  Rng rng(seed);
  for (std::size_t l = 0; l < arch.n_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(arch.layer_in(l)));
    for (double& w : p.weights(l)) w = uniform_real(rng, -bound, bound);
  }
  return p;
}

/// Activations of every layer for a batch of states; acts[0] is the input and
/// acts.back() the scalar output per state.
struct ForwardPass {
  std::vector<std::vector<double>> acts;

  std::span<const double> output() const { return acts.back(); }
};

inline ForwardPass forward_pass(const VrParams& params, const StateFeatures& features) {
  const Arch& arch = params.arch;
  if (features.dim != arch.input_dim)
    throw ShapeMismatch("feature dimension " + std::to_string(features.dim) +
                        " does not match network input " + std::to_string(arch.input_dim));
  if (params.values.size() != arch.num_params()) throw ShapeMismatch("parameter count does not match arch");
  const std::size_t n = features.n_states();
  ForwardPass pass;
  pass.acts.reserve(arch.n_layers() + 1);
  pass.acts.push_back(features.data);
  for (std::size_t l = 0; l < arch.n_layers(); ++l) {
    const std::size_t in = arch.layer_in(l);
    const std::size_t out = arch.layer_out(l);
    const bool last = l + 1 == arch.n_layers();
    const auto w = params.weights(l);
    const auto b = params.bias(l);
    const auto& prev = pass.acts.back();
    std::vector<double> next(n * out);
    for (std::size_t r = 0; r < n; ++r) {
      const double* x = prev.data() + r * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double* wr = w.data() + o * in;
        double z = b[o];
        for (std::size_t i = 0; i < in; ++i) z += wr[i] * x[i];
        if (!last) z = arch.activation == Activation::Tanh ? std::tanh(z) : std::max(z, 0.0);
        next[r * out + o] = z;
      }
    }
    pass.acts.push_back(std::move(next));
  }
  return pass;
}

/// VR value of every state.
inline std::vector<double> forward(const VrParams& params, const StateFeatures& features) {
  auto pass = forward_pass(params, features);
  return std::move(pass.acts.back());
}

/// Gradient of a scalar loss with respect to the parameters, given
/// d loss / d output for every state of the batch in `pass`.
inline VrParams backward(const VrParams& params, const ForwardPass& pass,
                         std::span<const double> d_out) {
  const Arch& arch = params.arch;
  const std::size_t n = pass.acts.front().size() / arch.input_dim;
  if (d_out.size() != n) throw ShapeMismatch("output gradient size does not match batch");
  VrParams grad = params.zeros_like();
  std::vector<double> delta(d_out.begin(), d_out.end());
  for (std::size_t l = arch.n_layers(); l-- > 0;) {
    const std::size_t in = arch.layer_in(l);
    const std::size_t out = arch.layer_out(l);
    const auto w = params.weights(l);
    auto gw = grad.weights(l);
    auto gb = grad.bias(l);
    const auto& prev = pass.acts[l];
    std::vector<double> d_prev(l > 0 ? n * in : 0, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const double* x = prev.data() + r * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double d = delta[r * out + o];
        if (d == 0.0) continue;
        gb[o] += d;
        double* gwr = gw.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) gwr[i] += d * x[i];
        if (l > 0) {
          const double* wr = w.data() + o * in;
          double* dp = d_prev.data() + r * in;
          for (std::size_t i = 0; i < in; ++i) dp[i] += d * wr[i];
        }
      }
    }
    if (l > 0) {
      for (std::size_t k = 0; k < d_prev.size(); ++k) {
        const double a = prev[k];
        d_prev[k] *= arch.activation == Activation::Tanh ? 1.0 - a * a : (a > 0.0 ? 1.0 : 0.0);
      }
      delta.swap(d_prev);
    }
  }
  return grad;
}

inline std::vector<double> q_from_vr(std::span<const double> vr, const Mdp& mdp) {
  if (vr.size() != mdp.n_states()) throw ShapeMismatch("vr size does not match state count");
  const std::size_t na = mdp.n_actions();
  std::vector<double> q(mdp.n_states() * na);
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      double acc = 0.0;
      for (const auto& t : mdp.successors(s, a)) acc += t.prob * vr[t.next];
      q[s * na + a] = acc;
    }
  }
  return q;
}

/// Adds the pullback of d loss / dQ onto d loss / d vr.
inline void q_from_vr_backward(std::span<const double> d_q, const Mdp& mdp, std::span<double> d_vr) {
  const std::size_t na = mdp.n_actions();
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      const double g = d_q[s * na + a];
      if (g == 0.0) continue;
      for (const auto& t : mdp.successors(s, a)) d_vr[t.next] += t.prob * g;
    }
  }
}

inline std::vector<double> v_from_q(std::span<const double> q, const Mdp& mdp, const BackupOperator& op) {
  const std::size_t na = mdp.n_actions();
  std::vector<double> v(mdp.n_states());
  for (std::size_t s = 0; s < v.size(); ++s) v[s] = backup(q.subspan(s * na, na), op);
  return v;
}

inline std::vector<double> v_from_vr(std::span<const double> vr, const Mdp& mdp,
                                     const BackupOperator& op = {}) {
  return v_from_q(q_from_vr(vr, mdp), mdp, op);
}

inline std::vector<double> r_from_vr(std::span<const double> vr, const Mdp& mdp,
                                     const BackupOperator& op = {}) {
  const auto v = v_from_vr(vr, mdp, op);
  std::vector<double> r(vr.size());
  for (std::size_t s = 0; s < r.size(); ++s) r[s] = vr[s] - mdp.gamma() * v[s];
  return r;
}

/// Adds the pullback of d loss / d r (for r = r_from_vr(vr)) onto d loss / d vr.
/// `q` must be q_from_vr(vr, mdp).
inline void r_from_vr_backward(std::span<const double> q, const Mdp& mdp, const BackupOperator& op,
                               std::span<const double> d_r, std::span<double> d_vr) {
  const std::size_t na = mdp.n_actions();
  const double gamma = mdp.gamma();
  std::vector<double> d_q(q.size(), 0.0);
  std::vector<double> w(na);
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    d_vr[s] += d_r[s];
    const double d_v = -gamma * d_r[s];
    if (d_v == 0.0) continue;
    backup_gradient(q.subspan(s * na, na), op, w);
    for (std::size_t a = 0; a < na; ++a) d_q[s * na + a] = d_v * w[a];
  }
  q_from_vr_backward(d_q, mdp, d_vr);
}

}  // namespace metairl
