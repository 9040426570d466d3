#pragma once

// Run configuration document shared by the command-line tools.
//
// {
//   "terrain":   {width, height, n_hills, peak_min, peak_max, decay_min, decay_max,
//                 base_cost, goal_bonus, gamma, n_tasks},
//   "demos":     {n_traj, b, max_len},
//   "objective": {loss, lambda, delta, domain, b, backup, k},
//   "train":     {lr, beta1, beta2, eps, max_iters, converge_tol, hidden, activation,
//                 features, seed},
//   "sweep":     {n_worlds, task_counts, traj_counts, loss_kinds, seed}
// }
//
// Every field is optional; unknown keys are rejected. The config hash is
// FNV-1a 64 over the compact dump of the fully populated document, whose keys
// are always sorted, so it does not depend on the input's key order.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "metairl/error.hpp"
#include "metairl/eval.hpp"
#include "metairl/io.hpp"
#include "metairl/losses.hpp"

namespace metairl {

struct RunConfig {
  SweepConfig sweep = SweepConfig::defaults();
  std::size_t world_tasks = 10;  // tasks written by a single generated world
};

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string_view to_string(BackupKind k) {
  switch (k) {
    case BackupKind::HardMax: return "max";
    case BackupKind::LogSumExp: return "lse";
    case BackupKind::Bgi: return "bgi";
  }
  return "?";
}

inline BackupKind parse_backup_kind(std::string_view s) {
  if (s == "max") return BackupKind::HardMax;
  if (s == "lse") return BackupKind::LogSumExp;
  if (s == "bgi") return BackupKind::Bgi;
  throw InvalidArgument("unknown backup operator '" + std::string(s) + "'");
}

inline std::string_view to_string(SharingDomain d) { return d == SharingDomain::AllStates ? "all" : "visited"; }

inline SharingDomain parse_domain(std::string_view s) {
  if (s == "all") return SharingDomain::AllStates;
  if (s == "visited") return SharingDomain::VisitedStates;
  throw InvalidArgument("unknown sharing domain '" + std::string(s) + "'");
}

inline std::string_view to_string(FeatureKind f) { return f == FeatureKind::Coords ? "coords" : "onehot"; }

inline FeatureKind parse_feature_kind(std::string_view s) {
  if (s == "coords") return FeatureKind::Coords;
  if (s == "onehot") return FeatureKind::OneHot;
  throw InvalidArgument("unknown feature encoding '" + std::string(s) + "'");
}

inline Json config_to_json(const RunConfig& rc) {
  const SweepConfig& c = rc.sweep;
  const auto& t = c.world.terrain;
  const auto& o = c.train.objective;
  std::vector<std::string> kinds;
  for (const auto& k : c.loss_kinds) kinds.emplace_back(to_string(k.kind));
  return Json{
      {"terrain",
       {{"width", t.width},
        {"height", t.height},
        {"n_hills", t.n_hills},
        {"peak_min", t.peak_range.lo},
        {"peak_max", t.peak_range.hi},
        {"decay_min", t.decay_range.lo},
        {"decay_max", t.decay_range.hi},
        {"base_cost", t.base_cost},
        {"goal_bonus", c.world.goal_bonus},
        {"gamma", c.world.gamma},
        {"n_tasks", rc.world_tasks}}},
      {"demos", {{"n_traj", c.demos.n_traj}, {"b", c.demos.b}, {"max_len", c.demos.max_len}}},
      {"objective",
       {{"loss", std::string(to_string(o.sharing.kind))},
        {"lambda", o.lambda},
        {"delta", o.sharing.delta},
        {"domain", std::string(to_string(o.sharing.domain))},
        {"b", o.b},
        {"backup", std::string(to_string(o.backup.kind))},
        {"k", o.backup.k}}},
      {"train",
       {{"lr", c.train.lr},
        {"beta1", c.train.adam_beta1},
        {"beta2", c.train.adam_beta2},
        {"eps", c.train.adam_eps},
        {"max_iters", c.train.max_iters},
        {"converge_tol", c.train.converge_tol},
        {"hidden", c.train.hidden},
        {"activation", std::string(to_string(c.train.activation))},
        {"features", std::string(to_string(c.features))},
        {"seed", c.train.seed}}},
      {"sweep",
       {{"n_worlds", c.n_worlds},
        {"task_counts", c.task_counts},
        {"traj_counts", c.traj_counts},
        {"loss_kinds", kinds},
        {"seed", c.seed}}}};
}

namespace detail {

template <typename T>
void get_optional(const Json& j, const char* key, T& out, std::string_view what) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw FormatError("bad field '" + std::string(key) + "' in " + std::string(what) + ": " + e.what());
  }
}

template <typename Parse, typename T>
void get_enum(const Json& j, const char* key, T& out, Parse parse, std::string_view what) {
  std::string s;
  get_optional(j, key, s, what);
  if (s.empty()) return;
  try {
    out = parse(s);
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
}

}  // namespace detail

inline RunConfig config_from_json(const Json& j) {
  using detail::get_optional;
  RunConfig rc;
  SweepConfig& c = rc.sweep;
  detail::require_keys(j, {"terrain", "demos", "objective", "train", "sweep"}, "config");
  if (j.contains("terrain")) {
    const Json& t = j["terrain"];
    constexpr std::string_view w = "config.terrain";
    detail::require_keys(t, {"width", "height", "n_hills", "peak_min", "peak_max", "decay_min", "decay_max",
                             "base_cost", "goal_bonus", "gamma", "n_tasks"},
                         w);
    auto& tp = c.world.terrain;
    get_optional(t, "width", tp.width, w);
    get_optional(t, "height", tp.height, w);
    get_optional(t, "n_hills", tp.n_hills, w);
    get_optional(t, "peak_min", tp.peak_range.lo, w);
    get_optional(t, "peak_max", tp.peak_range.hi, w);
    get_optional(t, "decay_min", tp.decay_range.lo, w);
    get_optional(t, "decay_max", tp.decay_range.hi, w);
    get_optional(t, "base_cost", tp.base_cost, w);
    get_optional(t, "goal_bonus", c.world.goal_bonus, w);
    get_optional(t, "gamma", c.world.gamma, w);
    get_optional(t, "n_tasks", rc.world_tasks, w);
  }
  if (j.contains("demos")) {
    const Json& d = j["demos"];
    constexpr std::string_view w = "config.demos";
    detail::require_keys(d, {"n_traj", "b", "max_len"}, w);
    get_optional(d, "n_traj", c.demos.n_traj, w);
    get_optional(d, "b", c.demos.b, w);
    get_optional(d, "max_len", c.demos.max_len, w);
  }
  if (j.contains("objective")) {
    const Json& o = j["objective"];
    constexpr std::string_view w = "config.objective";
    detail::require_keys(o, {"loss", "lambda", "delta", "domain", "b", "backup", "k"}, w);
    auto& obj = c.train.objective;
    detail::get_enum(o, "loss", obj.sharing.kind, parse_divergence, w);
    get_optional(o, "lambda", obj.lambda, w);
    get_optional(o, "delta", obj.sharing.delta, w);
    detail::get_enum(o, "domain", obj.sharing.domain, parse_domain, w);
    get_optional(o, "b", obj.b, w);
    detail::get_enum(o, "backup", obj.backup.kind, parse_backup_kind, w);
    get_optional(o, "k", obj.backup.k, w);
  }
  if (j.contains("train")) {
    const Json& t = j["train"];
    constexpr std::string_view w = "config.train";
    detail::require_keys(t, {"lr", "beta1", "beta2", "eps", "max_iters", "converge_tol", "hidden", "activation",
                             "features", "seed"},
                         w);
    get_optional(t, "lr", c.train.lr, w);
    get_optional(t, "beta1", c.train.adam_beta1, w);
    get_optional(t, "beta2", c.train.adam_beta2, w);
    get_optional(t, "eps", c.train.adam_eps, w);
    get_optional(t, "max_iters", c.train.max_iters, w);
    get_optional(t, "converge_tol", c.train.converge_tol, w);
    get_optional(t, "hidden", c.train.hidden, w);
    detail::get_enum(t, "activation", c.train.activation, parse_activation, w);
    detail::get_enum(t, "features", c.features, parse_feature_kind, w);
    get_optional(t, "seed", c.train.seed, w);
  }
  if (j.contains("sweep")) {
    const Json& s = j["sweep"];
    constexpr std::string_view w = "config.sweep";
    detail::require_keys(s, {"n_worlds", "task_counts", "traj_counts", "loss_kinds", "seed"}, w);
    get_optional(s, "n_worlds", c.n_worlds, w);
    get_optional(s, "task_counts", c.task_counts, w);
    get_optional(s, "traj_counts", c.traj_counts, w);
    if (s.contains("loss_kinds")) {
      std::vector<std::string> names;
      get_optional(s, "loss_kinds", names, w);
      c.loss_kinds.clear();
      for (const auto& n : names) {
        try {
          c.loss_kinds.push_back(SharingKind{parse_divergence(n), c.train.objective.sharing.delta,
                                             c.train.objective.sharing.domain});
        } catch (const InvalidArgument& e) {
          throw FormatError(e.what());
        }
      }
    }
    get_optional(s, "seed", c.seed, w);
  }
  // Sweep loss kinds inherit delta and domain from the objective section.
  for (auto& k : c.loss_kinds) {
    k.delta = c.train.objective.sharing.delta;
    k.domain = c.train.objective.sharing.domain;
  }
  if (c.train.objective.backup.kind == BackupKind::Bgi && !(c.train.objective.backup.k > 0.0))
    throw FormatError("bgi sharpness k must be positive");
  return rc;
}

inline RunConfig config_from_string(std::string_view text) {
  return config_from_json(detail::parse_json(text, "config"));
}

inline std::uint64_t config_hash(const RunConfig& rc) { return fnv1a64(config_to_json(rc).dump()); }

}  // namespace metairl
