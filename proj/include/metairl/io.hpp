#pragma once

// File formats: world JSON, demonstration CSV, parameter checkpoints, sweep
// result tables and SVG panels.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "metairl/demos.hpp"
#include "metairl/error.hpp"
#include "metairl/eval.hpp"
#include "metairl/terrain.hpp"
#include "metairl/vrfn.hpp"

namespace metairl {

using Json = nlohmann::json;

/// Shortest decimal that round-trips the double exactly.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  return Json(x).dump();
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << text;
  if (!out) throw FormatError("failed writing '" + path + "'");
}

namespace detail {

inline void require_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view what) {
  if (!j.is_object()) throw FormatError(std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw FormatError("unknown field '" + key + "' in " + std::string(what));
  }
}

template <typename T>
T get_required(const Json& j, const char* key, std::string_view what) {
  if (!j.contains(key)) throw FormatError("missing field '" + std::string(key) + "' in " + std::string(what));
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw FormatError("bad field '" + std::string(key) + "' in " + std::string(what) + ": " + e.what());
  }
}

inline Json parse_json(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw FormatError("malformed JSON in " + std::string(what) + ": " + e.what());
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// World file

struct WorldFile {
  Terrain terrain;
  std::vector<Task> tasks;
  double gamma = 0.9;

  Mdp task_mdp(std::size_t i) const { return ground_truth_mdp(terrain, tasks.at(i), gamma, true); }

  std::vector<Mdp> task_mdps() const {
    std::vector<Mdp> out;
    out.reserve(tasks.size());
    for (std::size_t i = 0; i < tasks.size(); ++i) out.push_back(task_mdp(i));
    return out;
  }

  friend bool operator==(const WorldFile&, const WorldFile&) = default;
};

inline Json world_to_json(const WorldFile& w) {
  Json hills = Json::array();
  for (const auto& h : w.terrain.hills) hills.push_back({{"cx", h.cx}, {"cy", h.cy}, {"peak", h.peak}, {"decay", h.decay}});
  Json tasks = Json::array();
  for (const auto& t : w.tasks) {
    const Cell c = w.terrain.cell(t.goal);
    tasks.push_back({{"goal_x", c.x}, {"goal_y", c.y}, {"goal_bonus", t.goal_bonus}});
  }
  return Json{{"width", w.terrain.width}, {"height", w.terrain.height}, {"base_cost", w.terrain.base_cost},
              {"seed", w.terrain.seed},   {"hills", hills},           {"tasks", tasks},
              {"gamma", w.gamma}};
}

inline WorldFile world_from_json(const Json& j) {
  constexpr std::string_view what = "world file";
  detail::require_keys(j, {"width", "height", "base_cost", "seed", "hills", "tasks", "gamma"}, what);
  WorldFile w;
  w.terrain.width = detail::get_required<std::size_t>(j, "width", what);
  w.terrain.height = detail::get_required<std::size_t>(j, "height", what);
  w.terrain.base_cost = detail::get_required<double>(j, "base_cost", what);
  w.terrain.seed = detail::get_required<std::uint64_t>(j, "seed", what);
  w.gamma = detail::get_required<double>(j, "gamma", what);
  if (w.terrain.width < 2 || w.terrain.height < 2) throw FormatError("world must be at least 2x2");
  if (!(w.terrain.base_cost >= 0.0)) throw FormatError("base_cost must be nonnegative");
  if (!(w.gamma >= 0.0 && w.gamma < 1.0)) throw FormatError("gamma must lie in [0, 1)");
  const Json hills = detail::get_required<Json>(j, "hills", what);
  if (!hills.is_array()) throw FormatError("hills must be an array");
  for (const auto& h : hills) {
    detail::require_keys(h, {"cx", "cy", "peak", "decay"}, "hill");
    Hill hill{detail::get_required<double>(h, "cx", "hill"), detail::get_required<double>(h, "cy", "hill"),
              detail::get_required<double>(h, "peak", "hill"), detail::get_required<double>(h, "decay", "hill")};
    if (!(hill.peak > 0.0) || !(hill.decay > 0.0)) throw FormatError("hill peak and decay must be positive");
    if (!(hill.cx >= 0.0 && hill.cx < static_cast<double>(w.terrain.width) && hill.cy >= 0.0 &&
          hill.cy < static_cast<double>(w.terrain.height)))
      throw FormatError("hill center outside the grid");
    w.terrain.hills.push_back(hill);
  }
  const Json tasks = detail::get_required<Json>(j, "tasks", what);
  if (!tasks.is_array()) throw FormatError("tasks must be an array");
  for (const auto& t : tasks) {
    detail::require_keys(t, {"goal_x", "goal_y", "goal_bonus"}, "task");
    const auto x = detail::get_required<std::size_t>(t, "goal_x", "task");
    const auto y = detail::get_required<std::size_t>(t, "goal_y", "task");
    const auto bonus = detail::get_required<double>(t, "goal_bonus", "task");
    if (x >= w.terrain.width || y >= w.terrain.height) throw FormatError("task goal outside the grid");
    if (!(bonus > 0.0)) throw FormatError("goal_bonus must be positive");
    w.tasks.push_back(Task{w.terrain.index({x, y}), bonus});
  }
  return w;
}

inline std::string world_to_string(const WorldFile& w) { return world_to_json(w).dump(2) + "\n"; }

inline WorldFile world_from_string(std::string_view text) {
  return world_from_json(detail::parse_json(text, "world file"));
}

inline WorldFile read_world(const std::string& path) { return world_from_string(read_text_file(path)); }

// ---------------------------------------------------------------------------
// Demonstration CSV

inline constexpr std::string_view kDemoHeader = "task_id,traj_id,t,state_x,state_y,action";

inline void write_demos_csv(std::ostream& out, const DemoSet& demos, const Terrain& terrain) {
  out << kDemoHeader << '\n';
  for (std::size_t i = 0; i < demos.n_tasks(); ++i) {
    const auto& trajs = demos.per_task[i];
    for (std::size_t j = 0; j < trajs.size(); ++j) {
      for (std::size_t t = 0; t < trajs[j].steps.size(); ++t) {
        const auto [s, a] = trajs[j].steps[t];
        const Cell c = terrain.cell(s);
        out << i << ',' << j << ',' << t << ',' << c.x << ',' << c.y << ',' << a << '\n';
      }
    }
  }
}

inline std::string demos_to_string(const DemoSet& demos, const Terrain& terrain) {
  std::ostringstream ss;
  write_demos_csv(ss, demos, terrain);
  return ss.str();
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::size_t parse_count(const std::string& s, std::size_t line_no) {
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); }))
    throw FormatError("line " + std::to_string(line_no) + ": expected a nonnegative integer, got '" + s + "'");
  return static_cast<std::size_t>(std::stoull(s));
}

}  // namespace detail

/// Parses demo rows into `n_tasks` buckets. Rows must be sorted by
/// (task_id, traj_id, t), trajectory ids contiguous from 0 within a task and
/// steps contiguous from 0 within a trajectory. Trajectories that do not end
/// on the task goal are marked truncated.
inline DemoSet read_demos_csv(std::istream& in, const Terrain& terrain, std::span<const Task> tasks) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("empty demo file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kDemoHeader) throw FormatError("unexpected demo header '" + line + "'");
  DemoSet demos;
  demos.per_task.resize(tasks.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 6) throw FormatError("line " + std::to_string(line_no) + ": expected 6 fields");
    const std::size_t task = detail::parse_count(f[0], line_no);
    const std::size_t traj = detail::parse_count(f[1], line_no);
    const std::size_t t = detail::parse_count(f[2], line_no);
    const std::size_t x = detail::parse_count(f[3], line_no);
    const std::size_t y = detail::parse_count(f[4], line_no);
    const std::size_t a = detail::parse_count(f[5], line_no);
    const auto where = "line " + std::to_string(line_no) + ": ";
    if (task >= tasks.size()) throw FormatError(where + "task_id outside the world's task list");
    if (x >= terrain.width || y >= terrain.height) throw FormatError(where + "state outside the grid");
    if (a >= kNumMoves) throw FormatError(where + "action must be 0..3");
    // Rows must be sorted by task, so every later task bucket is still empty.
    for (std::size_t later = task + 1; later < tasks.size(); ++later)
      if (!demos.per_task[later].empty()) throw FormatError(where + "rows not sorted by task_id");
    auto& bucket = demos.per_task[task];
    if (t == 0) {
      if (traj != bucket.size()) throw FormatError(where + "trajectory ids must be contiguous from 0");
      bucket.push_back(Trajectory{{}, task, false});
    } else if (bucket.empty() || traj + 1 != bucket.size() || bucket.back().steps.size() != t) {
      throw FormatError(where + "steps must be contiguous from t = 0");
    }
    bucket.back().steps.push_back({terrain.index({x, y}), a});
  }
  for (std::size_t i = 0; i < tasks.size(); ++i)
    for (auto& traj : demos.per_task[i]) traj.truncated = traj.steps.back().state != tasks[i].goal;
  return demos;
}

inline DemoSet demos_from_string(const std::string& text, const Terrain& terrain, std::span<const Task> tasks) {
  std::istringstream ss(text);
  return read_demos_csv(ss, terrain, tasks);
}

// ---------------------------------------------------------------------------
// Parameter checkpoints

inline std::string_view to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

inline Activation parse_activation(std::string_view s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::ReLU;
  throw InvalidArgument("unknown activation '" + std::string(s) + "'");
}

inline Json params_to_json(const VrParams& p) {
  Json layers = Json::array();
  for (std::size_t l = 0; l < p.arch.n_layers(); ++l) {
    const auto w = p.weights(l);
    const auto b = p.bias(l);
    layers.push_back({{"rows", p.arch.layer_out(l)},
                      {"cols", p.arch.layer_in(l)},
                      {"weights", std::vector<double>(w.begin(), w.end())},
                      {"bias", std::vector<double>(b.begin(), b.end())}});
  }
  return Json{{"arch",
               {{"input_dim", p.arch.input_dim},
                {"hidden", p.arch.hidden},
                {"activation", std::string(to_string(p.arch.activation))}}},
              {"layers", layers}};
}

inline VrParams params_from_json(const Json& j) {
  constexpr std::string_view what = "checkpoint";
  detail::require_keys(j, {"arch", "layers"}, what);
  const Json aj = detail::get_required<Json>(j, "arch", what);
  detail::require_keys(aj, {"input_dim", "hidden", "activation"}, "checkpoint arch");
  Arch arch;
  arch.input_dim = detail::get_required<std::size_t>(aj, "input_dim", "checkpoint arch");
  arch.hidden = detail::get_required<std::vector<std::size_t>>(aj, "hidden", "checkpoint arch");
  try {
    arch.activation = parse_activation(detail::get_required<std::string>(aj, "activation", "checkpoint arch"));
    arch.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what());
  }
  VrParams p(arch);
  const Json layers = detail::get_required<Json>(j, "layers", what);
  if (!layers.is_array() || layers.size() != arch.n_layers()) throw FormatError("checkpoint layer count does not match arch");
  for (std::size_t l = 0; l < arch.n_layers(); ++l) {
    const Json& lj = layers[l];
    detail::require_keys(lj, {"rows", "cols", "weights", "bias"}, "checkpoint layer");
    if (detail::get_required<std::size_t>(lj, "rows", "checkpoint layer") != arch.layer_out(l) ||
        detail::get_required<std::size_t>(lj, "cols", "checkpoint layer") != arch.layer_in(l))
      throw FormatError("checkpoint layer " + std::to_string(l) + " shape does not match arch");
    const auto w = detail::get_required<std::vector<double>>(lj, "weights", "checkpoint layer");
    const auto b = detail::get_required<std::vector<double>>(lj, "bias", "checkpoint layer");
    auto pw = p.weights(l);
    auto pb = p.bias(l);
    if (w.size() != pw.size() || b.size() != pb.size())
      throw FormatError("checkpoint layer " + std::to_string(l) + " value count does not match its shape");
    std::copy(w.begin(), w.end(), pw.begin());
    std::copy(b.begin(), b.end(), pb.begin());
  }
  for (double v : p.values)
    if (!std::isfinite(v)) throw FormatError("checkpoint contains a non-finite value");
  return p;
}

inline std::string params_to_string(const VrParams& p) { return params_to_json(p).dump() + "\n"; }

inline VrParams params_from_string(std::string_view text) {
  return params_from_json(detail::parse_json(text, "checkpoint"));
}

// ---------------------------------------------------------------------------
// Sweep tables

inline constexpr std::string_view kResultsHeader = "world_id,loss_kind,n_tasks,n_trajs,task_id,correlation,status";
inline constexpr std::string_view kAggregateHeader = "loss_kind,n_tasks,n_trajs,mean_correlation,n_ok,n_failed";

inline std::string results_to_csv(const SweepResult& result) {
  std::ostringstream out;
  out << kResultsHeader << '\n';
  for (const auto& r : result.records) {
    out << r.world_id << ',' << to_string(r.loss_kind) << ',' << r.n_tasks << ',' << r.n_trajs << ',' << r.task_id
        << ',' << (r.correlation ? format_double(*r.correlation) : std::string()) << ',' << r.status << '\n';
  }
  return out.str();
}

inline SweepResult results_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) throw FormatError("unexpected results header");
  SweepResult res;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != 7) throw FormatError("line " + std::to_string(line_no) + ": expected 7 fields");
    SweepRecord r;
    r.world_id = detail::parse_count(f[0], line_no);
    try {
      r.loss_kind = parse_divergence(f[1]);
    } catch (const InvalidArgument& e) {
      throw FormatError(e.what());
    }
    r.n_tasks = detail::parse_count(f[2], line_no);
    r.n_trajs = detail::parse_count(f[3], line_no);
    r.task_id = detail::parse_count(f[4], line_no);
    if (!f[5].empty()) r.correlation = std::stod(f[5]);
    r.status = f[6];
    res.records.push_back(std::move(r));
  }
  return res;
}

inline std::string aggregate_to_csv(std::span<const AggregateRow> rows) {
  std::ostringstream out;
  out << kAggregateHeader << '\n';
  for (const auto& r : rows) {
    out << to_string(r.loss_kind) << ',' << r.n_tasks << ',' << r.n_trajs << ',' << format_double(r.mean_correlation)
        << ',' << r.n_ok << ',' << r.n_failed << '\n';
  }
  return out.str();
}

/// One panel per task count: mean correlation against trajectory count, one
/// polyline per loss kind.
inline std::string aggregate_panel_svg(std::span<const AggregateRow> rows, std::size_t n_tasks) {
  constexpr double W = 360, H = 260, L = 50, R = 90, T = 30, B = 40;
  static constexpr const char* kColors[] = {"#7f7f7f", "#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

  std::map<Divergence, std::vector<std::pair<std::size_t, double>>> curves;
  std::size_t x_min = SIZE_MAX, x_max = 0;
  double y_min = 0.0, y_max = 1.0;
  for (const auto& r : rows) {
    if (r.n_tasks != n_tasks || std::isnan(r.mean_correlation)) continue;
    curves[r.loss_kind].emplace_back(r.n_trajs, r.mean_correlation);
    x_min = std::min(x_min, r.n_trajs);
    x_max = std::max(x_max, r.n_trajs);
    y_min = std::min(y_min, r.mean_correlation);
    y_max = std::max(y_max, r.mean_correlation);
  }
  if (x_min == SIZE_MAX) x_min = x_max = 1;
  const double x_span = x_max > x_min ? static_cast<double>(x_max - x_min) : 1.0;
  const double y_span = y_max > y_min ? y_max - y_min : 1.0;
  auto px = [&](double x) { return L + (x - static_cast<double>(x_min)) / x_span * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y_min) / y_span * (H - T - B); };
  char buf[256];
  std::ostringstream out;
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
                W, H, W, H);
  out << buf;
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"18\" font-size=\"13\" text-anchor=\"middle\">%zu task%s</text>\n",
                (W - R + L) / 2, n_tasks, n_tasks == 1 ? "" : "s");
  out << buf;
  std::snprintf(buf, sizeof buf,
                "<path d=\"M%.1f %.1f V%.1f H%.1f\" stroke=\"black\" fill=\"none\"/>\n", L, T, H - B, W - R);
  out << buf;
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" font-size=\"10\" text-anchor=\"end\">%.2f</text>\n",
                L - 4, py(y_max) + 3, y_max);
  out << buf;
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" font-size=\"10\" text-anchor=\"end\">%.2f</text>\n",
                L - 4, py(y_min) + 3, y_min);
  out << buf;
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" font-size=\"10\" text-anchor=\"middle\">%zu</text>\n",
                px(static_cast<double>(x_min)), H - B + 14, x_min);
  out << buf;
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" font-size=\"10\" text-anchor=\"middle\">%zu</text>\n",
                px(static_cast<double>(x_max)), H - B + 14, x_max);
  out << buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"middle\">trajectories per task</text>\n",
                (W - R + L) / 2, H - 8);
  out << buf;
  std::size_t legend = 0;
  for (auto& [kind, pts] : curves) {
    std::sort(pts.begin(), pts.end());
    const char* color = kColors[static_cast<int>(kind) % 5];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s%.1f,%.1f", i ? " " : "", px(static_cast<double>(pts[i].first)),
                    py(pts[i].second));
      out << buf;
    }
    out << "\"/>\n";
    const double ly = T + 14.0 * static_cast<double>(legend++);
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\" stroke-width=\"2\"/>"
                  "<text x=\"%.1f\" y=\"%.1f\" font-size=\"10\">%s</text>\n",
                  W - R + 8, ly, W - R + 24, ly, color, W - R + 28, ly + 3, std::string(to_string(kind)).c_str());
    out << buf;
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace metairl
