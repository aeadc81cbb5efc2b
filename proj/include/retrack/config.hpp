#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "retrack/anchors.hpp"
#include "retrack/detector.hpp"
#include "retrack/generator.hpp"
#include "retrack/io.hpp"
#include "retrack/linker.hpp"
#include "retrack/scene.hpp"

namespace retrack {

// Command-line / configuration mistakes (exit code 1), as opposed to broken
// input data (DataError, exit code 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kDefaultGridLevels =
    "4:32,40,48;8:56,64,72,80,88,96,104;16:120,144,176";

namespace config_detail {

inline double to_double(std::string_view text, const std::string& key) {
  const std::string_view t = io::trim(text);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw UsageError("config: " + key + ": expected a number, got '" + std::string(text) + "'");
  return v;
}

inline long long to_int(std::string_view text, const std::string& key) {
  const std::string_view t = io::trim(text);
  long long v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
    throw UsageError("config: " + key + ": expected an integer, got '" + std::string(text) + "'");
  return v;
}

inline std::vector<double> parse_double_list(std::string_view text, const std::string& key) {
  std::vector<double> out;
  for (const std::string_view part : io::split(text, ',')) {
    if (io::trim(part).empty())
      throw UsageError("config: " + key + ": empty list element");
    out.push_back(to_double(part, key));
  }
  return out;
}

inline std::vector<std::size_t> parse_size_list(std::string_view text, const std::string& key) {
  std::vector<std::size_t> out;
  if (io::trim(text).empty()) return out;
  for (const std::string_view part : io::split(text, ',')) {
    const long long v = to_int(part, key);
    if (v < 0) throw UsageError("config: " + key + ": expected non-negative integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

}  // namespace config_detail

// Flat `section.key=value` store. Later assignments win, so file order and
// then command-line overrides layer naturally.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path) {
    Config cfg;
    io::for_each_data_line(path, [&](std::size_t line_no, std::string_view line) {
      const std::size_t eq = line.find('=');
      if (eq == std::string_view::npos)
        throw DataError(path + ":" + std::to_string(line_no) + ": expected key=value");
      const std::string_view key = io::trim(line.substr(0, eq));
      if (key.empty())
        throw DataError(path + ":" + std::to_string(line_no) + ": empty key");
      cfg.values_[std::string(key)] = std::string(io::trim(line.substr(eq + 1)));
    });
    return cfg;
  }

  // `key=value` from the command line; malformed input is a usage mistake.
  void apply_override(std::string_view assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string_view::npos)
      throw UsageError("--set expects key=value, got '" + std::string(assignment) + "'");
    const std::string_view key = io::trim(assignment.substr(0, eq));
    if (key.empty()) throw UsageError("--set expects a non-empty key");
    values_[std::string(key)] = std::string(io::trim(assignment.substr(eq + 1)));
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key, const std::string& def) const {
    const auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
  }

  double get_double(const std::string& key, double def) const {
    const auto it = values_.find(key);
    return it == values_.end() ? def : config_detail::to_double(it->second, key);
  }

  long long get_int(const std::string& key, long long def) const {
    const auto it = values_.find(key);
    return it == values_.end() ? def : config_detail::to_int(it->second, key);
  }

  std::size_t get_size(const std::string& key, std::size_t def) const {
    const long long v = get_int(key, static_cast<long long>(def));
    if (v < 0) throw UsageError("config: " + key + ": expected a non-negative integer");
    return static_cast<std::size_t>(v);
  }

  bool get_bool(const std::string& key, bool def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw UsageError("config: " + key + ": expected true/false, got '" + it->second + "'");
  }

  // Sorted `key=value` lines; parsing this dump reproduces the store.
  std::string dump() const {
    std::string out;
    for (const auto& [key, value] : values_) {
      out += key;
      out += '=';
      out += value;
      out += '\n';
    }
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Grid level syntax: `stride:scale,scale,...` joined by `;`, e.g.
// "4:32,40;8:64". Aspect ratios come from `grid.aspect_ratios` and apply to
// every level.
inline GridConfig grid_from_config(const Config& cfg, int frame_w, int frame_h) {
  GridConfig grid;
  grid.frame_w = frame_w;
  grid.frame_h = frame_h;
  const std::string levels_text = cfg.get_string("grid.levels", kDefaultGridLevels);
  const std::vector<double> ratios = config_detail::parse_double_list(
      cfg.get_string("grid.aspect_ratios", "1"), "grid.aspect_ratios");
  for (const std::string_view level_text : io::split(levels_text, ';')) {
    const std::string_view t = io::trim(level_text);
    if (t.empty()) throw UsageError("config: grid.levels: empty level spec");
    const std::size_t colon = t.find(':');
    if (colon == std::string_view::npos)
      throw UsageError("config: grid.levels: expected stride:scales in '" + std::string(t) + "'");
    AnchorLevelConfig level;
    const long long stride = config_detail::to_int(t.substr(0, colon), "grid.levels");
    if (stride <= 0) throw UsageError("config: grid.levels: stride must be positive");
    level.stride = static_cast<int>(stride);
    level.scales = config_detail::parse_double_list(t.substr(colon + 1), "grid.levels");
    level.aspect_ratios = ratios;
    grid.levels.push_back(std::move(level));
  }
  if (grid.levels.empty()) throw UsageError("config: grid.levels: no levels given");
  return grid;
}

inline SceneConfig scene_from_config(const Config& cfg) {
  SceneConfig s;
  s.n_objects = static_cast<int>(cfg.get_int("scene.n_objects", s.n_objects));
  s.frames = cfg.get_size("scene.frames", s.frames);
  s.frame_w = static_cast<int>(cfg.get_int("scene.frame_w", s.frame_w));
  s.frame_h = static_cast<int>(cfg.get_int("scene.frame_h", s.frame_h));
  s.min_size = cfg.get_double("scene.min_size", s.min_size);
  s.max_size = cfg.get_double("scene.max_size", s.max_size);
  s.aspect_min = cfg.get_double("scene.aspect_min", s.aspect_min);
  s.aspect_max = cfg.get_double("scene.aspect_max", s.aspect_max);
  s.min_speed = cfg.get_double("scene.min_speed", s.min_speed);
  s.max_speed = cfg.get_double("scene.max_speed", s.max_speed);
  s.jitter_sigma = cfg.get_double("scene.jitter_sigma", s.jitter_sigma);
  s.jump_prob = cfg.get_double("scene.jump_prob", s.jump_prob);
  s.jump_magnitude = cfg.get_double("scene.jump_magnitude", s.jump_magnitude);
  s.shot_changes = config_detail::parse_size_list(cfg.get_string("scene.shot_changes", ""),
                                                  "scene.shot_changes");
  s.occlusion_count = cfg.get_size("scene.occlusion_count", s.occlusion_count);
  s.occlusion_min_len = cfg.get_size("scene.occlusion_min_len", s.occlusion_min_len);
  s.occlusion_max_len = cfg.get_size("scene.occlusion_max_len", s.occlusion_max_len);
  const std::string occ_text = cfg.get_string("scene.occlusions", "");
  if (!io::trim(occ_text).empty()) {
    // Explicit occlusions: `object:start:length` joined by `;` (0-based
    // object index and frame).
    for (const std::string_view part : io::split(occ_text, ';')) {
      const std::vector<std::string_view> f = io::split(io::trim(part), ':');
      if (f.size() != 3)
        throw UsageError("config: scene.occlusions: expected object:start:length");
      OcclusionSpec spec;
      spec.object =
          static_cast<std::size_t>(config_detail::to_int(f[0], "scene.occlusions"));
      spec.start = static_cast<std::size_t>(config_detail::to_int(f[1], "scene.occlusions"));
      spec.length = static_cast<std::size_t>(config_detail::to_int(f[2], "scene.occlusions"));
      s.occlusions.push_back(spec);
    }
  }
  s.entry_spread = cfg.get_size("scene.entry_spread", s.entry_spread);
  s.exit_spread = cfg.get_size("scene.exit_spread", s.exit_spread);
  s.confine_cells = cfg.get_bool("scene.confine_cells", s.confine_cells);
  s.embedding_dim = static_cast<int>(cfg.get_int("scene.embedding_dim", s.embedding_dim));
  s.embedding_noise_sigma = cfg.get_double("scene.embedding_noise_sigma", s.embedding_noise_sigma);
  s.min_embedding_distance =
      cfg.get_double("scene.min_embedding_distance", s.min_embedding_distance);
  s.seed = static_cast<std::uint64_t>(cfg.get_int("scene.seed", static_cast<long long>(s.seed)));
  return s;
}

inline GeneratorConfig generator_from_config(const Config& cfg) {
  GeneratorConfig g;
  g.sigma_det = cfg.get_double("generator.sigma_det", g.sigma_det);
  g.sigma_active = cfg.get_double("generator.sigma_active", g.sigma_active);
  g.nms_redetect = cfg.get_double("generator.nms_redetect", g.nms_redetect);
  g.merge_iou = cfg.get_double("generator.merge_iou", g.merge_iou);
  g.k = cfg.get_size("generator.k", g.k);
  const std::string strategy = cfg.get_string("generator.strategy", "single");
  if (strategy == "single")
    g.strategy = AssignStrategy::single;
  else if (strategy == "multi")
    g.strategy = AssignStrategy::multi;
  else
    throw UsageError("config: generator.strategy: expected single or multi");
  const std::string motion = cfg.get_string("generator.motion", "identity");
  if (motion == "identity")
    g.motion = MotionMode::identity;
  else if (motion == "flow")
    g.motion = MotionMode::flow;
  else
    throw UsageError("config: generator.motion: expected identity or flow");
  return g;
}

inline SyntheticOracleConfig oracle_from_config(const Config& cfg, double generator_sigma_det,
                                                std::uint64_t seed) {
  SyntheticOracleConfig o;
  o.response_iou_floor = cfg.get_double("oracle.response_iou_floor", o.response_iou_floor);
  o.regression_noise_sigma =
      cfg.get_double("oracle.regression_noise_sigma", o.regression_noise_sigma);
  o.confidence_noise_sigma =
      cfg.get_double("oracle.confidence_noise_sigma", o.confidence_noise_sigma);
  o.dropout_prob = cfg.get_double("oracle.dropout_prob", o.dropout_prob);
  o.detect_nms_iou = cfg.get_double("oracle.detect_nms_iou", o.detect_nms_iou);
  o.sigma_det = cfg.get_double("oracle.sigma_det", generator_sigma_det);
  o.seed = static_cast<std::uint64_t>(cfg.get_int("oracle.seed", static_cast<long long>(seed)));
  return o;
}

inline LinkConfig link_from_config(const Config& cfg) {
  LinkConfig l;
  l.distance_threshold = cfg.get_double("linker.distance_threshold", l.distance_threshold);
  l.embedding_cadence = cfg.get_size("linker.embedding_cadence", l.embedding_cadence);
  return l;
}

}  // namespace retrack
