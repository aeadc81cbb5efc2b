#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "retrack/box.hpp"
#include "retrack/embedding.hpp"
#include "retrack/flow.hpp"
#include "retrack/raster.hpp"
#include "retrack/rng.hpp"

namespace retrack {

// Explicit initial state for one simulated object; unset fields are sampled.
struct ObjectInit {
  std::optional<double> x, y, w, h, vx, vy;
};

struct OcclusionSpec {
  std::size_t object = 0;
  std::size_t start = 0;
  std::size_t length = 0;
};

struct SceneConfig {
  int n_objects = 1;
  std::size_t frames = 100;
  int frame_w = 512;
  int frame_h = 512;
  double min_size = 56.0;
  double max_size = 76.0;
  double aspect_min = 1.0;
  double aspect_max = 1.0;
  double min_speed = 0.0;
  double max_speed = 2.0;
  double jitter_sigma = 0.0;
  double jump_prob = 0.0;
  double jump_magnitude = 0.0;
  std::vector<std::size_t> shot_changes;
  std::size_t occlusion_count = 0;
  std::size_t occlusion_min_len = 8;
  std::size_t occlusion_max_len = 20;
  std::vector<OcclusionSpec> occlusions;
  std::size_t entry_spread = 0;
  std::size_t exit_spread = 0;
  // When set, each object moves inside its own disjoint cell of a regular
  // partition of the frame, so boxes of distinct objects never overlap.
  bool confine_cells = true;
  int embedding_dim = 128;
  double embedding_noise_sigma = 0.02;
  double min_embedding_distance = 1.2;
  std::uint64_t seed = 1;
  std::vector<ObjectInit> object_inits;
};

enum class EventKind { occlusion, entry, exit, shot_change, jump };

struct SceneEvent {
  std::size_t frame = 0;
  EventKind kind = EventKind::occlusion;
  int object = -1;  // -1 for scene-wide events
};

struct SceneObject {
  int identity = 0;  // 1-based, stable across the scene
  std::size_t first_frame = 0;
  std::size_t last_frame = 0;  // inclusive
  std::vector<Box> boxes;      // index 0 corresponds to first_frame
  std::vector<double> visibility;

  bool present(std::size_t frame) const {
    return frame >= first_frame && frame <= last_frame;
  }
  const Box& box(std::size_t frame) const { return boxes[frame - first_frame]; }
  double vis(std::size_t frame) const { return visibility[frame - first_frame]; }
};

class GroundTruthScene {
 public:
  std::size_t frames = 0;
  int frame_w = 0;
  int frame_h = 0;
  std::vector<SceneObject> objects;
  std::vector<Embedding> identity_embeddings;  // index = object order
  std::vector<SceneEvent> events;
  std::uint64_t seed = 0;
  double embedding_noise_sigma = 0.0;

  // The per-frame appearance of an object: its identity vector plus noise,
  // renormalized. Pure in (seed, frame, object), so callers may sample in any
  // order.
  Embedding observed_embedding(std::size_t frame, std::size_t object_index) const;
};

namespace scene_detail {

constexpr std::uint64_t kInit = 1;
constexpr std::uint64_t kJitter = 2;
constexpr std::uint64_t kJump = 3;
constexpr std::uint64_t kEmbedBase = 4;
constexpr std::uint64_t kEmbedNoise = 5;
constexpr std::uint64_t kEvents = 6;
constexpr std::uint64_t kTexture = 7;
constexpr std::uint64_t kShot = 8;

inline double uniform_in(double lo, double hi, std::uint64_t raw) {
  return lo + rng::uniform(raw) * (hi - lo);
}

// Uniform integer in [lo, hi] inclusive.
inline std::size_t uniform_int(std::size_t lo, std::size_t hi, std::uint64_t raw) {
  if (hi <= lo) return lo;
  const std::size_t span = hi - lo + 1;
  const auto off = static_cast<std::size_t>(rng::uniform(raw) * static_cast<double>(span));
  return lo + std::min(off, span - 1);
}

inline double gauss_keyed(std::uint64_t seed, std::uint64_t stream, std::uint64_t a,
                          std::uint64_t b, std::uint64_t c) {
  return rng::gaussian(rng::mix(seed, stream, a, b, 2 * c),
                       rng::mix(seed, stream, a, b, 2 * c + 1));
}

// Reflects x into [lo, hi], flipping the velocity sign on each bounce.
inline void reflect(double& x, double& vx, double lo, double hi) {
  if (hi <= lo) {
    x = lo;
    return;
  }
  for (int guard = 0; (x < lo || x > hi) && guard < 64; ++guard) {
    if (x < lo) {
      x = 2.0 * lo - x;
    } else {
      x = 2.0 * hi - x;
    }
    vx = -vx;
  }
  x = std::clamp(x, lo, hi);
}

}  // namespace scene_detail

inline Embedding GroundTruthScene::observed_embedding(std::size_t frame,
                                                      std::size_t object_index) const {
  const Embedding& base = identity_embeddings.at(object_index);
  if (embedding_noise_sigma <= 0.0) return base;
  Embedding noisy(base.size());
  for (std::size_t d = 0; d < base.size(); ++d)
    noisy[d] = base[d] + embedding_noise_sigma *
                             scene_detail::gauss_keyed(seed, scene_detail::kEmbedNoise,
                                                       object_index, frame, d);
  return normalized(noisy);
}

inline GroundTruthScene generate(const SceneConfig& cfg) {
  using namespace scene_detail;
  if (cfg.frames == 0) throw std::invalid_argument("scene.frames must be >= 1");
  if (cfg.frame_w <= 0 || cfg.frame_h <= 0)
    throw std::invalid_argument("scene.frame_w and scene.frame_h must be positive");
  if (cfg.n_objects < 0) throw std::invalid_argument("scene.n_objects must be >= 0");
  if (!(cfg.min_size > 0.0) || cfg.max_size < cfg.min_size)
    throw std::invalid_argument("scene.min_size/scene.max_size must satisfy 0 < min <= max");
  if (cfg.min_speed < 0.0 || cfg.max_speed < cfg.min_speed)
    throw std::invalid_argument("scene.min_speed/scene.max_speed must satisfy 0 <= min <= max");
  if (!(cfg.aspect_min > 0.0) || cfg.aspect_max < cfg.aspect_min)
    throw std::invalid_argument("scene.aspect_min/scene.aspect_max must satisfy 0 < min <= max");
  if (cfg.jump_prob < 0.0 || cfg.jump_prob > 1.0)
    throw std::invalid_argument("scene.jump_prob must lie in [0,1]");
  if (cfg.jitter_sigma < 0.0)
    throw std::invalid_argument("scene.jitter_sigma must be >= 0");
  if (cfg.embedding_dim < 1)
    throw std::invalid_argument("scene.embedding_dim must be >= 1");
  if (cfg.embedding_noise_sigma < 0.0)
    throw std::invalid_argument("scene.embedding_noise_sigma must be >= 0");

  const int n = cfg.n_objects;
  GroundTruthScene scene;
  scene.frames = cfg.frames;
  scene.frame_w = cfg.frame_w;
  scene.frame_h = cfg.frame_h;
  scene.seed = cfg.seed;
  scene.embedding_noise_sigma = cfg.embedding_noise_sigma;

  int grid_cols = 1, grid_rows = 1;
  if (cfg.confine_cells && n > 0) {
    grid_cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    grid_rows = (n + grid_cols - 1) / grid_cols;
    const double cell_w = static_cast<double>(cfg.frame_w) / grid_cols;
    const double cell_h = static_cast<double>(cfg.frame_h) / grid_rows;
    const double max_h = cfg.max_size * std::max(1.0, cfg.aspect_max);
    if (cfg.max_size + 2.0 > cell_w || max_h + 2.0 > cell_h)
      throw std::invalid_argument(
          "scene.max_size does not fit the confinement cell implied by scene.n_objects");
  }

  const std::uint64_t seed = cfg.seed;
  for (int o = 0; o < n; ++o) {
    Box region = [&] {
      if (!cfg.confine_cells)
        return Box(0.0, 0.0, cfg.frame_w, cfg.frame_h);
      const int col = o % grid_cols;
      const int row = o / grid_cols;
      const double cell_w = static_cast<double>(cfg.frame_w) / grid_cols;
      const double cell_h = static_cast<double>(cfg.frame_h) / grid_rows;
      return Box(col * cell_w + 1.0, row * cell_h + 1.0, cell_w - 2.0, cell_h - 2.0);
    }();

    const ObjectInit init =
        static_cast<std::size_t>(o) < cfg.object_inits.size() ? cfg.object_inits[o] : ObjectInit{};
    const auto draw = [&](std::uint64_t slot) { return rng::mix(seed, kInit, o, slot); };

    const double w = init.w ? *init.w : uniform_in(cfg.min_size, cfg.max_size, draw(0));
    const double aspect = uniform_in(cfg.aspect_min, cfg.aspect_max, draw(1));
    const double h = init.h ? *init.h : w * aspect;
    if (w > region.w || h > region.h)
      throw std::invalid_argument("scene object does not fit its movement region");

    double x = init.x ? *init.x : uniform_in(region.x, region.right() - w, draw(2));
    double y = init.y ? *init.y : uniform_in(region.y, region.bottom() - h, draw(3));
    double vx = init.vx ? *init.vx
                        : uniform_in(cfg.min_speed, cfg.max_speed, draw(4)) *
                              (rng::uniform(draw(5)) < 0.5 ? -1.0 : 1.0);
    double vy = init.vy ? *init.vy
                        : uniform_in(cfg.min_speed, cfg.max_speed, draw(6)) *
                              (rng::uniform(draw(7)) < 0.5 ? -1.0 : 1.0);

    std::size_t birth = 0, death = cfg.frames - 1;
    if (cfg.entry_spread > 0)
      birth = uniform_int(0, std::min(cfg.entry_spread, cfg.frames - 1), draw(8));
    if (cfg.exit_spread > 0) {
      const std::size_t cut = uniform_int(0, std::min(cfg.exit_spread, cfg.frames - 1), draw(9));
      death = std::max(birth, cfg.frames - 1 - cut);
    }

    SceneObject obj;
    obj.identity = o + 1;
    obj.first_frame = birth;
    obj.last_frame = death;
    if (birth > 0) scene.events.push_back({birth, EventKind::entry, o});
    if (death < cfg.frames - 1) scene.events.push_back({death, EventKind::exit, o});

    const double lo_x = region.x, hi_x = region.right() - w;
    const double lo_y = region.y, hi_y = region.bottom() - h;
    reflect(x, vx, lo_x, hi_x);
    reflect(y, vy, lo_y, hi_y);
    obj.boxes.emplace_back(x, y, w, h);
    for (std::size_t t = birth + 1; t <= death; ++t) {
      x += vx;
      y += vy;
      if (cfg.jitter_sigma > 0.0) {
        x += cfg.jitter_sigma * gauss_keyed(seed, kJitter, o, t, 0);
        y += cfg.jitter_sigma * gauss_keyed(seed, kJitter, o, t, 1);
      }
      if (cfg.jump_prob > 0.0 &&
          rng::uniform(rng::mix(seed, kJump, o, t, 0)) < cfg.jump_prob) {
        const double theta =
            rng::uniform(rng::mix(seed, kJump, o, t, 1)) * 2.0 * 3.141592653589793;
        x += cfg.jump_magnitude * std::cos(theta);
        y += cfg.jump_magnitude * std::sin(theta);
        scene.events.push_back({t, EventKind::jump, o});
      }
      if (std::find(cfg.shot_changes.begin(), cfg.shot_changes.end(), t) !=
          cfg.shot_changes.end()) {
        x = uniform_in(lo_x, std::max(lo_x, hi_x), rng::mix(seed, kShot, o, t, 0));
        y = uniform_in(lo_y, std::max(lo_y, hi_y), rng::mix(seed, kShot, o, t, 1));
      }
      reflect(x, vx, lo_x, hi_x);
      reflect(y, vy, lo_y, hi_y);
      obj.boxes.emplace_back(x, y, w, h);
    }
    obj.visibility.assign(obj.boxes.size(), 1.0);
    scene.objects.push_back(std::move(obj));
  }

  for (std::size_t f : cfg.shot_changes)
    if (f > 0 && f < cfg.frames) scene.events.push_back({f, EventKind::shot_change, -1});

  std::vector<OcclusionSpec> occlusions = cfg.occlusions;
  for (std::size_t k = 0; k < cfg.occlusion_count && n > 0; ++k) {
    const std::size_t lo = cfg.frames / 4;
    const std::size_t hi = std::max(lo, (3 * cfg.frames) / 4);
    OcclusionSpec spec;
    spec.object = k % static_cast<std::size_t>(n);
    spec.start = uniform_int(lo, hi, rng::mix(seed, kEvents, k, 0));
    spec.length =
        uniform_int(cfg.occlusion_min_len, cfg.occlusion_max_len, rng::mix(seed, kEvents, k, 1));
    occlusions.push_back(spec);
  }
  for (const auto& occ : occlusions) {
    if (occ.object >= static_cast<std::size_t>(n))
      throw std::invalid_argument("scene occlusion refers to an object out of range");
    SceneObject& obj = scene.objects[occ.object];
    bool any = false;
    for (std::size_t t = occ.start; t < occ.start + occ.length; ++t) {
      if (!obj.present(t)) continue;
      obj.visibility[t - obj.first_frame] = 0.0;
      any = true;
    }
    if (any)
      scene.events.push_back({occ.start, EventKind::occlusion, static_cast<int>(occ.object)});
  }

  // Identity vectors: random unit vectors, re-drawn until pairwise distances
  // reach the configured minimum.
  for (int i = 0; i < n; ++i) {
    Embedding vec;
    bool accepted = false;
    for (std::uint64_t attempt = 0; attempt < 100 && !accepted; ++attempt) {
      Embedding raw(cfg.embedding_dim);
      for (int d = 0; d < cfg.embedding_dim; ++d)
        raw[d] = gauss_keyed(seed, kEmbedBase, i, d, attempt);
      vec = normalized(raw);
      accepted = true;
      for (const Embedding& prev : scene.identity_embeddings)
        if (euclidean(vec, prev) < cfg.min_embedding_distance) accepted = false;
    }
    if (!accepted)
      throw std::runtime_error(
          "scene.min_embedding_distance unreachable for scene.n_objects in scene.embedding_dim "
          "dimensions");
    scene.identity_embeddings.push_back(std::move(vec));
  }

  std::sort(scene.events.begin(), scene.events.end(), [](const SceneEvent& a, const SceneEvent& b) {
    if (a.frame != b.frame) return a.frame < b.frame;
    if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
    return a.object < b.object;
  });
  return scene;
}

// Draws every visible object as a textured rectangle over a flat background.
// The texture is a pure hash of (identity, pixel offset from the box origin),
// so it translates rigidly with the box.
inline Raster render_raster(const GroundTruthScene& scene, std::size_t frame) {
  using namespace scene_detail;
  if (frame >= scene.frames)
    throw std::out_of_range("render_raster: frame outside the scene");
  Raster img(scene.frame_w, scene.frame_h, 24);
  for (const SceneObject& obj : scene.objects) {
    if (!obj.present(frame) || obj.vis(frame) <= 0.0) continue;
    const Box& b = obj.box(frame);
    const int x0 = static_cast<int>(std::lround(b.x));
    const int y0 = static_cast<int>(std::lround(b.y));
    const int x1 = static_cast<int>(std::lround(b.right()));
    const int y1 = static_cast<int>(std::lround(b.bottom()));
    for (int y = std::max(y0, 0); y < std::min(y1, scene.frame_h); ++y) {
      for (int x = std::max(x0, 0); x < std::min(x1, scene.frame_w); ++x) {
        const std::uint64_t hash =
            rng::mix(scene.seed, kTexture, static_cast<std::uint64_t>(obj.identity),
                     static_cast<std::uint64_t>(x - x0), static_cast<std::uint64_t>(y - y0));
        img.at(x, y) = static_cast<std::uint8_t>(64 + (hash % 192));
      }
    }
  }
  return img;
}

// Exact displacement field between frames t and t+1 at frame resolution:
// each object's true box delta over the cells its frame-t box covers, zero
// elsewhere; where objects overlap, the later-listed object wins.
inline FlowField oracle_flow(const GroundTruthScene& scene, std::size_t frame) {
  if (frame + 1 >= scene.frames)
    throw std::out_of_range("oracle_flow: needs a successor frame inside the scene");
  FlowField field(scene.frame_w, scene.frame_h, scene.frame_w, scene.frame_h);
  for (const SceneObject& obj : scene.objects) {
    if (!obj.present(frame) || !obj.present(frame + 1)) continue;
    const Box& a = obj.box(frame);
    const Box& b = obj.box(frame + 1);
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const auto [col_lo, col_hi] =
        covered_cells(std::max(a.x, 0.0), std::min(a.right(), double(scene.frame_w)),
                      scene.frame_w);
    const auto [row_lo, row_hi] =
        covered_cells(std::max(a.y, 0.0), std::min(a.bottom(), double(scene.frame_h)),
                      scene.frame_h);
    for (int row = row_lo; row <= row_hi; ++row) {
      for (int col = col_lo; col <= col_hi; ++col) {
        field.dx[field.index(col, row)] = dx;
        field.dy[field.index(col, row)] = dy;
      }
    }
  }
  return field;
}

class OracleFlowProvider : public FlowProvider {
 public:
  explicit OracleFlowProvider(const GroundTruthScene& scene) : scene_(&scene) {}
  FlowField between(std::size_t frame) override { return oracle_flow(*scene_, frame); }

 private:
  const GroundTruthScene* scene_;
};

class BlockMatchingFlowProvider : public FlowProvider {
 public:
  BlockMatchingFlowProvider(const GroundTruthScene& scene, BlockMatchParams params)
      : scene_(&scene), params_(params) {}

  FlowField between(std::size_t frame) override {
    Raster prev = cached_frame_ == frame ? std::move(cached_) : render_raster(*scene_, frame);
    Raster next = render_raster(*scene_, frame + 1);
    FlowField field = block_matching_flow(prev, next, params_);
    cached_ = std::move(next);
    cached_frame_ = frame + 1;
    return field;
  }

 private:
  const GroundTruthScene* scene_;
  BlockMatchParams params_;
  Raster cached_;
  std::size_t cached_frame_ = static_cast<std::size_t>(-1);
};

}  // namespace retrack
