#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "retrack/anchors.hpp"
#include "retrack/box.hpp"
#include "retrack/detector.hpp"
#include "retrack/embedding.hpp"
#include "retrack/generator.hpp"
#include "retrack/io.hpp"
#include "retrack/linker.hpp"
#include "retrack/scene.hpp"

namespace retrack {

// Supplies an appearance embedding for a box in a frame (the abstract face /
// person embedding network).
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual Embedding embed(std::size_t frame, const Box& box) = 0;
};

// Looks up the simulated identity whose ground-truth box best matches the
// request and returns that identity's per-frame observed embedding.
class SceneEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit SceneEmbeddingProvider(const GroundTruthScene& scene) : scene_(&scene) {}

  Embedding embed(std::size_t frame, const Box& box) override {
    std::vector<std::size_t> pool;
    for (std::size_t o = 0; o < scene_->objects.size(); ++o)
      if (scene_->objects[o].present(frame) && scene_->objects[o].vis(frame) > 0.0)
        pool.push_back(o);
    if (pool.empty())
      for (std::size_t o = 0; o < scene_->objects.size(); ++o)
        if (scene_->objects[o].present(frame)) pool.push_back(o);
    if (pool.empty())
      throw std::logic_error("scene embedding: no object present in frame " +
                             std::to_string(frame));
    std::size_t best = pool.front();
    double best_iou = -1.0;
    for (const std::size_t o : pool) {
      const double v = iou(scene_->objects[o].box(frame), box);
      if (v > best_iou) {
        best_iou = v;
        best = o;
      }
    }
    if (best_iou <= 0.0) {
      double best_d2 = std::numeric_limits<double>::infinity();
      for (const std::size_t o : pool) {
        const Box& b = scene_->objects[o].box(frame);
        const double dx = b.cx() - box.cx();
        const double dy = b.cy() - box.cy();
        const double d2 = dx * dx + dy * dy;
        if (d2 < best_d2) {
          best_d2 = d2;
          best = o;
        }
      }
    }
    return scene_->observed_embedding(frame, best);
  }

 private:
  const GroundTruthScene* scene_;
};

// Serves embeddings recorded alongside a ground-truth file: the request box
// is matched to the gt box with the highest IoU in that frame, then that
// identity's recorded embedding is returned. File frames are 1-based.
class FileEmbeddingProvider : public EmbeddingProvider {
 public:
  FileEmbeddingProvider(const std::string& gt_path, const std::string& embeddings_path) {
    for (const io::GtRow& row : io::read_mot_gt(gt_path))
      gt_by_frame_[row.frame].emplace_back(row.id, row.box);
    for (io::EmbeddingRow& row : io::read_embeddings(embeddings_path))
      embeddings_[{row.frame, row.id}] = std::move(row.values);
  }

  Embedding embed(std::size_t frame, const Box& box) override {
    const std::size_t file_frame = frame + 1;
    const auto it = gt_by_frame_.find(file_frame);
    if (it == gt_by_frame_.end() || it->second.empty())
      throw DataError("no ground-truth boxes for frame " + std::to_string(file_frame) +
                      " to resolve an embedding");
    int best_id = it->second.front().first;
    double best_iou = -1.0;
    for (const auto& [id, gt_box] : it->second) {
      const double v = iou(gt_box, box);
      if (v > best_iou) {
        best_iou = v;
        best_id = id;
      }
    }
    const auto emb = embeddings_.find({file_frame, best_id});
    if (emb == embeddings_.end())
      throw DataError("no embedding recorded for frame " + std::to_string(file_frame) +
                      ", id " + std::to_string(best_id));
    return emb->second;
  }

 private:
  std::map<std::size_t, std::vector<std::pair<int, Box>>> gt_by_frame_;
  std::map<std::pair<std::size_t, int>, Embedding> embeddings_;
};

struct RunOptions {
  GeneratorConfig generator;
  bool linker_enabled = true;
  LinkConfig link;
  EmbeddingProvider* embedder = nullptr;  // required when linker_enabled
};

struct RunOutput {
  std::vector<io::ResultRow> rows;  // sorted by (frame, id); 1-based frames
  std::size_t total_terminations = 0;
  std::size_t total_births = 0;
  std::size_t distinct_ids = 0;
  std::vector<std::size_t> queries_per_frame;
  std::vector<double> frame_ms;
};

// Runs the two-stage pipeline over frames [0, frames): tracklet generation,
// then (optionally) linking newborn tracklets to long-term tracks. Result ids
// are track ids when the linker is on, raw tracklet ids otherwise.
inline RunOutput run_tracking(DetectorBackend& backend, const AnchorGrid& grid,
                              std::size_t frames, const RunOptions& opt) {
  if (opt.linker_enabled && opt.embedder == nullptr)
    throw std::invalid_argument("run_tracking: linker enabled but no embedding provider");

  TrackletGenerator generator(backend, grid, opt.generator);
  TrackletLinker linker(opt.link);

  RunOutput out;
  std::set<int> ids_seen;

  for (std::size_t t = 0; t < frames; ++t) {
    const auto started = std::chrono::steady_clock::now();

    const FrameResult fr = t == 0 ? generator.init(0) : generator.step(t);

    if (opt.linker_enabled) {
      // Order matters: releasing terminated tracklets first lets a track go
      // awaiting before this frame's newborns try to resume it.
      for (const std::size_t tid : fr.terminated) linker.on_tracklet_terminated(tid);
      if (!fr.born.empty()) {
        std::vector<std::pair<std::size_t, Embedding>> newborns;
        newborns.reserve(fr.born.size());
        for (const FrameEntry& e : fr.born)
          newborns.emplace_back(e.tracklet_id, opt.embedder->embed(t, e.box));
        linker.observe(newborns);
      }
      for (const FrameEntry& e : fr.extended) {
        // Each tracklet re-extracts every cadence frames, phase-staggered by
        // its id so a crowd of same-age tracklets does not refresh on the
        // same frame and spike that frame's cost.
        const std::size_t age = t - generator.tracklet(e.tracklet_id).birth_frame;
        if (age > 0 && (age + e.tracklet_id) % opt.link.embedding_cadence == 0)
          linker.refresh(e.tracklet_id, opt.embedder->embed(t, e.box));
      }
    }

    for (const std::vector<FrameEntry>* group : {&fr.extended, &fr.born}) {
      for (const FrameEntry& e : *group) {
        io::ResultRow row;
        row.frame = t + 1;
        row.id = opt.linker_enabled ? static_cast<int>(linker.track_of(e.tracklet_id))
                                    : static_cast<int>(e.tracklet_id);
        row.box = e.box;
        row.conf = e.confidence;
        out.rows.push_back(row);
        ids_seen.insert(row.id);
      }
    }

    out.total_terminations += fr.terminated.size();
    out.total_births += fr.born.size();
    out.queries_per_frame.push_back(generator.backend_query_count());

    const auto finished = std::chrono::steady_clock::now();
    out.frame_ms.push_back(std::chrono::duration<double, std::milli>(finished - started).count());
  }

  std::sort(out.rows.begin(), out.rows.end(), [](const io::ResultRow& a, const io::ResultRow& b) {
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.id < b.id;
  });
  out.distinct_ids = ids_seen.size();
  return out;
}

// Nearest-rank percentile (p in (0,100]) of a sample; the sample is copied
// and sorted.
inline double percentile_nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile: empty sample");
  if (!(p > 0.0 && p <= 100.0)) throw std::invalid_argument("percentile: p must be in (0,100]");
  std::sort(values.begin(), values.end());
  const std::size_t rank =
      static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
  return values[rank - 1];
}

inline double mean(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("mean: empty sample");
  double s = 0.0;
  for (const double v : values) s += v;
  return s / static_cast<double>(values.size());
}

}  // namespace retrack
