#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "retrack/anchors.hpp"
#include "retrack/box.hpp"
#include "retrack/detector.hpp"
#include "retrack/flow.hpp"

namespace retrack {

enum class TrackletState { active, terminated };

struct TrackletEntry {
  std::size_t frame = 0;
  Box box;
  double confidence = 0.0;
};

// Gap-free per-frame box sequence for one object; terminated on failed
// redetection and never revived (long-term identity is the linker's job).
struct Tracklet {
  std::size_t id = 0;
  std::size_t birth_frame = 0;
  TrackletState state = TrackletState::active;
  std::vector<TrackletEntry> boxes;  // consecutive frames from birth_frame
};

enum class MotionMode { identity, flow };

struct GeneratorConfig {
  double sigma_det = 0.9;     // spawn threshold for fresh detections
  double sigma_active = 0.4;  // keep-alive threshold for redetections
  double nms_redetect = 0.6;  // tracklet-vs-tracklet merge threshold
  double merge_iou = 0.3;     // tracklet-vs-fresh-detection suppression
  std::size_t k = 1;
  AssignStrategy strategy = AssignStrategy::single;
  MotionMode motion = MotionMode::identity;
  FlowProvider* flow = nullptr;
};

struct FrameEntry {
  std::size_t tracklet_id = 0;
  Box box;
  double confidence = 0.0;
};

struct FrameResult {
  std::vector<FrameEntry> extended;
  std::vector<std::size_t> terminated;
  std::vector<FrameEntry> born;
  // Extended tracklets whose anchor assignment fell back to the
  // nearest-center anchor (diagnostic only).
  std::vector<std::size_t> fallback_ids;
};

// Frame-by-frame tracklet engine: predict each active tracklet, redetect it
// through its tracking anchors, keep or terminate by confidence, merge
// overlapping survivors, then spawn tracklets from unclaimed fresh
// detections.
class TrackletGenerator {
 public:
  TrackletGenerator(DetectorBackend& backend, const AnchorGrid& grid, const GeneratorConfig& cfg)
      : backend_(&backend), grid_(&grid), cfg_(cfg) {
    const auto ratio = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!ratio(cfg.sigma_det) || !ratio(cfg.sigma_active) || !ratio(cfg.nms_redetect) ||
        !ratio(cfg.merge_iou))
      throw std::invalid_argument("generator: thresholds must lie in [0,1]");
    if (cfg.k < 1) throw std::invalid_argument("generator: k must be >= 1");
    if (cfg.motion == MotionMode::flow && cfg.flow == nullptr)
      throw std::invalid_argument("generator: flow motion needs a flow provider");
  }

  FrameResult init(std::size_t frame0) {
    if (initialized_) throw std::logic_error("generator: init called twice");
    initialized_ = true;
    last_frame_ = frame0;
    query_count_ = 0;
    FrameResult result;
    spawn_from_detections(frame0, {}, result);
    return result;
  }

  FrameResult step(std::size_t frame) {
    if (!initialized_) throw std::logic_error("generator: step before init");
    if (frame != last_frame_ + 1)
      throw std::logic_error("generator: out-of-order frame (expected " +
                             std::to_string(last_frame_ + 1) + ", got " +
                             std::to_string(frame) + ")");
    last_frame_ = frame;
    query_count_ = 0;
    FrameResult result;

    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < tracklets_.size(); ++i)
      if (tracklets_[i].state == TrackletState::active) active.push_back(i);

    std::optional<FlowField> field;
    if (cfg_.motion == MotionMode::flow && !active.empty())
      field = cfg_.flow->between(frame - 1);

    struct Redet {
      std::size_t index;  // into tracklets_
      Box box;
      double confidence;
      bool fallback;
    };
    std::vector<Redet> survivors;

    for (const std::size_t i : active) {
      Tracklet& t = tracklets_[i];
      const Box& last = t.boxes.back().box;
      if (fully_outside(last)) {
        terminate(t, result);
        continue;
      }
      const Box predicted =
          cfg_.motion == MotionMode::identity ? last : predict_flow(last, *field);
      if (fully_outside(predicted)) {
        terminate(t, result);
        continue;
      }
      const TrackingAnchorSet set =
          assign_tracking_anchors(*grid_, predicted, cfg_.k, cfg_.strategy);
      std::vector<std::size_t> ids;
      ids.reserve(set.entries.size());
      for (const auto& e : set.entries) ids.push_back(e.anchor_id);
      const std::vector<AnchorOutput> outputs = backend_->query(frame, ids);
      query_count_ += ids.size();
      std::unordered_map<std::size_t, AnchorOutput> by_id;
      by_id.reserve(outputs.size());
      for (const AnchorOutput& o : outputs) by_id.emplace(o.anchor_id, o);
      const Redetection rd = aggregate_redetection(set, by_id);
      if (rd.confidence >= cfg_.sigma_active)
        survivors.push_back(Redet{i, rd.box, rd.confidence, set.fallback});
      else
        terminate(t, result);
    }

    // Merge: survivors ordered by ascending tracklet id, so the shared NMS
    // tie rule (equal confidence -> lower index) keeps the lower id.
    std::vector<Box> boxes;
    std::vector<double> scores;
    boxes.reserve(survivors.size());
    scores.reserve(survivors.size());
    for (const Redet& r : survivors) {
      boxes.push_back(r.box);
      scores.push_back(r.confidence);
    }
    const NmsResult merge = nms(boxes, scores, cfg_.nms_redetect);
    std::vector<Box> surviving_boxes;
    for (std::size_t k = 0; k < survivors.size(); ++k) {
      Tracklet& t = tracklets_[survivors[k].index];
      if (merge.suppressed_by[k] >= 0) {
        terminate(t, result);
        continue;
      }
      t.boxes.push_back(TrackletEntry{frame, survivors[k].box, survivors[k].confidence});
      result.extended.push_back(FrameEntry{t.id, survivors[k].box, survivors[k].confidence});
      if (survivors[k].fallback) result.fallback_ids.push_back(t.id);
      surviving_boxes.push_back(survivors[k].box);
    }

    spawn_from_detections(frame, surviving_boxes, result);
    return result;
  }

  // Anchor queries issued to the backend during the most recent init/step.
  std::size_t backend_query_count() const { return query_count_; }

  const std::vector<Tracklet>& tracklets() const { return tracklets_; }

  const Tracklet& tracklet(std::size_t id) const {
    if (id < 1 || id > tracklets_.size())
      throw std::out_of_range("generator: unknown tracklet id");
    return tracklets_[id - 1];
  }

  std::size_t active_count() const {
    std::size_t n = 0;
    for (const Tracklet& t : tracklets_)
      if (t.state == TrackletState::active) ++n;
    return n;
  }

 private:
  bool fully_outside(const Box& b) const {
    return b.x >= grid_->frame_w() || b.y >= grid_->frame_h() || b.right() <= 0.0 ||
           b.bottom() <= 0.0;
  }

  void terminate(Tracklet& t, FrameResult& result) {
    t.state = TrackletState::terminated;
    result.terminated.push_back(t.id);
  }

  void spawn_from_detections(std::size_t frame, const std::vector<Box>& surviving,
                             FrameResult& result) {
    const std::vector<Detection> dets = backend_->detect(frame);
    for (const Detection& d : dets) {
      if (d.confidence < cfg_.sigma_det) continue;
      bool suppressed = false;
      for (const Box& s : surviving) {
        if (iou(d.box, s) > cfg_.merge_iou) {
          suppressed = true;
          break;
        }
      }
      if (suppressed) continue;
      Tracklet t;
      t.id = tracklets_.size() + 1;
      t.birth_frame = frame;
      t.boxes.push_back(TrackletEntry{frame, d.box, d.confidence});
      result.born.push_back(FrameEntry{t.id, d.box, d.confidence});
      tracklets_.push_back(std::move(t));
    }
  }

  DetectorBackend* backend_;
  const AnchorGrid* grid_;
  GeneratorConfig cfg_;
  bool initialized_ = false;
  std::size_t last_frame_ = 0;
  std::size_t query_count_ = 0;
  std::vector<Tracklet> tracklets_;
};

}  // namespace retrack
