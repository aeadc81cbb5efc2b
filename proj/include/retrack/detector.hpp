#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "retrack/anchors.hpp"
#include "retrack/box.hpp"
#include "retrack/io.hpp"
#include "retrack/rng.hpp"
#include "retrack/scene.hpp"

namespace retrack {

struct Detection {
  Box box;
  double confidence = 0.0;
};

// Stand-in for the single-shot detector network. query answers per-anchor
// outputs for the requested anchor ids; detect answers the frame's fresh
// detections, already thresholded and NMS-filtered. Both must be
// deterministic for a fixed (frame, inputs, seed).
class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  virtual std::vector<AnchorOutput> query(std::size_t frame,
                                          const std::vector<std::size_t>& anchor_ids) = 0;
  virtual std::vector<Detection> detect(std::size_t frame) = 0;
};

struct SyntheticOracleConfig {
  // An anchor responds to an object only when their IoU reaches this floor.
  double response_iou_floor = 0.3;
  double regression_noise_sigma = 0.0;
  double confidence_noise_sigma = 0.02;
  // Per (frame, object) probability that the detector misses the object.
  double dropout_prob = 0.0;
  double detect_nms_iou = 0.6;
  double sigma_det = 0.9;
  std::uint64_t seed = 7;
};

// Ground-truth-driven backend. Every frame runs one dense forward pass over
// the whole anchor grid (confidence map reset, prior-box decode, per-object
// response writes), mirroring how a single-shot detector spends the same
// compute regardless of object count; query and detect then read the
// materialized outputs. Per-anchor noise is realized on read: it is a pure
// function of (seed, frame, owning object, anchor), so answers do not depend
// on query order and only the handful of anchors actually read pay for it.
class SyntheticBackend : public DetectorBackend {
 public:
  SyntheticBackend(const GroundTruthScene& scene, const AnchorGrid& grid,
                   const SyntheticOracleConfig& cfg)
      : scene_(&scene), grid_(&grid), cfg_(cfg) {
    if (cfg.response_iou_floor < 0.0 || cfg.response_iou_floor > 1.0)
      throw std::invalid_argument("oracle.response_iou_floor must lie in [0,1]");
    if (cfg.dropout_prob < 0.0 || cfg.dropout_prob > 1.0)
      throw std::invalid_argument("oracle.dropout_prob must lie in [0,1]");
    if (cfg.regression_noise_sigma < 0.0 || cfg.confidence_noise_sigma < 0.0)
      throw std::invalid_argument("oracle noise sigmas must be >= 0");
    conf_.assign(grid.size(), 0.0);
    boxes_.assign(grid.anchors().begin(), grid.anchors().end());
    best_obj_.assign(grid.size(), -1);
    best_iou_.assign(grid.size(), 0.0);
  }

  std::vector<AnchorOutput> query(std::size_t frame,
                                  const std::vector<std::size_t>& anchor_ids) override {
    forward(frame);
    queries_received_ += anchor_ids.size();
    std::vector<AnchorOutput> out;
    out.reserve(anchor_ids.size());
    for (const std::size_t id : anchor_ids) {
      if (id >= grid_->size())
        throw std::out_of_range("query: anchor id outside the grid");
      double conf = conf_[id];
      Box box = boxes_[id];
      if (best_obj_[id] != -1) {
        const auto o = static_cast<std::size_t>(best_obj_[id]);
        if (cfg_.confidence_noise_sigma > 0.0)
          conf += cfg_.confidence_noise_sigma *
                  scene_detail::gauss_keyed(cfg_.seed, kQueryConf, frame, o, id);
        conf = std::clamp(conf, 0.0, 1.0);
        box = noisy_box(box, kQueryBox, frame, o, id);
      }
      out.push_back(AnchorOutput{id, conf, box});
    }
    return out;
  }

  std::vector<Detection> detect(std::size_t frame) override {
    forward(frame);
    std::vector<Detection> dets;
    std::vector<Box> boxes;
    std::vector<double> scores;
    for (std::size_t o = 0; o < scene_->objects.size(); ++o) {
      const SceneObject& obj = scene_->objects[o];
      if (!obj.present(frame) || obj.vis(frame) <= 0.0 || dropped(frame, o)) continue;
      const double vis = obj.vis(frame);
      double conf = vis;
      if (cfg_.confidence_noise_sigma > 0.0)
        conf += cfg_.confidence_noise_sigma *
                scene_detail::gauss_keyed(cfg_.seed, kDetConf, frame, o, 0);
      conf = std::clamp(conf, 0.0, 1.0);
      if (conf < cfg_.sigma_det) continue;
      boxes.push_back(noisy_box(obj.box(frame), kDetBox, frame, o, 0));
      scores.push_back(conf);
    }
    const NmsResult keep = nms(boxes, scores, cfg_.detect_nms_iou);
    dets.reserve(keep.kept.size());
    for (const std::size_t i : keep.kept) dets.push_back(Detection{boxes[i], scores[i]});
    return dets;
  }

  std::size_t queries_received() const { return queries_received_; }

 private:
  static constexpr std::uint64_t kDrop = 101;
  static constexpr std::uint64_t kQueryConf = 102;
  static constexpr std::uint64_t kQueryBox = 103;
  static constexpr std::uint64_t kDetConf = 104;
  static constexpr std::uint64_t kDetBox = 105;

  bool dropped(std::size_t frame, std::size_t object) const {
    if (cfg_.dropout_prob <= 0.0) return false;
    return rng::uniform(rng::mix(cfg_.seed, kDrop, frame, object)) < cfg_.dropout_prob;
  }

  Box noisy_box(const Box& b, std::uint64_t stream, std::size_t frame, std::size_t object,
                std::uint64_t inner) const {
    if (cfg_.regression_noise_sigma <= 0.0) return b;
    const auto g = [&](std::uint64_t coord) {
      return cfg_.regression_noise_sigma *
             scene_detail::gauss_keyed(cfg_.seed, stream, frame, object, inner * 4 + coord);
    };
    return Box(b.x + g(0), b.y + g(1), std::max(1e-3, b.w + g(2)), std::max(1e-3, b.h + g(3)));
  }

  void forward(std::size_t frame) {
    if (frame >= scene_->frames)
      throw std::out_of_range("detector backend: frame outside the scene");
    if (cached_frame_ == static_cast<std::ptrdiff_t>(frame)) return;
    cached_frame_ = static_cast<std::ptrdiff_t>(frame);

    // Fixed-cost part of the pass: background confidences and prior decode.
    std::fill(conf_.begin(), conf_.end(), 0.0);
    std::copy(grid_->anchors().begin(), grid_->anchors().end(), boxes_.begin());
    std::fill(best_obj_.begin(), best_obj_.end(), -1);

    const double floor = cfg_.response_iou_floor;
    for (std::size_t o = 0; o < scene_->objects.size(); ++o) {
      const SceneObject& obj = scene_->objects[o];
      if (!obj.present(frame) || obj.vis(frame) <= 0.0 || dropped(frame, o)) continue;
      const double vis = obj.vis(frame);
      const Box& gt = obj.box(frame);
      const double gt_area = area(gt);

      for (const AnchorLevel& level : grid_->levels()) {
        const std::size_t per_cell = level.scales.size() * level.aspect_ratios.size();
        std::size_t combo = 0;
        for (const double s : level.scales) {
          for (const double r : level.aspect_ratios) {
            const std::size_t combo_index = combo++;
            const double aw = s * std::sqrt(r);
            const double ah = s / std::sqrt(r);
            const double anchor_area = aw * ah;
            const double max_area = std::max(anchor_area, gt_area);
            // IoU >= floor is impossible when the smaller area is already
            // below floor * larger area.
            if (std::min(anchor_area, gt_area) < floor * max_area) continue;
            // IoU >= floor forces inter >= floor * (A + G) / (1 + floor);
            // dividing by the best possible overlap of the other axis turns
            // that into per-axis center margins that bound the candidate
            // cell window. The pad keeps rounding from shaving a boundary
            // cell; cells that only enter through it fail the exact IoU test
            // below.
            constexpr double kPad = 1e-6;
            const double need_inter = floor * (anchor_area + gt_area) / (1.0 + floor);
            const double margin_x = 0.5 * (aw + gt.w) - need_inter / std::min(ah, gt.h) + kPad;
            const double margin_y = 0.5 * (ah + gt.h) - need_inter / std::min(aw, gt.w) + kPad;
            if (margin_x <= 0.0 || margin_y <= 0.0) continue;
            const double cx = gt.cx(), cy = gt.cy();
            const int col_lo = std::max(
                0, static_cast<int>(std::ceil((cx - margin_x) / level.stride - 0.5)));
            const int col_hi = std::min(
                level.feature_w - 1,
                static_cast<int>(std::floor((cx + margin_x) / level.stride - 0.5)));
            const int row_lo = std::max(
                0, static_cast<int>(std::ceil((cy - margin_y) / level.stride - 0.5)));
            const int row_hi = std::min(
                level.feature_h - 1,
                static_cast<int>(std::floor((cy + margin_y) / level.stride - 0.5)));
            if (col_lo > col_hi || row_lo > row_hi) continue;

            ox_.clear();
            for (int col = col_lo; col <= col_hi; ++col) {
              const double acx = (col + 0.5) * level.stride;
              ox_.push_back(std::max(
                  0.0, std::min(acx + 0.5 * aw, gt.right()) - std::max(acx - 0.5 * aw, gt.x)));
            }
            oy_.clear();
            for (int row = row_lo; row <= row_hi; ++row) {
              const double acy = (row + 0.5) * level.stride;
              oy_.push_back(std::max(
                  0.0, std::min(acy + 0.5 * ah, gt.bottom()) - std::max(acy - 0.5 * ah, gt.y)));
            }

            // inter >= need_inter is algebraically the same as IoU >= floor;
            // rejecting just below it by a relative hair avoids the division
            // on sub-floor cells while the exact test still decides any cell
            // inside the band.
            const double near_need = need_inter * (1.0 - 1e-12);
            for (int row = row_lo; row <= row_hi; ++row) {
              const double oy = oy_[row - row_lo];
              if (oy <= 0.0) continue;
              const std::size_t row_base =
                  level.first_anchor +
                  (static_cast<std::size_t>(row) * level.feature_w) * per_cell;
              for (int col = col_lo; col <= col_hi; ++col) {
                const double inter = ox_[col - col_lo] * oy;
                if (inter <= 0.0 || inter < near_need) continue;
                const double v = inter / (anchor_area + gt_area - inter);
                if (v < floor) continue;
                const std::size_t a = row_base + static_cast<std::size_t>(col) * per_cell +
                                      combo_index;
                if (best_obj_[a] != -1 && v <= best_iou_[a]) continue;
                best_obj_[a] = static_cast<int>(o);
                best_iou_[a] = v;
                conf_[a] = v * vis;
                boxes_[a] = gt;
              }
            }
          }
        }
      }
    }
  }

  const GroundTruthScene* scene_;
  const AnchorGrid* grid_;
  SyntheticOracleConfig cfg_;
  std::ptrdiff_t cached_frame_ = -1;
  std::vector<double> conf_;
  std::vector<Box> boxes_;
  std::vector<int> best_obj_;
  std::vector<double> best_iou_;
  std::vector<double> ox_, oy_;
  std::size_t queries_received_ = 0;
};

// Answers queries and detections from a recorded file. Anchors without a
// recorded row answer confidence 0 with the anchor's prior box.
class ReplayBackend : public DetectorBackend {
 public:
  ReplayBackend(const std::string& path, const AnchorGrid& grid) : grid_(&grid) {
    const io::ReplayData data = io::read_replay(path);
    for (const io::ReplayQueryRow& row : data.queries) {
      if (row.anchor_id >= grid.size())
        throw DataError(path + ": recorded anchor id " + std::to_string(row.anchor_id) +
                        " outside the configured grid");
      queries_[key(row.frame, row.anchor_id)] = AnchorOutput{row.anchor_id, row.conf, row.box};
    }
    for (const io::ReplayDetectRow& row : data.detects)
      detects_[row.frame].push_back(Detection{row.box, row.conf});
  }

  std::vector<AnchorOutput> query(std::size_t frame,
                                  const std::vector<std::size_t>& anchor_ids) override {
    std::vector<AnchorOutput> out;
    out.reserve(anchor_ids.size());
    for (const std::size_t id : anchor_ids) {
      if (id >= grid_->size())
        throw std::out_of_range("query: anchor id outside the grid");
      const auto it = queries_.find(key(frame, id));
      if (it == queries_.end())
        out.push_back(AnchorOutput{id, 0.0, grid_->anchor(id)});
      else
        out.push_back(it->second);
    }
    return out;
  }

  std::vector<Detection> detect(std::size_t frame) override {
    const auto it = detects_.find(frame);
    if (it == detects_.end()) return {};
    return it->second;
  }

 private:
  static std::uint64_t key(std::size_t frame, std::size_t anchor) {
    return (static_cast<std::uint64_t>(frame) << 32) | static_cast<std::uint64_t>(anchor);
  }

  const AnchorGrid* grid_;
  std::unordered_map<std::uint64_t, AnchorOutput> queries_;
  std::unordered_map<std::size_t, std::vector<Detection>> detects_;
};

// Tees every answer of an inner backend into a replay file.
class RecordingBackend : public DetectorBackend {
 public:
  RecordingBackend(DetectorBackend& inner, const std::string& path)
      : inner_(&inner), out_(path, std::ios::binary) {
    if (!out_) throw DataError("cannot write " + path);
    out_ << "# Q,frame,anchor_id,conf,x,y,w,h / D,frame,conf,x,y,w,h\n";
  }

  std::vector<AnchorOutput> query(std::size_t frame,
                                  const std::vector<std::size_t>& anchor_ids) override {
    std::vector<AnchorOutput> out = inner_->query(frame, anchor_ids);
    for (const AnchorOutput& a : out)
      out_ << io::format_replay_query(frame, a.anchor_id, a.confidence, a.box);
    return out;
  }

  std::vector<Detection> detect(std::size_t frame) override {
    std::vector<Detection> dets = inner_->detect(frame);
    for (const Detection& d : dets) out_ << io::format_replay_detect(frame, d.confidence, d.box);
    return dets;
  }

 private:
  DetectorBackend* inner_;
  std::ofstream out_;
};

}  // namespace retrack
