#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "retrack/box.hpp"

namespace retrack {

struct AnchorLevelConfig {
  int stride = 0;
  std::vector<double> scales;
  std::vector<double> aspect_ratios = {1.0};
};

struct GridConfig {
  int frame_w = 0;
  int frame_h = 0;
  std::vector<AnchorLevelConfig> levels;
};

struct AnchorLevel {
  int stride = 0;
  int feature_w = 0;
  int feature_h = 0;
  std::vector<double> scales;
  std::vector<double> aspect_ratios;
  std::size_t first_anchor = 0;  // offset of this level's block in the flat array
};

// Fixed multi-level anchor set. Flat anchor ids are level-major, then
// row-major over cells, then scale-major, then ratio:
//   id = first_anchor + ((row * feature_w + col) * |scales| + si) * |ratios| + ri
// Anchors sit on feature-cell centers ((col + 0.5) * stride, (row + 0.5) * stride);
// for scale s and ratio r the box is s*sqrt(r) wide and s/sqrt(r) tall (area s^2).
class AnchorGrid {
 public:
  explicit AnchorGrid(const GridConfig& config) {
    if (config.frame_w <= 0 || config.frame_h <= 0)
      throw std::invalid_argument("AnchorGrid: frame dimensions must be positive");
    if (config.levels.empty())
      throw std::invalid_argument("AnchorGrid: at least one level is required");
    frame_w_ = config.frame_w;
    frame_h_ = config.frame_h;
    for (const auto& lc : config.levels) {
      if (lc.stride <= 0)
        throw std::invalid_argument("AnchorGrid: stride must be positive");
      if (lc.scales.empty())
        throw std::invalid_argument("AnchorGrid: level needs at least one scale");
      if (lc.aspect_ratios.empty())
        throw std::invalid_argument("AnchorGrid: level needs at least one aspect ratio");
      for (double s : lc.scales)
        if (!(s > 0.0)) throw std::invalid_argument("AnchorGrid: scales must be positive");
      for (double r : lc.aspect_ratios)
        if (!(r > 0.0)) throw std::invalid_argument("AnchorGrid: ratios must be positive");

      AnchorLevel level;
      level.stride = lc.stride;
      level.feature_w = (config.frame_w + lc.stride - 1) / lc.stride;
      level.feature_h = (config.frame_h + lc.stride - 1) / lc.stride;
      level.scales = lc.scales;
      level.aspect_ratios = lc.aspect_ratios;
      level.first_anchor = anchors_.size();
      for (int row = 0; row < level.feature_h; ++row) {
        for (int col = 0; col < level.feature_w; ++col) {
          const double cx = (col + 0.5) * lc.stride;
          const double cy = (row + 0.5) * lc.stride;
          for (double s : lc.scales) {
            for (double r : lc.aspect_ratios) {
              const double w = s * std::sqrt(r);
              const double h = s / std::sqrt(r);
              anchors_.emplace_back(cx - 0.5 * w, cy - 0.5 * h, w, h);
            }
          }
        }
      }
      levels_.push_back(std::move(level));
    }
  }

  int frame_w() const { return frame_w_; }
  int frame_h() const { return frame_h_; }
  const std::vector<AnchorLevel>& levels() const { return levels_; }
  const std::vector<Box>& anchors() const { return anchors_; }
  std::size_t size() const { return anchors_.size(); }
  const Box& anchor(std::size_t id) const { return anchors_[id]; }

  // Calls fn(anchor_id) for every anchor whose box could overlap `b`: the
  // cell ranges are bounded per level by the largest anchor extent, so the
  // visit count depends on the box size, not the grid size. A superset of
  // the positive-IoU anchors may be visited.
  template <typename Fn>
  void for_each_candidate(const Box& b, Fn&& fn) const {
    for (const auto& level : levels_) {
      double max_hw = 0.0, max_hh = 0.0;
      for (double s : level.scales) {
        for (double r : level.aspect_ratios) {
          max_hw = std::max(max_hw, 0.5 * s * std::sqrt(r));
          max_hh = std::max(max_hh, 0.5 * s / std::sqrt(r));
        }
      }
      const int col_lo = std::max(
          0, static_cast<int>(std::floor((b.x - max_hw) / level.stride - 0.5)));
      const int col_hi = std::min(
          level.feature_w - 1,
          static_cast<int>(std::ceil((b.right() + max_hw) / level.stride - 0.5)));
      const int row_lo = std::max(
          0, static_cast<int>(std::floor((b.y - max_hh) / level.stride - 0.5)));
      const int row_hi = std::min(
          level.feature_h - 1,
          static_cast<int>(std::ceil((b.bottom() + max_hh) / level.stride - 0.5)));
      const std::size_t per_cell = level.scales.size() * level.aspect_ratios.size();
      for (int row = row_lo; row <= row_hi; ++row) {
        for (int col = col_lo; col <= col_hi; ++col) {
          const std::size_t base =
              level.first_anchor +
              (static_cast<std::size_t>(row) * level.feature_w + col) * per_cell;
          for (std::size_t k = 0; k < per_cell; ++k) fn(base + k);
        }
      }
    }
  }

 private:
  int frame_w_ = 0;
  int frame_h_ = 0;
  std::vector<AnchorLevel> levels_;
  std::vector<Box> anchors_;
};

enum class AssignStrategy { single, multi };

namespace anchor_detail {

// Max 1-D overlap between a length-`aext` interval centered on a lattice of
// cell centers ((c + 0.5) * stride, c in [0, cells)) and the fixed interval
// [glo, ghi]. Overlap as a function of the center is a concave tent with a
// plateau of width |ghi - glo - aext| centered on the interval's midpoint, so
// the lattice max sits in the plateau or at one of the two cells flanking the
// midpoint.
inline double axis_overlap_max(int stride, int cells, double glo, double ghi, double aext) {
  const double mid = 0.5 * (glo + ghi);
  const double half = 0.5 * std::abs((ghi - glo) - aext);
  const auto ov = [&](int c) {
    const double acx = (c + 0.5) * stride;
    return std::min(acx + 0.5 * aext, ghi) - std::max(acx - 0.5 * aext, glo);
  };
  const int pl = std::max(0, static_cast<int>(std::ceil((mid - half) / stride - 0.5)));
  const int pr = std::min(cells - 1, static_cast<int>(std::floor((mid + half) / stride - 0.5)));
  if (pl <= pr) return ov(pl);
  const int c1 = std::clamp(static_cast<int>(std::floor(mid / stride - 0.5)), 0, cells - 1);
  const int c2 = std::min(c1 + 1, cells - 1);
  return std::max(ov(c1), ov(c2));
}

struct AxisCells {
  int lo = 0;
  int hi = -1;
};

// Cells that can attain (or tie within rounding of) the lattice overlap max
// described above: the plateau cells when the plateau contains a lattice
// point, otherwise the two cells flanking the midpoint, widened by one cell
// on each side so that every anchor whose overlap agrees with the max to the
// last ulp is covered. Clamping both ends into [0, cells) afterwards keeps
// the nearest in-grid cell when the plateau lies outside the grid.
inline AxisCells axis_top_cells(int stride, int cells, double glo, double ghi, double aext) {
  const double mid = 0.5 * (glo + ghi);
  const double half = 0.5 * std::abs((ghi - glo) - aext);
  int lo = static_cast<int>(std::ceil((mid - half) / stride - 0.5));
  int hi = static_cast<int>(std::floor((mid + half) / stride - 0.5));
  if (lo > hi) {
    lo = static_cast<int>(std::floor(mid / stride - 0.5));
    hi = lo + 1;
  }
  lo = std::clamp(lo - 1, 0, cells - 1);
  hi = std::clamp(hi + 1, 0, cells - 1);
  return {lo, hi};
}

}  // namespace anchor_detail

struct TrackingAnchorEntry {
  std::size_t anchor_id = 0;
  double weight = 0.0;
};

// Anchors selected to redetect one tracklet. `fallback` marks the degenerate
// case where no anchor overlapped the predicted box and the nearest-center
// anchor was substituted.
struct TrackingAnchorSet {
  std::vector<TrackingAnchorEntry> entries;
  bool fallback = false;
};

struct AnchorOutput {
  std::size_t anchor_id = 0;
  double confidence = 0.0;
  Box box;
};

// Picks the anchors responsible for redetecting a tracklet predicted at
// `predicted`. single: the max-IoU anchor with weight 1.0. multi: the top-K
// anchors by IoU, each weighted by its IoU; zero-IoU anchors are excluded, so
// fewer than K entries may come back. Equal IoU breaks toward the lower
// anchor id. If no anchor overlaps at all, the anchor whose center is nearest
// the predicted center is returned with weight 1.0 and the set is flagged.
inline TrackingAnchorSet assign_tracking_anchors(const AnchorGrid& grid, const Box& predicted,
                                                 std::size_t K, AssignStrategy strategy) {
  if (K < 1) throw std::invalid_argument("assign_tracking_anchors: K must be >= 1");

  TrackingAnchorSet result;

  if (strategy == AssignStrategy::single) {
    // Argmax over all anchors by (IoU desc, anchor id asc) in two passes.
    // Pass 1 bounds each (level, scale, ratio) combo's best possible IoU in
    // closed form from the per-axis overlap maxima. Pass 2 rescans only the
    // combos within a hair of the best bound and scores their plateau and
    // flanking cells with the same iou() expression an exhaustive scan over
    // grid.anchor(id) would evaluate, so the winner matches such a scan to
    // the last bit. The margin is orders of magnitude above the rounding
    // noise of either pass yet still prunes essentially every losing combo.
    const double g_area = area(predicted);
    double vmax = 0.0;
    for (const auto& level : grid.levels()) {
      for (double s : level.scales) {
        for (double r : level.aspect_ratios) {
          const double aw = s * std::sqrt(r);
          const double ah = s / std::sqrt(r);
          const double ox = anchor_detail::axis_overlap_max(level.stride, level.feature_w,
                                                            predicted.x, predicted.right(), aw);
          if (ox <= 0.0) continue;
          const double oy = anchor_detail::axis_overlap_max(level.stride, level.feature_h,
                                                            predicted.y, predicted.bottom(), ah);
          if (oy <= 0.0) continue;
          const double inter = ox * oy;
          vmax = std::max(vmax, inter / (aw * ah + g_area - inter));
        }
      }
    }
    if (vmax > 0.0) {
      const double cutoff = vmax * (1.0 - 1e-12);
      double best_v = 0.0;
      std::size_t best_id = 0;
      bool found = false;
      for (const auto& level : grid.levels()) {
        const std::size_t n_ratios = level.aspect_ratios.size();
        const std::size_t per_cell = level.scales.size() * n_ratios;
        for (std::size_t si = 0; si < level.scales.size(); ++si) {
          for (std::size_t ri = 0; ri < n_ratios; ++ri) {
            const double s = level.scales[si];
            const double r = level.aspect_ratios[ri];
            const double aw = s * std::sqrt(r);
            const double ah = s / std::sqrt(r);
            const double ox = anchor_detail::axis_overlap_max(level.stride, level.feature_w,
                                                              predicted.x, predicted.right(), aw);
            if (ox <= 0.0) continue;
            const double oy = anchor_detail::axis_overlap_max(level.stride, level.feature_h,
                                                              predicted.y, predicted.bottom(), ah);
            if (oy <= 0.0) continue;
            const double inter = ox * oy;
            if (inter / (aw * ah + g_area - inter) < cutoff) continue;
            const auto cols = anchor_detail::axis_top_cells(level.stride, level.feature_w,
                                                            predicted.x, predicted.right(), aw);
            const auto rows = anchor_detail::axis_top_cells(level.stride, level.feature_h,
                                                            predicted.y, predicted.bottom(), ah);
            for (int row = rows.lo; row <= rows.hi; ++row) {
              for (int col = cols.lo; col <= cols.hi; ++col) {
                const std::size_t id =
                    level.first_anchor +
                    (static_cast<std::size_t>(row) * level.feature_w + col) * per_cell +
                    si * n_ratios + ri;
                const double v = iou(grid.anchor(id), predicted);
                if (v <= 0.0) continue;
                if (!found || v > best_v || (v == best_v && id < best_id)) {
                  found = true;
                  best_v = v;
                  best_id = id;
                }
              }
            }
          }
        }
      }
      if (found) {
        result.entries.push_back({best_id, 1.0});
        return result;
      }
    }
  } else {
    std::vector<std::pair<double, std::size_t>> scored;  // (iou, anchor_id)
    grid.for_each_candidate(predicted, [&](std::size_t id) {
      const double v = iou(grid.anchor(id), predicted);
      if (v > 0.0) scored.emplace_back(v, id);
    });
    if (!scored.empty()) {
      std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      const std::size_t n = std::min(K, scored.size());
      for (std::size_t i = 0; i < n; ++i)
        result.entries.push_back({scored[i].second, scored[i].first});
      return result;
    }
  }

  {
    // Nearest-center fallback. Per level only the cells flanking the
    // projected center can win; compare exact squared distances and break
    // ties toward the lower anchor id (the first scale/ratio of the cell).
    const double px = predicted.cx();
    const double py = predicted.cy();
    double best_d2 = std::numeric_limits<double>::infinity();
    std::size_t best_id = 0;
    for (const auto& level : grid.levels()) {
      const double fcol = px / level.stride - 0.5;
      const double frow = py / level.stride - 0.5;
      const std::size_t per_cell = level.scales.size() * level.aspect_ratios.size();
      for (int dr = 0; dr <= 1; ++dr) {
        for (int dc = 0; dc <= 1; ++dc) {
          const int col = std::clamp(static_cast<int>(std::floor(fcol)) + dc, 0,
                                     level.feature_w - 1);
          const int row = std::clamp(static_cast<int>(std::floor(frow)) + dr, 0,
                                     level.feature_h - 1);
          const double cx = (col + 0.5) * level.stride;
          const double cy = (row + 0.5) * level.stride;
          const double d2 = (cx - px) * (cx - px) + (cy - py) * (cy - py);
          const std::size_t id =
              level.first_anchor +
              (static_cast<std::size_t>(row) * level.feature_w + col) * per_cell;
          if (d2 < best_d2 || (d2 == best_d2 && id < best_id)) {
            best_d2 = d2;
            best_id = id;
          }
        }
      }
    }
    result.entries.push_back({best_id, 1.0});
    result.fallback = true;
    return result;
  }
}

struct Redetection {
  Box box;
  double confidence = 0.0;
};

// Weighted mean of the assigned anchors' decoded boxes and confidences,
// coordinate-wise, normalized by the total weight.
inline Redetection aggregate_redetection(
    const TrackingAnchorSet& set,
    const std::unordered_map<std::size_t, AnchorOutput>& outputs) {
  if (set.entries.empty())
    throw std::logic_error("aggregate_redetection: empty tracking-anchor set");
  double wsum = 0.0, x = 0.0, y = 0.0, w = 0.0, h = 0.0, c = 0.0;
  for (const auto& entry : set.entries) {
    const auto it = outputs.find(entry.anchor_id);
    if (it == outputs.end())
      throw std::logic_error("aggregate_redetection: missing output for assigned anchor");
    const AnchorOutput& out = it->second;
    wsum += entry.weight;
    x += entry.weight * out.box.x;
    y += entry.weight * out.box.y;
    w += entry.weight * out.box.w;
    h += entry.weight * out.box.h;
    c += entry.weight * out.confidence;
  }
  if (!(wsum > 0.0))
    throw std::logic_error("aggregate_redetection: total weight must be positive");
  return Redetection{Box(x / wsum, y / wsum, w / wsum, h / wsum), c / wsum};
}

}  // namespace retrack
