#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace retrack {

// Axis-aligned box: top-left corner (x, y), width w, height h.
// Coordinates are continuous pixels; negative x/y are allowed (boxes may
// extend past frame edges before clipping). w and h must be positive.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 1.0;
  double h = 1.0;

  Box() = default;
  Box(double x_, double y_, double w_, double h_) : x(x_), y(y_), w(w_), h(h_) {
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(w) || !std::isfinite(h))
      throw std::invalid_argument("Box: coordinates must be finite");
    if (w <= 0.0 || h <= 0.0)
      throw std::invalid_argument("Box: width and height must be positive");
  }

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double cx() const { return x + 0.5 * w; }
  double cy() const { return y + 0.5 * h; }
};

inline double area(const Box& b) { return b.w * b.h; }

inline double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (area(a) + area(b) - inter);
}

// Translates the box by (dx, dy); size is unchanged.
inline Box shift(const Box& b, double dx, double dy) {
  return Box(b.x + dx, b.y + dy, b.w, b.h);
}

struct NmsResult {
  // Kept indices, highest score first (ties keep the lower input index first).
  std::vector<std::size_t> kept;
  // Per input index: -1 if kept, otherwise the kept index that suppressed it.
  std::vector<std::ptrdiff_t> suppressed_by;
};

// Greedy descending-score suppression. A box is dropped when its IoU with an
// already-kept box exceeds `threshold` (strictly), so threshold 1.0 keeps
// everything. Equal scores break toward the lower input index.
inline NmsResult nms(const std::vector<Box>& boxes, const std::vector<double>& scores,
                     double threshold) {
  if (boxes.size() != scores.size())
    throw std::invalid_argument("nms: boxes and scores differ in length");
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw std::invalid_argument("nms: threshold must lie in [0,1]");

  std::vector<std::size_t> order(boxes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  NmsResult result;
  result.suppressed_by.assign(boxes.size(), -1);
  for (std::size_t idx : order) {
    bool keep = true;
    for (std::size_t k : result.kept) {
      if (iou(boxes[idx], boxes[k]) > threshold) {
        result.suppressed_by[idx] = static_cast<std::ptrdiff_t>(k);
        keep = false;
        break;
      }
    }
    if (keep) result.kept.push_back(idx);
  }
  return result;
}

}  // namespace retrack
