#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "retrack/box.hpp"
#include "retrack/raster.hpp"

namespace retrack {

// Dense displacement field at its own resolution (width x height), covering a
// frame of frame_w x frame_h pixels. Stored displacements are in field units;
// sampling scales them to frame pixels.
struct FlowField {
  int width = 0;
  int height = 0;
  int frame_w = 0;
  int frame_h = 0;
  std::vector<double> dx;
  std::vector<double> dy;

  FlowField() = default;
  FlowField(int w, int h, int fw, int fh) : width(w), height(h), frame_w(fw), frame_h(fh) {
    if (w <= 0 || h <= 0 || fw <= 0 || fh <= 0)
      throw std::invalid_argument("FlowField: dimensions must be positive");
    dx.assign(static_cast<std::size_t>(w) * h, 0.0);
    dy.assign(static_cast<std::size_t>(w) * h, 0.0);
  }

  std::size_t index(int col, int row) const {
    return static_cast<std::size_t>(row) * width + col;
  }
};

// Produces the displacement field between consecutive frames t and t+1.
// Implementations must be deterministic for fixed inputs.
class FlowProvider {
 public:
  virtual ~FlowProvider() = default;
  virtual FlowField between(std::size_t frame) = 0;
};

inline Box predict_identity(const Box& b) { return b; }

// Inclusive range of cells (unit spacing, centers at i + 0.5) whose centers
// lie in [lo, hi], clamped to [0, count). Returns an empty range as
// (first > last).
inline std::pair<int, int> covered_cells(double lo, double hi, int count) {
  int a = static_cast<int>(std::ceil(lo - 0.5));
  int b = static_cast<int>(std::floor(hi - 0.5));
  return {std::max(a, 0), std::min(b, count - 1)};
}

// Mean displacement over field cells whose centers fall inside `b` after
// clipping to the frame, returned in frame pixels. A clipped box too small to
// cover any cell center falls back to the single cell containing its center.
inline std::pair<double, double> mean_flow_in_box(const FlowField& field, const Box& b) {
  if (b.right() <= 0.0 || b.x >= field.frame_w || b.bottom() <= 0.0 || b.y >= field.frame_h)
    throw std::invalid_argument("mean_flow_in_box: box lies entirely outside the frame");

  const double sx = static_cast<double>(field.width) / field.frame_w;
  const double sy = static_cast<double>(field.height) / field.frame_h;
  const double left = std::max(b.x, 0.0) * sx;
  const double right = std::min(b.right(), static_cast<double>(field.frame_w)) * sx;
  const double top = std::max(b.y, 0.0) * sy;
  const double bottom = std::min(b.bottom(), static_cast<double>(field.frame_h)) * sy;

  const auto [col_lo, col_hi] = covered_cells(left, right, field.width);
  const auto [row_lo, row_hi] = covered_cells(top, bottom, field.height);

  double sum_dx = 0.0, sum_dy = 0.0;
  std::size_t count = 0;
  if (col_lo > col_hi || row_lo > row_hi) {
    const int col = std::clamp(static_cast<int>(std::floor(0.5 * (left + right))), 0,
                               field.width - 1);
    const int row = std::clamp(static_cast<int>(std::floor(0.5 * (top + bottom))), 0,
                               field.height - 1);
    sum_dx = field.dx[field.index(col, row)];
    sum_dy = field.dy[field.index(col, row)];
    count = 1;
  } else {
    for (int row = row_lo; row <= row_hi; ++row) {
      for (int col = col_lo; col <= col_hi; ++col) {
        sum_dx += field.dx[field.index(col, row)];
        sum_dy += field.dy[field.index(col, row)];
        ++count;
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(count);
  return {sum_dx * inv / sx, sum_dy * inv / sy};
}

// Shifts the box by the mean displacement over it; size is unchanged.
inline Box predict_flow(const Box& b, const FlowField& field) {
  const auto [mx, my] = mean_flow_in_box(field, b);
  return shift(b, mx, my);
}

struct BlockMatchParams {
  int block_size = 16;
  int search_radius = 8;
  int grid_step = 16;
};

// Integer block matching: for each field cell, the displacement within the
// search window minimizing sum-of-absolute-differences between the previous
// frame's block and the next frame's shifted block. Candidates are tried in
// order of (squared norm, dy, dx) and only a strictly smaller SAD replaces
// the incumbent, so ties resolve toward zero displacement, then
// lexicographically. Candidate blocks falling outside the next frame are
// skipped; the zero displacement is always evaluable.
inline FlowField block_matching_flow(const Raster& prev, const Raster& next,
                                     const BlockMatchParams& params) {
  if (prev.width != next.width || prev.height != next.height)
    throw std::invalid_argument("block_matching_flow: frame sizes differ");
  if (params.block_size <= 0 || params.search_radius < 0 || params.grid_step <= 0)
    throw std::invalid_argument("block_matching_flow: parameters must be positive");
  if (params.block_size > prev.width || params.block_size > prev.height)
    throw std::invalid_argument("block_matching_flow: block larger than frame");

  const int field_w = std::max(1, prev.width / params.grid_step);
  const int field_h = std::max(1, prev.height / params.grid_step);
  FlowField field(field_w, field_h, prev.width, prev.height);

  std::vector<std::tuple<int, int, int>> candidates;  // (norm2, dy, dx)
  for (int dy = -params.search_radius; dy <= params.search_radius; ++dy)
    for (int dx = -params.search_radius; dx <= params.search_radius; ++dx)
      candidates.emplace_back(dx * dx + dy * dy, dy, dx);
  std::sort(candidates.begin(), candidates.end());

  const double cell_w = static_cast<double>(prev.width) / field_w;
  const double cell_h = static_cast<double>(prev.height) / field_h;
  const int bs = params.block_size;

  for (int row = 0; row < field_h; ++row) {
    for (int col = 0; col < field_w; ++col) {
      const double cx = (col + 0.5) * cell_w;
      const double cy = (row + 0.5) * cell_h;
      const int x0 = std::clamp(static_cast<int>(std::lround(cx - 0.5 * bs)), 0,
                                prev.width - bs);
      const int y0 = std::clamp(static_cast<int>(std::lround(cy - 0.5 * bs)), 0,
                                prev.height - bs);

      long best_sad = -1;
      int best_dx = 0, best_dy = 0;
      for (const auto& [norm2, dy, dx] : candidates) {
        const int nx = x0 + dx;
        const int ny = y0 + dy;
        if (nx < 0 || ny < 0 || nx + bs > next.width || ny + bs > next.height) continue;
        long sad = 0;
        for (int by = 0; by < bs; ++by) {
          const std::uint8_t* pr = &prev.pixels[static_cast<std::size_t>(y0 + by) * prev.width + x0];
          const std::uint8_t* nr = &next.pixels[static_cast<std::size_t>(ny + by) * next.width + nx];
          for (int bx = 0; bx < bs; ++bx)
            sad += std::abs(static_cast<int>(pr[bx]) - static_cast<int>(nr[bx]));
        }
        if (best_sad < 0 || sad < best_sad) {
          best_sad = sad;
          best_dx = dx;
          best_dy = dy;
        }
      }
      field.dx[field.index(col, row)] = best_dx / cell_w;
      field.dy[field.index(col, row)] = best_dy / cell_h;
    }
  }
  return field;
}

}  // namespace retrack
