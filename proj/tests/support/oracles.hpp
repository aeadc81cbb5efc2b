#pragma once

// Independent reference implementations and deterministic generators used to
// cross-check the library. Everything here is deliberately naive: exhaustive
// searches and straight-line counting, no shared logic with the code under
// test beyond elementary IoU.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "retrack/box.hpp"
#include "retrack/metrics.hpp"
#include "retrack/rng.hpp"

namespace testsupport {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Deterministic sequence generator for property tests.
class TestRng {
 public:
  explicit TestRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t raw() {
    const std::uint64_t out = retrack::rng::splitmix64(state_);
    state_ += 0x9e3779b97f4a7c15ull;
    return out;
  }

  double uniform() { return retrack::rng::uniform(raw()); }

  double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

  // Uniform integer in [lo, hi] inclusive.
  long long uniform_int(long long lo, long long hi) {
    return lo + static_cast<long long>(uniform() * static_cast<double>(hi - lo + 1));
  }

  retrack::Box box(double frame_w, double frame_h, double min_size, double max_size) {
    const double w = uniform(min_size, max_size);
    const double h = uniform(min_size, max_size);
    const double x = uniform(0.0, frame_w - w);
    const double y = uniform(0.0, frame_h - h);
    return retrack::Box(x, y, w, h);
  }

 private:
  std::uint64_t state_;
};

struct BruteAssignment {
  std::vector<int> row_to_col;
  double total_cost = 0.0;
  std::size_t matched = 0;
};

namespace detail {

inline void brute_recurse(const std::vector<std::vector<double>>& cost, std::size_t r,
                          std::vector<int>& cur, std::vector<char>& used, std::size_t matched,
                          double sum, BruteAssignment& best) {
  if (r == cost.size()) {
    if (matched > best.matched || (matched == best.matched && sum < best.total_cost)) {
      best.matched = matched;
      best.total_cost = sum;
      best.row_to_col = cur;
    }
    return;
  }
  cur[r] = -1;
  brute_recurse(cost, r + 1, cur, used, matched, sum, best);
  for (std::size_t c = 0; c < cost[r].size(); ++c) {
    if (used[c] || cost[r][c] == kInf) continue;
    used[c] = 1;
    cur[r] = static_cast<int>(c);
    brute_recurse(cost, r + 1, cur, used, matched + 1, sum + cost[r][c], best);
    used[c] = 0;
  }
  cur[r] = -1;
}

}  // namespace detail

// Exhaustive optimum: maximize matched pairs over allowed (finite) entries,
// then minimize the summed cost. Exponential; small instances only.
inline BruteAssignment brute_assignment(const std::vector<std::vector<double>>& cost) {
  BruteAssignment best;
  best.row_to_col.assign(cost.size(), -1);
  std::vector<int> cur(cost.size(), -1);
  const std::size_t cols = cost.empty() ? 0 : cost[0].size();
  std::vector<char> used(cols, 0);
  detail::brute_recurse(cost, 0, cur, used, 0, 0.0, best);
  return best;
}

namespace detail {

inline void overlap_recurse(const std::vector<std::vector<std::size_t>>& ov, std::size_t r,
                            std::vector<char>& used, std::size_t sum, std::size_t& best) {
  if (r == ov.size()) {
    if (sum > best) best = sum;
    return;
  }
  overlap_recurse(ov, r + 1, used, sum, best);
  for (std::size_t c = 0; c < ov[r].size(); ++c) {
    if (used[c]) continue;
    used[c] = 1;
    overlap_recurse(ov, r + 1, used, sum + ov[r][c], best);
    used[c] = 0;
  }
}

}  // namespace detail

// Exhaustive maximum total overlap over one-to-one id mappings.
inline std::size_t brute_max_overlap(const std::vector<std::vector<std::size_t>>& ov) {
  std::size_t best = 0;
  const std::size_t cols = ov.empty() ? 0 : ov[0].size();
  std::vector<char> used(cols, 0);
  detail::overlap_recurse(ov, 0, used, 0, best);
  return best;
}

struct ClearCounts {
  std::size_t matches = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t id_switches = 0;
  std::size_t transfers = 0;
  std::size_t fragments = 0;
  std::size_t idtp = 0;
};

// Straight-line reference for the frame-by-frame evaluation: carry over the
// previous frame's still-valid pairs, complete with an exhaustive optimal
// matching, count events, and score identities by exhaustive search.
inline ClearCounts brute_clear(const retrack::TrajectorySet& gt,
                               const retrack::TrajectorySet& pred, double gate) {
  ClearCounts out;

  std::set<std::size_t> frames;
  for (const auto& [f, boxes] : gt.frames()) frames.insert(f);
  for (const auto& [f, boxes] : pred.frames()) frames.insert(f);

  std::map<std::size_t, std::size_t> prev, last_of_gt, last_of_pred;
  std::map<std::size_t, int> phase;  // 0 never matched, 1 matched, 2 gap after match

  static const std::map<std::size_t, retrack::Box> kEmpty;
  for (const std::size_t f : frames) {
    const auto git = gt.frames().find(f);
    const auto pit = pred.frames().find(f);
    const auto& g = git == gt.frames().end() ? kEmpty : git->second;
    const auto& p = pit == pred.frames().end() ? kEmpty : pit->second;

    std::map<std::size_t, std::size_t> pairs;
    std::set<std::size_t> taken_pred;
    for (const auto& [gid, pid] : prev) {
      if (!g.count(gid) || !p.count(pid)) continue;
      if (retrack::iou(g.at(gid), p.at(pid)) < gate) continue;
      pairs[gid] = pid;
      taken_pred.insert(pid);
    }

    std::vector<std::size_t> rows, cols;
    for (const auto& [gid, b] : g)
      if (!pairs.count(gid)) rows.push_back(gid);
    for (const auto& [pid, b] : p)
      if (!taken_pred.count(pid)) cols.push_back(pid);
    std::vector<std::vector<double>> cost(rows.size(), std::vector<double>(cols.size(), kInf));
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const double v = retrack::iou(g.at(rows[r]), p.at(cols[c]));
        if (v >= gate) cost[r][c] = 1.0 - v;
      }
    const BruteAssignment extra = brute_assignment(cost);
    for (std::size_t r = 0; r < rows.size(); ++r)
      if (extra.row_to_col[r] >= 0)
        pairs[rows[r]] = cols[static_cast<std::size_t>(extra.row_to_col[r])];

    out.matches += pairs.size();
    out.fp += p.size() - pairs.size();
    out.fn += g.size() - pairs.size();

    for (const auto& [gid, pid] : pairs) {
      if (last_of_gt.count(gid) && last_of_gt[gid] != pid) ++out.id_switches;
      last_of_gt[gid] = pid;
      if (last_of_pred.count(pid) && last_of_pred[pid] != gid) ++out.transfers;
      last_of_pred[pid] = gid;
    }

    for (const auto& [gid, b] : g) {
      int& ph = phase.emplace(gid, 0).first->second;
      if (pairs.count(gid)) {
        if (ph == 2) ++out.fragments;
        ph = 1;
      } else if (ph == 1) {
        ph = 2;
      }
    }

    prev = pairs;
  }

  std::vector<std::size_t> gt_ids, pred_ids;
  {
    std::set<std::size_t> gs, ps;
    for (const auto& [f, boxes] : gt.frames())
      for (const auto& [id, b] : boxes) gs.insert(id);
    for (const auto& [f, boxes] : pred.frames())
      for (const auto& [id, b] : boxes) ps.insert(id);
    gt_ids.assign(gs.begin(), gs.end());
    pred_ids.assign(ps.begin(), ps.end());
  }
  std::vector<std::vector<std::size_t>> overlap(gt_ids.size(),
                                                std::vector<std::size_t>(pred_ids.size(), 0));
  for (const std::size_t f : frames) {
    const auto git = gt.frames().find(f);
    const auto pit = pred.frames().find(f);
    if (git == gt.frames().end() || pit == pred.frames().end()) continue;
    for (std::size_t r = 0; r < gt_ids.size(); ++r) {
      const auto gb = git->second.find(gt_ids[r]);
      if (gb == git->second.end()) continue;
      for (std::size_t c = 0; c < pred_ids.size(); ++c) {
        const auto pb = pit->second.find(pred_ids[c]);
        if (pb == pit->second.end()) continue;
        if (retrack::iou(gb->second, pb->second) >= gate) ++overlap[r][c];
      }
    }
  }
  out.idtp = brute_max_overlap(overlap);
  return out;
}

}  // namespace testsupport
