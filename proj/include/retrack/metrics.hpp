#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "retrack/assignment.hpp"
#include "retrack/box.hpp"

namespace retrack {

// Per-frame box collections keyed by (frame, entity id); at most one box per
// pair. Ordered maps keep every traversal deterministic.
class TrajectorySet {
 public:
  void add(std::size_t frame, std::size_t id, const Box& b) {
    if (!entries_[frame].emplace(id, b).second)
      throw std::invalid_argument("TrajectorySet: duplicate (frame, id) entry");
  }

  const std::map<std::size_t, std::map<std::size_t, Box>>& frames() const { return entries_; }

  std::size_t box_count() const {
    std::size_t n = 0;
    for (const auto& [frame, boxes] : entries_) n += boxes.size();
    return n;
  }

  bool empty() const { return entries_.empty(); }

 private:
  std::map<std::size_t, std::map<std::size_t, Box>> entries_;
};

struct MetricsReport {
  double mota = 0.0;
  double idf1 = 0.0;
  double id_precision = 0.0;
  double id_recall = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t id_switches = 0;
  std::size_t transfers = 0;
  std::size_t fragments = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t matches = 0;
  std::size_t total_gt_boxes = 0;
  std::size_t total_pred_boxes = 0;
};

struct IdentityMatch {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (gt id, pred id), overlap > 0
  std::size_t idtp = 0;
};

// Identity-level assignment maximizing the summed per-frame gated overlap
// counts. Pairs that never overlap are allowed in the assignment (cost equals
// staying unmatched) but dropped from the returned map; equal-overlap ties
// prefer lower predicted ids.
inline IdentityMatch match_identities_global(const TrajectorySet& gt, const TrajectorySet& pred,
                                             double iou_gate = 0.5) {
  if (!(iou_gate > 0.0 && iou_gate <= 1.0))
    throw std::invalid_argument("match_identities_global: iou_gate must lie in (0,1]");

  std::map<std::size_t, std::size_t> gt_index, pred_index;  // id -> dense rank
  for (const auto& [frame, boxes] : gt.frames())
    for (const auto& [id, b] : boxes) gt_index.emplace(id, 0);
  for (const auto& [frame, boxes] : pred.frames())
    for (const auto& [id, b] : boxes) pred_index.emplace(id, 0);
  std::vector<std::size_t> gt_ids, pred_ids;
  for (auto& [id, rank] : gt_index) {
    rank = gt_ids.size();
    gt_ids.push_back(id);
  }
  for (auto& [id, rank] : pred_index) {
    rank = pred_ids.size();
    pred_ids.push_back(id);
  }

  IdentityMatch result;
  if (gt_ids.empty() || pred_ids.empty()) return result;

  std::vector<std::vector<std::size_t>> overlap(gt_ids.size(),
                                                std::vector<std::size_t>(pred_ids.size(), 0));
  auto pit = pred.frames().begin();
  for (const auto& [frame, gt_boxes] : gt.frames()) {
    while (pit != pred.frames().end() && pit->first < frame) ++pit;
    if (pit == pred.frames().end()) break;
    if (pit->first != frame) continue;
    for (const auto& [gid, gbox] : gt_boxes)
      for (const auto& [pid, pbox] : pit->second)
        if (iou(gbox, pbox) >= iou_gate) ++overlap[gt_index[gid]][pred_index[pid]];
  }

  std::size_t max_overlap = 0;
  for (const auto& row : overlap)
    for (const std::size_t o : row) max_overlap = std::max(max_overlap, o);

  // cost = (max - overlap) keeps everything nonnegative; a tiny rank epsilon
  // breaks overlap ties toward the lower predicted id without ever flipping
  // a comparison between distinct integer overlap sums.
  std::vector<std::vector<double>> cost(gt_ids.size(),
                                        std::vector<double>(pred_ids.size(), 0.0));
  for (std::size_t r = 0; r < gt_ids.size(); ++r)
    for (std::size_t c = 0; c < pred_ids.size(); ++c)
      cost[r][c] = static_cast<double>(max_overlap - overlap[r][c]) + 1e-9 * c;

  const AssignmentResult solved = solve_assignment(cost);
  for (std::size_t r = 0; r < gt_ids.size(); ++r) {
    const int c = solved.row_to_col[r];
    if (c < 0) continue;
    const std::size_t o = overlap[r][static_cast<std::size_t>(c)];
    if (o == 0) continue;
    result.pairs.emplace_back(gt_ids[r], pred_ids[static_cast<std::size_t>(c)]);
    result.idtp += o;
  }
  return result;
}

// CLEAR-style evaluation: per-frame gated matching with carry-over of the
// previous frame's pairs, then identity-level scores from the global
// matching. Ratio conventions when a denominator is zero: 1 when both sides
// are empty (vacuously perfect), else 0.
inline MetricsReport evaluate(const TrajectorySet& gt, const TrajectorySet& pred,
                              double iou_gate = 0.5) {
  if (!(iou_gate > 0.0 && iou_gate <= 1.0))
    throw std::invalid_argument("evaluate: iou_gate must lie in (0,1]");

  MetricsReport rep;
  rep.total_gt_boxes = gt.box_count();
  rep.total_pred_boxes = pred.box_count();

  std::map<std::size_t, std::size_t> prev_pairs;      // gt id -> pred id, previous frame
  std::map<std::size_t, std::size_t> last_match;      // gt id -> most recent pred id
  std::map<std::size_t, std::size_t> last_match_rev;  // pred id -> most recent gt id
  enum class GtPhase { never_matched, matched, gap_after_match };
  std::map<std::size_t, GtPhase> phase;

  std::vector<std::size_t> all_frames;
  {
    auto git = gt.frames().begin();
    auto pit = pred.frames().begin();
    while (git != gt.frames().end() || pit != pred.frames().end()) {
      if (pit == pred.frames().end() || (git != gt.frames().end() && git->first < pit->first)) {
        all_frames.push_back(git->first);
        ++git;
      } else if (git == gt.frames().end() || pit->first < git->first) {
        all_frames.push_back(pit->first);
        ++pit;
      } else {
        all_frames.push_back(git->first);
        ++git;
        ++pit;
      }
    }
  }

  static const std::map<std::size_t, Box> kNoBoxes;
  for (const std::size_t frame : all_frames) {
    const auto git = gt.frames().find(frame);
    const auto pit = pred.frames().find(frame);
    const std::map<std::size_t, Box>& gt_boxes = git == gt.frames().end() ? kNoBoxes : git->second;
    const std::map<std::size_t, Box>& pr_boxes =
        pit == pred.frames().end() ? kNoBoxes : pit->second;

    std::map<std::size_t, std::size_t> pairs;
    std::map<std::size_t, Box> free_gt = gt_boxes;
    std::map<std::size_t, Box> free_pred = pr_boxes;

    for (const auto& [g, p] : prev_pairs) {
      const auto gf = free_gt.find(g);
      const auto pf = free_pred.find(p);
      if (gf == free_gt.end() || pf == free_pred.end()) continue;
      if (iou(gf->second, pf->second) < iou_gate) continue;
      pairs[g] = p;
      free_gt.erase(gf);
      free_pred.erase(pf);
    }

    if (!free_gt.empty() && !free_pred.empty()) {
      std::vector<std::size_t> rows, cols;
      for (const auto& [g, b] : free_gt) rows.push_back(g);
      for (const auto& [p, b] : free_pred) cols.push_back(p);
      std::vector<std::vector<double>> cost(rows.size(),
                                            std::vector<double>(cols.size(), kForbidden));
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c) {
          const double v = iou(free_gt.at(rows[r]), free_pred.at(cols[c]));
          if (v >= iou_gate) cost[r][c] = 1.0 - v;
        }
      const AssignmentResult solved = solve_assignment(cost);
      for (std::size_t r = 0; r < rows.size(); ++r)
        if (solved.row_to_col[r] >= 0)
          pairs[rows[r]] = cols[static_cast<std::size_t>(solved.row_to_col[r])];
    }

    rep.matches += pairs.size();
    rep.fp += pr_boxes.size() - pairs.size();
    rep.fn += gt_boxes.size() - pairs.size();

    for (const auto& [g, p] : pairs) {
      const auto lm = last_match.find(g);
      if (lm != last_match.end() && lm->second != p) ++rep.id_switches;
      last_match[g] = p;
      const auto lr = last_match_rev.find(p);
      if (lr != last_match_rev.end() && lr->second != g) ++rep.transfers;
      last_match_rev[p] = g;
    }

    for (const auto& [g, b] : gt_boxes) {
      GtPhase& ph = phase.try_emplace(g, GtPhase::never_matched).first->second;
      if (pairs.count(g)) {
        if (ph == GtPhase::gap_after_match) ++rep.fragments;
        ph = GtPhase::matched;
      } else if (ph == GtPhase::matched) {
        ph = GtPhase::gap_after_match;
      }
    }

    prev_pairs = std::move(pairs);
  }

  const bool both_empty = rep.total_gt_boxes == 0 && rep.total_pred_boxes == 0;
  const auto ratio = [&](std::size_t num, std::size_t den) {
    if (den == 0) return both_empty ? 1.0 : 0.0;
    return static_cast<double>(num) / static_cast<double>(den);
  };

  if (rep.total_gt_boxes == 0) {
    rep.mota = both_empty ? 1.0 : 0.0;
  } else {
    rep.mota = 1.0 - static_cast<double>(rep.fn + rep.fp + rep.id_switches) /
                         static_cast<double>(rep.total_gt_boxes);
  }
  rep.precision = ratio(rep.matches, rep.total_pred_boxes);
  rep.recall = ratio(rep.matches, rep.total_gt_boxes);
  rep.f1 = (rep.precision + rep.recall) > 0.0
               ? 2.0 * rep.precision * rep.recall / (rep.precision + rep.recall)
               : (both_empty ? 1.0 : 0.0);

  const IdentityMatch ids = match_identities_global(gt, pred, iou_gate);
  rep.id_precision = ratio(ids.idtp, rep.total_pred_boxes);
  rep.id_recall = ratio(ids.idtp, rep.total_gt_boxes);
  const std::size_t id_den = rep.total_gt_boxes + rep.total_pred_boxes;
  rep.idf1 = id_den == 0 ? 1.0 : 2.0 * static_cast<double>(ids.idtp) / static_cast<double>(id_den);
  return rep;
}

inline std::string report_to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["mota"] = r.mota;
  j["idf1"] = r.idf1;
  j["id_precision"] = r.id_precision;
  j["id_recall"] = r.id_recall;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["id_switches"] = r.id_switches;
  j["transfers"] = r.transfers;
  j["fragments"] = r.fragments;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  j["matches"] = r.matches;
  j["total_gt_boxes"] = r.total_gt_boxes;
  j["total_pred_boxes"] = r.total_pred_boxes;
  return j.dump(2) + "\n";
}

inline std::string report_to_table(const MetricsReport& r) {
  char buf[160];
  std::string out;
  const auto row_f = [&](const char* name, double v) {
    std::snprintf(buf, sizeof(buf), "%-14s %10.6f\n", name, v);
    out += buf;
  };
  const auto row_n = [&](const char* name, std::size_t v) {
    std::snprintf(buf, sizeof(buf), "%-14s %10zu\n", name, v);
    out += buf;
  };
  row_f("MOTA", r.mota);
  row_f("IDF1", r.idf1);
  row_f("ID-precision", r.id_precision);
  row_f("ID-recall", r.id_recall);
  row_f("precision", r.precision);
  row_f("recall", r.recall);
  row_f("F1", r.f1);
  row_n("ID-switches", r.id_switches);
  row_n("transfers", r.transfers);
  row_n("fragments", r.fragments);
  row_n("FP", r.fp);
  row_n("FN", r.fn);
  row_n("matches", r.matches);
  row_n("GT boxes", r.total_gt_boxes);
  row_n("pred boxes", r.total_pred_boxes);
  return out;
}

}  // namespace retrack
