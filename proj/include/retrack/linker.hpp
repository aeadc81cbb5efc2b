#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "retrack/assignment.hpp"
#include "retrack/embedding.hpp"

namespace retrack {

struct LinkConfig {
  // Euclidean gate on unit vectors; pairs farther apart can never link.
  double distance_threshold = 0.97;
  // Frames between embedding re-extractions for a live tracklet.
  std::size_t embedding_cadence = 10;
};

enum class TrackState { linked_active, awaiting };

// Long-term identity: a chain of tracklets sharing one appearance bank. The
// bank is the running mean of every embedding observed for the track,
// renormalized to unit length on read.
struct Track {
  std::size_t id = 0;
  TrackState state = TrackState::linked_active;
  Embedding raw_sum;  // un-normalized sum of observed embeddings
  std::size_t sample_count = 0;
  std::vector<std::size_t> member_tracklets;

  Embedding bank() const { return normalized(raw_sum); }
};

// Links newborn tracklets to awaiting tracks by embedding distance. Tracks
// alternate linked-active (a member tracklet is alive) and awaiting (the last
// member terminated; the track can be resumed by a matching tracklet).
class TrackletLinker {
 public:
  explicit TrackletLinker(const LinkConfig& cfg) : cfg_(cfg) {
    if (!(cfg.distance_threshold > 0.0))
      throw std::invalid_argument("linker: distance_threshold must be > 0");
    if (cfg.embedding_cadence < 1)
      throw std::invalid_argument("linker: embedding_cadence must be >= 1");
  }

  // One batch per frame over that frame's newborn tracklets. Matched
  // tracklets resume their track; the rest found new tracks. Returns
  // (tracklet_id, track_id) in input order.
  std::vector<std::pair<std::size_t, std::size_t>> observe(
      const std::vector<std::pair<std::size_t, Embedding>>& new_tracklets) {
    for (std::size_t i = 0; i < new_tracklets.size(); ++i) {
      check_unit(new_tracklets[i].second, "observe");
      if (owner_.count(new_tracklets[i].first))
        throw std::logic_error("linker: tracklet already belongs to a track");
      for (std::size_t j = i + 1; j < new_tracklets.size(); ++j)
        if (new_tracklets[i].first == new_tracklets[j].first)
          throw std::logic_error("linker: duplicate tracklet id in one observe call");
    }

    std::vector<std::size_t> awaiting;  // indices into tracks_, ascending id
    for (std::size_t t = 0; t < tracks_.size(); ++t)
      if (tracks_[t].state == TrackState::awaiting) awaiting.push_back(t);

    std::vector<std::vector<double>> cost(new_tracklets.size(),
                                          std::vector<double>(awaiting.size(), kForbidden));
    for (std::size_t r = 0; r < new_tracklets.size(); ++r) {
      for (std::size_t c = 0; c < awaiting.size(); ++c) {
        const double d = euclidean(new_tracklets[r].second, tracks_[awaiting[c]].bank());
        if (d <= cfg_.distance_threshold) cost[r][c] = d;
      }
    }
    const AssignmentResult match = solve_assignment(cost);

    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(new_tracklets.size());
    for (std::size_t r = 0; r < new_tracklets.size(); ++r) {
      const auto& [tid, emb] = new_tracklets[r];
      Track* track = nullptr;
      if (match.row_to_col[r] >= 0) {
        track = &tracks_[awaiting[static_cast<std::size_t>(match.row_to_col[r])]];
        track->state = TrackState::linked_active;
        add_sample(*track, emb);
      } else {
        Track fresh;
        fresh.id = tracks_.size() + 1;
        fresh.raw_sum = emb;
        fresh.sample_count = 1;
        tracks_.push_back(std::move(fresh));
        track = &tracks_.back();
      }
      track->member_tracklets.push_back(tid);
      owner_[tid] = track->id;
      out.emplace_back(tid, track->id);
    }
    return out;
  }

  // The owning track goes awaiting when its live member ends. Notifications
  // for superseded members are ignored.
  void on_tracklet_terminated(std::size_t tracklet_id) {
    Track& track = owning_track(tracklet_id);
    if (track.member_tracklets.back() != tracklet_id) return;
    track.state = TrackState::awaiting;
  }

  // Cadence re-extraction: folds a fresh embedding of a live tracklet into
  // its track's bank.
  void refresh(std::size_t tracklet_id, const Embedding& e) {
    check_unit(e, "refresh");
    add_sample(owning_track(tracklet_id), e);
  }

  std::size_t track_of(std::size_t tracklet_id) const {
    const auto it = owner_.find(tracklet_id);
    if (it == owner_.end()) throw std::logic_error("linker: unknown tracklet id");
    return it->second;
  }

  bool knows(std::size_t tracklet_id) const { return owner_.count(tracklet_id) != 0; }
  const std::vector<Track>& tracks() const { return tracks_; }
  const LinkConfig& config() const { return cfg_; }

 private:
  static void check_unit(const Embedding& e, const char* where) {
    const double n = norm(e);
    if (!(std::abs(n - 1.0) < 1e-6))
      throw std::invalid_argument(std::string("linker: ") + where +
                                  " expects unit-norm embeddings");
  }

  Track& owning_track(std::size_t tracklet_id) {
    const auto it = owner_.find(tracklet_id);
    if (it == owner_.end()) throw std::logic_error("linker: unknown tracklet id");
    return tracks_[it->second - 1];
  }

  static void add_sample(Track& track, const Embedding& e) {
    if (track.raw_sum.size() != e.size())
      throw std::invalid_argument("linker: embedding dimension mismatch");
    for (std::size_t i = 0; i < e.size(); ++i) track.raw_sum[i] += e[i];
    ++track.sample_count;
  }

  LinkConfig cfg_;
  std::vector<Track> tracks_;
  std::unordered_map<std::size_t, std::size_t> owner_;  // tracklet id -> track id
};

}  // namespace retrack
