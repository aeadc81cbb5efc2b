#include "retrack/linker.hpp"

#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "retrack/embedding.hpp"

using namespace retrack;

namespace {

constexpr std::size_t kDim = 6;

Embedding basis(std::size_t axis) {
  Embedding e(kDim, 0.0);
  e[axis] = 1.0;
  return e;
}

// Unit vector close to basis(axis): distance ~eps to it, ~sqrt(2) to the
// other axes.
Embedding near_basis(std::size_t axis, double eps, std::size_t off_axis = kDim - 1) {
  Embedding e(kDim, 0.0);
  e[axis] = 1.0;
  e[off_axis] = eps;
  return normalized(e);
}

using Pairs = std::vector<std::pair<std::size_t, std::size_t>>;

}  // namespace

TEST_CASE("the first tracklet founds track 1 with its embedding as the bank") {
  TrackletLinker linker{LinkConfig{}};
  const Pairs out = linker.observe({{1, basis(0)}});
  REQUIRE(out.size() == 1);
  CHECK(out[0] == std::pair<std::size_t, std::size_t>{1, 1});
  REQUIRE(linker.tracks().size() == 1);
  CHECK(linker.tracks()[0].state == TrackState::linked_active);
  CHECK(linker.tracks()[0].sample_count == 1);
  CHECK(linker.tracks()[0].bank() == basis(0));
  CHECK(linker.track_of(1) == 1);
  CHECK(linker.knows(1));
  CHECK(!linker.knows(2));
}

TEST_CASE("a terminated track resumes through a nearby newborn") {
  TrackletLinker linker{LinkConfig{}};
  (void)linker.observe({{1, basis(0)}});
  linker.on_tracklet_terminated(1);
  CHECK(linker.tracks()[0].state == TrackState::awaiting);

  const Pairs out = linker.observe({{2, near_basis(0, 0.05)}});
  CHECK(out[0].second == 1);
  CHECK(linker.tracks().size() == 1);
  CHECK(linker.tracks()[0].state == TrackState::linked_active);
  CHECK(linker.tracks()[0].member_tracklets == std::vector<std::size_t>{1, 2});
  CHECK(linker.tracks()[0].sample_count == 2);
}

TEST_CASE("newborns beyond the distance gate found new tracks") {
  TrackletLinker linker{LinkConfig{}};
  (void)linker.observe({{1, basis(0)}});
  linker.on_tracklet_terminated(1);

  // Orthogonal unit vectors sit sqrt(2) apart, past the 0.97 gate.
  const Pairs out = linker.observe({{2, basis(1)}});
  CHECK(out[0].second == 2);
  CHECK(linker.tracks().size() == 2);
  CHECK(linker.tracks()[0].state == TrackState::awaiting);
}

TEST_CASE("a live track cannot be resumed") {
  TrackletLinker linker{LinkConfig{}};
  (void)linker.observe({{1, basis(0)}});
  // Track 1 is linked-active, so even an identical embedding founds a track.
  const Pairs out = linker.observe({{2, basis(0)}});
  CHECK(out[0].second == 2);
}

TEST_CASE("batch resume assigns crossed newborns to their nearest banks") {
  TrackletLinker linker{LinkConfig{}};
  (void)linker.observe({{1, basis(0)}, {2, basis(1)}});
  linker.on_tracklet_terminated(1);
  linker.on_tracklet_terminated(2);

  // Input order reversed relative to track order; distances force the cross.
  const Pairs out = linker.observe({{7, near_basis(1, 0.05)}, {8, near_basis(0, 0.05)}});
  CHECK(out[0] == std::pair<std::size_t, std::size_t>{7, 2});
  CHECK(out[1] == std::pair<std::size_t, std::size_t>{8, 1});
  CHECK(linker.tracks().size() == 2);
}

TEST_CASE("when two newborns compete for one track the closer embedding wins") {
  TrackletLinker linker{LinkConfig{}};
  (void)linker.observe({{1, basis(0)}});
  linker.on_tracklet_terminated(1);

  const Pairs out = linker.observe({{5, near_basis(0, 0.5)}, {6, near_basis(0, 0.05)}});
  CHECK(out[0] == std::pair<std::size_t, std::size_t>{5, 2});  // farther: new track
  CHECK(out[1] == std::pair<std::size_t, std::size_t>{6, 1});  // closer: resumes
}

TEST_CASE("the bank is the renormalized running mean of observed embeddings") {
  TrackletLinker linker{LinkConfig{}};
  (void)linker.observe({{1, basis(0)}});
  linker.refresh(1, basis(1));

  const Embedding bank = linker.tracks()[0].bank();
  CHECK(linker.tracks()[0].sample_count == 2);
  CHECK(bank[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(bank[1] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(bank[2] == 0.0);

  // Repeated identical samples keep the bank exactly on the axis.
  linker.refresh(1, basis(0));
  linker.refresh(1, basis(0));
  CHECK(linker.tracks()[0].sample_count == 4);
  CHECK(norm(linker.tracks()[0].bank()) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("banks built from one repeated axis stay bitwise exact") {
  TrackletLinker linker{LinkConfig{}};
  (void)linker.observe({{1, basis(2)}});
  linker.refresh(1, basis(2));
  linker.refresh(1, basis(2));
  CHECK(linker.tracks()[0].bank() == basis(2));
}

TEST_CASE("a track follows a chain of resumed tracklets") {
  TrackletLinker linker{LinkConfig{}};
  (void)linker.observe({{1, basis(0)}});
  linker.on_tracklet_terminated(1);
  (void)linker.observe({{2, near_basis(0, 0.02)}});
  linker.on_tracklet_terminated(2);
  (void)linker.observe({{3, near_basis(0, 0.04, 2)}});

  REQUIRE(linker.tracks().size() == 1);
  CHECK(linker.tracks()[0].member_tracklets == std::vector<std::size_t>{1, 2, 3});
  CHECK(linker.track_of(1) == 1);
  CHECK(linker.track_of(2) == 1);
  CHECK(linker.track_of(3) == 1);
  CHECK(linker.tracks()[0].sample_count == 3);
}

TEST_CASE("termination notices for superseded members are ignored") {
  TrackletLinker linker{LinkConfig{}};
  (void)linker.observe({{1, basis(0)}});
  linker.on_tracklet_terminated(1);
  (void)linker.observe({{2, near_basis(0, 0.02)}});

  linker.on_tracklet_terminated(1);  // stale: tracklet 2 is now the live member
  CHECK(linker.tracks()[0].state == TrackState::linked_active);

  const Pairs out = linker.observe({{3, near_basis(0, 0.03)}});
  CHECK(out[0].second == 2);  // track 1 was not awaiting

  linker.on_tracklet_terminated(2);
  CHECK(linker.tracks()[0].state == TrackState::awaiting);
}

TEST_CASE("malformed observe and refresh calls are rejected") {
  TrackletLinker linker{LinkConfig{}};
  Embedding half(kDim, 0.0);
  half[0] = 0.5;
  CHECK_THROWS_WITH_AS(linker.observe({{1, half}}), "linker: observe expects unit-norm embeddings",
                       std::invalid_argument);

  (void)linker.observe({{1, basis(0)}});
  CHECK_THROWS_WITH_AS(linker.observe({{1, basis(1)}}),
                       "linker: tracklet already belongs to a track", std::logic_error);
  CHECK_THROWS_WITH_AS(linker.observe({{4, basis(1)}, {4, basis(2)}}),
                       "linker: duplicate tracklet id in one observe call", std::logic_error);

  CHECK_THROWS_WITH_AS(linker.refresh(9, basis(0)), "linker: unknown tracklet id",
                       std::logic_error);
  CHECK_THROWS_WITH_AS(linker.refresh(1, half), "linker: refresh expects unit-norm embeddings",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(linker.on_tracklet_terminated(9), "linker: unknown tracklet id",
                       std::logic_error);
  CHECK_THROWS_WITH_AS(linker.track_of(9), "linker: unknown tracklet id", std::logic_error);
}

TEST_CASE("linker configuration is validated") {
  LinkConfig bad;
  bad.distance_threshold = 0.0;
  CHECK_THROWS_WITH_AS(TrackletLinker{bad}, "linker: distance_threshold must be > 0",
                       std::invalid_argument);
  bad = LinkConfig{};
  bad.embedding_cadence = 0;
  CHECK_THROWS_WITH_AS(TrackletLinker{bad}, "linker: embedding_cadence must be >= 1",
                       std::invalid_argument);
}
