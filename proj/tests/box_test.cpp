#include "retrack/box.hpp"

#include <doctest.h>

#include <cstddef>
#include <vector>

#include "support/oracles.hpp"

using retrack::Box;

TEST_CASE("box accessors derive from corner and size") {
  const Box b(10.0, 20.0, 30.0, 40.0);
  CHECK(b.right() == doctest::Approx(40.0));
  CHECK(b.bottom() == doctest::Approx(60.0));
  CHECK(b.cx() == doctest::Approx(25.0));
  CHECK(b.cy() == doctest::Approx(40.0));
  CHECK(retrack::area(b) == doctest::Approx(1200.0));
}

TEST_CASE("box constructor rejects bad dimensions") {
  CHECK_THROWS_AS(Box(0, 0, 0, 10), std::invalid_argument);
  CHECK_THROWS_AS(Box(0, 0, 10, -1), std::invalid_argument);
  CHECK_THROWS_AS(Box(std::numeric_limits<double>::quiet_NaN(), 0, 1, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(Box(0, std::numeric_limits<double>::infinity(), 1, 1),
                  std::invalid_argument);
}

TEST_CASE("iou on hand-computed overlaps") {
  const Box a(0, 0, 10, 10);
  CHECK(retrack::iou(a, a) == doctest::Approx(1.0));
  // Intersection 50, union 150.
  CHECK(retrack::iou(a, Box(5, 0, 10, 10)) == doctest::Approx(1.0 / 3.0));
  // Quarter overlap: intersection 25, union 175.
  CHECK(retrack::iou(a, Box(5, 5, 10, 10)) == doctest::Approx(25.0 / 175.0));
  CHECK(retrack::iou(a, Box(20, 20, 10, 10)) == doctest::Approx(0.0));
  // Edge contact has zero intersection area.
  CHECK(retrack::iou(a, Box(10, 0, 10, 10)) == doctest::Approx(0.0));
}

TEST_CASE("iou is symmetric and bounded") {
  testsupport::TestRng rng(11);
  for (int i = 0; i < 200; ++i) {
    const Box a = rng.box(100, 100, 1, 40);
    const Box b = rng.box(100, 100, 1, 40);
    const double ab = retrack::iou(a, b);
    CHECK(ab == retrack::iou(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0 + 1e-12);
  }
}

TEST_CASE("shift translates without resizing") {
  const Box b = retrack::shift(Box(1, 2, 3, 4), 10, -1);
  CHECK(b.x == doctest::Approx(11.0));
  CHECK(b.y == doctest::Approx(1.0));
  CHECK(b.w == doctest::Approx(3.0));
  CHECK(b.h == doctest::Approx(4.0));
}

TEST_CASE("nms suppresses the lower-scored overlapping box") {
  // IoU = 90 / 110 > 0.5.
  const std::vector<Box> boxes = {Box(0, 0, 10, 10), Box(1, 0, 10, 10)};
  const auto result = retrack::nms(boxes, {0.9, 0.8}, 0.5);
  REQUIRE(result.kept == std::vector<std::size_t>{0});
  CHECK(result.suppressed_by[0] == -1);
  CHECK(result.suppressed_by[1] == 0);
}

TEST_CASE("nms keeps disjoint boxes in score order") {
  const std::vector<Box> boxes = {Box(0, 0, 10, 10), Box(50, 50, 10, 10), Box(100, 0, 10, 10)};
  const auto result = retrack::nms(boxes, {0.2, 0.9, 0.5}, 0.5);
  CHECK(result.kept == std::vector<std::size_t>{1, 2, 0});
}

TEST_CASE("nms threshold 1.0 keeps everything") {
  const std::vector<Box> boxes = {Box(0, 0, 10, 10), Box(0, 0, 10, 10)};
  const auto result = retrack::nms(boxes, {0.5, 0.5}, 1.0);
  CHECK(result.kept.size() == 2);
}

TEST_CASE("nms equal scores break toward the lower index") {
  const std::vector<Box> boxes = {Box(0, 0, 10, 10), Box(0, 0, 10, 10)};
  const auto result = retrack::nms(boxes, {0.5, 0.5}, 0.5);
  REQUIRE(result.kept == std::vector<std::size_t>{0});
  CHECK(result.suppressed_by[1] == 0);
}

TEST_CASE("nms validates its inputs") {
  CHECK_THROWS_AS(retrack::nms({Box(0, 0, 1, 1)}, {0.5, 0.5}, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(retrack::nms({Box(0, 0, 1, 1)}, {0.5}, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(retrack::nms({Box(0, 0, 1, 1)}, {0.5}, -0.1), std::invalid_argument);
}

TEST_CASE("nms kept set is mutually compatible and suppression is justified") {
  testsupport::TestRng rng(23);
  for (int round = 0; round < 50; ++round) {
    std::vector<Box> boxes;
    std::vector<double> scores;
    const int n = static_cast<int>(rng.uniform_int(1, 12));
    for (int i = 0; i < n; ++i) {
      boxes.push_back(rng.box(64, 64, 4, 30));
      scores.push_back(rng.uniform());
    }
    const double threshold = rng.uniform(0.1, 0.9);
    const auto result = retrack::nms(boxes, scores, threshold);

    for (std::size_t i = 0; i < result.kept.size(); ++i)
      for (std::size_t j = i + 1; j < result.kept.size(); ++j)
        CHECK(retrack::iou(boxes[result.kept[i]], boxes[result.kept[j]]) <= threshold);

    std::size_t suppressed = 0;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (result.suppressed_by[i] < 0) continue;
      ++suppressed;
      const auto k = static_cast<std::size_t>(result.suppressed_by[i]);
      CHECK(retrack::iou(boxes[i], boxes[k]) > threshold);
      CHECK(scores[k] >= scores[i]);
    }
    CHECK(result.kept.size() + suppressed == boxes.size());
  }
}
