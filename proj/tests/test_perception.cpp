#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"

#include "gear/errors.hpp"
#include "gear/perception.hpp"
#include "oracles.hpp"

using namespace gear;

namespace {

MeanGaze gaze(double x, double y) { return {x, y, 15, 700'000, 0}; }

DetectionFrame user_frame(std::vector<BBox> boxes) {
  return {Viewpoint::User, 0, std::move(boxes), 1920, 1080};
}

}  // namespace

TEST_CASE("gaze_match: interior, inclusive boundary, just outside") {
  const BBox box{"p", 40, 40, 60, 60, 1.0};
  CHECK(gaze_match(gaze(50, 50), box));
  CHECK(gaze_match(gaze(40, 50), box));
  CHECK(gaze_match(gaze(60, 60), box));
  CHECK(gaze_match(gaze(40, 40), box));
  CHECK_FALSE(gaze_match(gaze(39.99, 50), box));
  CHECK_FALSE(gaze_match(gaze(50, 60.01), box));
}

TEST_CASE("bbox_center") {
  CHECK(bbox_center({"a", 40, 40, 60, 60, 1}) == Point2{50, 50});
  CHECK(bbox_center({"a", 0, 0, 80, 60, 1}) == Point2{40, 30});
  CHECK(bbox_center({"a", 10, 20, 10.5, 20.5, 1}) == Point2{10.25, 20.25});
}

TEST_CASE("bbox validity") {
  CHECK(BBox{"a", 0, 0, 1, 1, 0.5}.is_valid());
  CHECK_FALSE(BBox{"a", 1, 0, 1, 1, 0.5}.is_valid());
  CHECK_FALSE(BBox{"a", 0, 2, 1, 1, 0.5}.is_valid());
  CHECK_FALSE(BBox{"a", 0, 0, 1, 1, 1.5}.is_valid());
  CHECK_FALSE(BBox{"a", 0, 0, 1, 1, -0.1}.is_valid());
}

TEST_CASE("frame validation rejects out-of-frame boxes") {
  DetectionFrame f = user_frame({{"a", 0, 0, 1920, 1080, 1}});
  CHECK_NOTHROW(f.validate());
  f.boxes.push_back({"b", 1900, 0, 1921, 10, 1});
  CHECK_THROWS_AS(f.validate(), InputError);
  f.boxes = {{"c", 5, 5, 4, 10, 1}};
  CHECK_THROWS_AS(f.validate(), InputError);
}

TEST_CASE("resolve_target: single, nested, none") {
  CHECK(resolve_target(gaze(50, 50), user_frame({{"a", 0, 0, 100, 100, 1}}))->label == "a");
  const auto nested =
      user_frame({{"A", 0, 0, 100, 100, 1}, {"B", 45, 45, 55, 55, 1}});
  CHECK(resolve_target(gaze(50, 50), nested)->label == "B");
  CHECK_FALSE(resolve_target(gaze(500, 500), nested));
}

TEST_CASE("resolve_target: equal areas fall back to center distance, then label") {
  const auto f = user_frame({{"far", 0, 0, 20, 20, 1}, {"near", 8, 8, 28, 28, 1}});
  CHECK(resolve_target(gaze(17, 17), f)->label == "near");
  const auto same = user_frame({{"zeta", 0, 0, 20, 20, 1}, {"alpha", 0, 0, 20, 20, 1}});
  CHECK(resolve_target(gaze(10, 10), same)->label == "alpha");
}

TEST_CASE("resolve_target requires a USER frame") {
  DetectionFrame f = user_frame({{"a", 0, 0, 10, 10, 1}});
  f.source = Viewpoint::Robot;
  CHECK_THROWS_AS(resolve_target(gaze(5, 5), f), std::invalid_argument);
}

TEST_CASE("align_object: single, absent, highest confidence wins") {
  DetectionFrame f{Viewpoint::Robot, 0, {{"peg_grey", 10, 10, 50, 50, 0.8}}, 1280, 720};
  CHECK(align_object(f, "peg_grey")->label == "peg_grey");
  CHECK_FALSE(align_object(f, "gear_small"));
  f.boxes = {{"gear_small", 0, 0, 10, 10, 0.7}, {"gear_small", 600, 300, 700, 400, 0.9}};
  CHECK(align_object(f, "gear_small")->confidence == 0.9);
  f.boxes = {{"gear_small", 0, 0, 10, 10, 0.9}, {"gear_small", 600, 330, 680, 390, 0.9}};
  CHECK(align_object(f, "gear_small")->x_min == 600);
  CHECK_FALSE(align_object(f, "gear_small", 0.95));
}

TEST_CASE("align_object requires a ROBOT frame") {
  CHECK_THROWS_AS(align_object(user_frame({}), "x"), std::invalid_argument);
}

TEST_CASE("property: gaze_match agrees with the four-inequality predicate") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 10'000; ++i) {
    const auto [g, b] = oracle::random_gaze_box(rng);
    REQUIRE(gaze_match(g, b) == oracle::in_box(g.x_mean, g.y_mean, b));
  }
}

TEST_CASE("property: resolve_target equals brute-force tie-break enumeration") {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 1000; ++i) {
    const auto frame = oracle::random_cluttered_frame(rng);
    const auto g = oracle::random_gaze_near(rng, frame);
    const auto got = resolve_target(g, frame);
    const auto want = oracle::brute_force_target(g, frame);
    REQUIRE(got.has_value() == want.has_value());
    if (got) {
      CHECK(*got == *want);
      CHECK(gaze_match(g, *got));
    }
  }
}

TEST_CASE("property: translation leaves matching and resolution unchanged") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> offset(-300.0, 300.0);
  for (int i = 0; i < 500; ++i) {
    auto frame = oracle::random_cluttered_frame(rng);
    const auto g = oracle::random_gaze_near(rng, frame);
    // Whole-pixel shifts keep every comparison exact.
    const double dx = std::round(offset(rng));
    const double dy = std::round(offset(rng));
    DetectionFrame moved = frame;
    moved.frame_width = 10'000;
    moved.frame_height = 10'000;
    for (auto& b : moved.boxes) {
      b.x_min += dx;
      b.x_max += dx;
      b.y_min += dy;
      b.y_max += dy;
    }
    MeanGaze mg = g;
    mg.x_mean += dx;
    mg.y_mean += dy;
    for (std::size_t k = 0; k < frame.boxes.size(); ++k) {
      CHECK(gaze_match(g, frame.boxes[k]) == gaze_match(mg, moved.boxes[k]));
    }
    const auto a = resolve_target(g, frame);
    const auto b = resolve_target(mg, moved);
    REQUIRE(a.has_value() == b.has_value());
    if (a) CHECK(a->label == b->label);
  }
}

TEST_CASE("property: align_object never returns another label") {
  std::mt19937_64 rng(14);
  for (int i = 0; i < 500; ++i) {
    auto frame = oracle::random_cluttered_frame(rng);
    frame.source = Viewpoint::Robot;
    for (const char* label : {"a", "b", "c", "zz"}) {
      const auto got = align_object(frame, label);
      if (got) CHECK(got->label == label);
      const auto want = oracle::brute_force_align(frame, label);
      REQUIRE(got.has_value() == want.has_value());
      if (got) CHECK(*got == *want);
    }
  }
}
