#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gear/gaze.hpp"

namespace gear {

enum class Viewpoint { User, Robot };

const char* to_string(Viewpoint v);
Viewpoint viewpoint_from_string(const std::string& s);

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point2&) const = default;
};

/// Labeled axis-aligned detection box in pixels.
struct BBox {
  std::string label;
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  double confidence = 1.0;

  bool is_valid() const;
  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }

  bool operator==(const BBox&) const = default;
};

struct DetectionFrame {
  Viewpoint source = Viewpoint::User;
  std::int64_t timestamp_us = 0;
  std::vector<BBox> boxes;
  int frame_width = 0;
  int frame_height = 0;

  /// Throws InputError naming the first invalid or out-of-frame box.
  void validate() const;

  bool operator==(const DetectionFrame&) const = default;
};

Point2 bbox_center(const BBox& box);

/// Inclusive four-inequality hit test of the mean gaze against a box.
bool gaze_match(const MeanGaze& gaze, const BBox& box);

/// Picks the most specific box under the gaze: smallest area, then nearest
/// center, then lexicographically smallest label. Requires a USER frame.
std::optional<BBox> resolve_target(const MeanGaze& gaze, const DetectionFrame& frame);

/// Robot-side confirmation that `label` is in view. Instances below
/// `min_confidence` are ignored; ties go to highest confidence, then to the
/// box nearest the frame center. Requires a ROBOT frame.
std::optional<BBox> align_object(const DetectionFrame& frame, const std::string& label,
                                 double min_confidence = 0.0);

}  // namespace gear
