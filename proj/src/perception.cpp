#include "gear/perception.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>
#include <tuple>

#include "gear/errors.hpp"

namespace gear {

const char* to_string(Viewpoint v) { return v == Viewpoint::User ? "USER" : "ROBOT"; }

Viewpoint viewpoint_from_string(const std::string& s) {
  if (s == "USER") return Viewpoint::User;
  if (s == "ROBOT") return Viewpoint::Robot;
  throw InputError("unknown viewpoint '" + s + "'");
}

bool BBox::is_valid() const {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
         std::isfinite(y_max) && x_min < x_max && y_min < y_max && confidence >= 0.0 &&
         confidence <= 1.0;
}

void DetectionFrame::validate() const {
  if (frame_width <= 0 || frame_height <= 0) {
    throw InputError("detection frame: non-positive frame size");
  }
  for (const auto& b : boxes) {
    if (!b.is_valid()) throw InputError("detection frame: invalid box '" + b.label + "'");
    if (b.x_min < 0.0 || b.y_min < 0.0 || b.x_max > frame_width || b.y_max > frame_height) {
      throw InputError("detection frame: box '" + b.label + "' outside frame");
    }
  }
}

Point2 bbox_center(const BBox& box) {
  return {(box.x_min + box.x_max) / 2.0, (box.y_min + box.y_max) / 2.0};
}

bool gaze_match(const MeanGaze& gaze, const BBox& box) {
  return box.x_min <= gaze.x_mean && gaze.x_mean <= box.x_max && box.y_min <= gaze.y_mean &&
         gaze.y_mean <= box.y_max;
}

namespace {

// Squared distance: same ordering as Euclidean, and exact ties stay exact.
double distance_sq(Point2 a, Point2 b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

}  // namespace

std::optional<BBox> resolve_target(const MeanGaze& gaze, const DetectionFrame& frame) {
  if (frame.source != Viewpoint::User) {
    throw std::invalid_argument("resolve_target needs a USER frame");
  }
  const Point2 g{gaze.x_mean, gaze.y_mean};
  const BBox* best = nullptr;
  auto key = [&](const BBox& b) {
    return std::make_tuple(b.area(), distance_sq(g, bbox_center(b)), std::cref(b.label));
  };
  for (const auto& b : frame.boxes) {
    if (!gaze_match(gaze, b)) continue;
    if (best == nullptr || key(b) < key(*best)) best = &b;
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

std::optional<BBox> align_object(const DetectionFrame& frame, const std::string& label,
                                 double min_confidence) {
  if (frame.source != Viewpoint::Robot) {
    throw std::invalid_argument("align_object needs a ROBOT frame");
  }
  const Point2 center{frame.frame_width / 2.0, frame.frame_height / 2.0};
  const BBox* best = nullptr;
  for (const auto& b : frame.boxes) {
    if (b.label != label || b.confidence < min_confidence) continue;
    if (best == nullptr || b.confidence > best->confidence ||
        (b.confidence == best->confidence &&
         distance_sq(bbox_center(b), center) < distance_sq(bbox_center(*best), center))) {
      best = &b;
    }
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

}  // namespace gear
