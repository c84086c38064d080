#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gear/annotation.hpp"
#include "gear/assembly.hpp"
#include "gear/gaze.hpp"
#include "gear/perception.hpp"
#include "gear/rng.hpp"
#include "gear/robot_events.hpp"

namespace gear {

enum class Zone { UserStation, RobotWorkspace, Shared };

const char* to_string(Zone z);
Zone zone_from_string(const std::string& s);

/// Axis-aligned rectangle in workspace meters.
struct Rect {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  bool contains(const Rect& r) const;
  /// Interiors intersect; touching edges do not count.
  bool overlaps(const Rect& r) const;

  bool operator==(const Rect&) const = default;
};

struct WorkspaceLayout {
  Rect user_station{1.0, 0.5, 1.6, 0.9};
  Rect robot_workspace{0.0, 0.0, 1.0, 0.6};
  Rect shared{1.05, 0.05, 1.55, 0.45};

  const Rect& bounds(Zone z) const;

  bool operator==(const WorkspaceLayout&) const = default;
};

struct ScenePart {
  std::string label;
  Point2 pose;       // footprint center, meters
  Point2 footprint;  // (w, h), meters
  Zone zone = Zone::RobotWorkspace;
  bool assembled = false;   // built into the product, no longer a loose part
  bool in_transit = false;  // held by the robot between pickup and delivery

  Rect rect() const;

  bool operator==(const ScenePart&) const = default;
};

struct Scene {
  std::vector<ScenePart> parts;
  WorkspaceLayout layout;

  const ScenePart* find(const std::string& label) const;
  ScenePart* find(const std::string& label);

  bool operator==(const Scene&) const = default;
};

struct SceneConfig {
  WorkspaceLayout layout;
  Point2 default_footprint{0.08, 0.08};
  std::map<std::string, Point2> footprints;
  /// Fixed poses for user-station parts; parts without one are laid out on a
  /// row-major grid inside the user station.
  std::map<std::string, Point2> user_station_poses;
  int max_attempts = 10000;

  Point2 footprint_for(const std::string& label) const;
};

/// Places robot-sourced parts uniformly at random (rejection sampling) inside
/// the robot workspace. Throws CapacityError when a part cannot be placed
/// within `max_attempts` draws.
Scene randomize_scene(const AssemblyPlan& plan, const SceneConfig& config, std::uint64_t seed);

/// Top-down orthographic camera: pixel = (meters - origin) * px_per_m.
struct Camera {
  int width_px = 1920;
  int height_px = 1080;
  double px_per_m = 1200.0;
  Point2 origin_m{0.0, 0.0};

  Point2 to_pixels(Point2 m) const;
  BBox project(const std::string& label, const Rect& r) const;

  bool operator==(const Camera&) const = default;
};

struct CameraRig {
  Camera user{1920, 1080, 1200.0, {0.0, 0.0}};
  Camera robot{1280, 720, 800.0, {0.0, 0.0}};

  const Camera& camera(Viewpoint v) const { return v == Viewpoint::User ? user : robot; }
};

/// The user looks across the whole bench; the robot camera covers its own
/// workspace and the shared zone.
bool visible_from(Zone zone, Viewpoint viewpoint);

struct NoiseModel {
  double jitter_px = 0.0;
  double dropout_p = 0.0;

  bool operator==(const NoiseModel&) const = default;
};

/// One box per visible loose part. Corners get independent Gaussian jitter
/// and are clamped to the frame; each box is dropped with `dropout_p`.
/// Confidence is 1 - dropout_p.
DetectionFrame render_detections(const Scene& scene, Viewpoint viewpoint, const Camera& camera,
                                 const NoiseModel& noise, Rng& rng, std::int64_t timestamp_us);

struct RobotModel {
  double speed_mps = 0.5;
  double grasp_s = 2.0;
  double place_s = 2.0;
  Point2 home_pose{0.5, 0.75};

  void validate() const;

  bool operator==(const RobotModel&) const = default;
};

struct SimClock {
  std::int64_t tick_us = 10'000;
  std::int64_t now_us = 0;

  /// Throws std::invalid_argument unless dt_us is a non-negative multiple of tick_us.
  void step(std::int64_t dt_us);
};

/// Timetable of one fetch cycle, all instants in microseconds.
struct FetchPlan {
  std::string label;
  std::int64_t start_us = 0;
  Point2 part_pose;
  Point2 drop_pose;
  std::int64_t picked_up_us = 0;
  std::int64_t delivered_us = 0;
  std::int64_t returned_us = 0;
};

/// Home -> part, grasp, part -> drop, place (Delivered), drop -> home (Returned).
FetchPlan plan_fetch(const RobotModel& robot, const std::string& label, Point2 part_pose,
                     Point2 drop_pose, std::int64_t start_us);

struct SimConfig {
  SceneConfig scene;
  CameraRig cameras;
  NoiseModel noise;
  RobotModel robot;
  std::int64_t tick_us = 10'000;
};

/// Deterministic discrete-time world: scene, robot fetch cycles, detections.
class Simulator {
 public:
  Simulator(const AssemblyPlan& plan, SimConfig config, std::uint64_t seed);

  const Scene& scene() const { return scene_; }
  const SimConfig& config() const { return config_; }
  std::int64_t now_us() const { return clock_.now_us; }
  bool robot_busy() const { return fetch_.has_value(); }
  const std::optional<FetchPlan>& active_fetch() const { return fetch_; }

  /// Starts a fetch at the current time. A part that is not a loose part in
  /// the robot workspace, or a busy robot, yields a Fault on the next step.
  void command_fetch(const std::string& label);

  /// Advances the clock tick by tick; events are stamped with the first tick
  /// at or after their instant.
  std::vector<RobotEvent> step(std::int64_t dt_us);

  Point2 robot_position() const;

  DetectionFrame render(Viewpoint viewpoint);

  /// The user built the part into the product.
  void mark_assembled(const std::string& label);

 private:
  Point2 free_drop_slot() const;

  SimConfig config_;
  Scene scene_;
  SimClock clock_;
  Rng noise_rng_;
  std::optional<FetchPlan> fetch_;
  int fetch_stage_ = 0;
  std::vector<RobotEvent> pending_faults_;
};

/// One scripted segment of user behaviour.
struct ScriptEntry {
  enum class Kind { Fixate, LookAt, LookAway, Touch };
  Kind kind = Kind::Fixate;
  std::string label;  // Fixate and Touch
  Point2 point;       // LookAt, pixels
  std::int64_t duration_ms = 0;
};

struct GazeScript {
  std::vector<ScriptEntry> entries;
};

GazeScript parse_script(const nlohmann::json& document);
GazeScript load_script_file(const std::string& path);
nlohmann::json script_to_json(const GazeScript& script);

struct ScriptTouch {
  std::int64_t timestamp_us = 0;
  std::string label;
};

/// Gaze samples for the script: round(duration * rate) samples per gaze
/// entry at the target's projected box center plus isotropic noise. Touch
/// entries produce no samples but take up their duration. LookAway emits
/// invalid samples. Throws ScriptError for targets the user cannot see.
std::vector<GazeSample> scripted_gaze(const Scene& scene, const Camera& user_camera,
                                      const GazeScript& script, double sigma_px,
                                      double sample_rate_hz, std::uint64_t seed,
                                      std::int64_t start_us = 0);

std::vector<ScriptTouch> scripted_touches(const GazeScript& script, double sample_rate_hz,
                                          std::int64_t start_us = 0);
std::vector<IntendedLabel> script_annotations(const GazeScript& script, double sample_rate_hz,
                                              std::int64_t start_us = 0);
std::int64_t script_duration_us(const GazeScript& script, double sample_rate_hz);

}  // namespace gear
