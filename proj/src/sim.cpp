#include "gear/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "gear/errors.hpp"

namespace gear {

const char* to_string(Zone z) {
  switch (z) {
    case Zone::UserStation: return "USER_STATION";
    case Zone::RobotWorkspace: return "ROBOT_WORKSPACE";
    case Zone::Shared: return "SHARED";
  }
  return "?";
}

Zone zone_from_string(const std::string& s) {
  if (s == "USER_STATION") return Zone::UserStation;
  if (s == "ROBOT_WORKSPACE") return Zone::RobotWorkspace;
  if (s == "SHARED") return Zone::Shared;
  throw InputError("unknown zone '" + s + "'");
}

bool Rect::contains(const Rect& r) const {
  return r.x_min >= x_min && r.y_min >= y_min && r.x_max <= x_max && r.y_max <= y_max;
}

bool Rect::overlaps(const Rect& r) const {
  return r.x_min < x_max && x_min < r.x_max && r.y_min < y_max && y_min < r.y_max;
}

const Rect& WorkspaceLayout::bounds(Zone z) const {
  switch (z) {
    case Zone::UserStation: return user_station;
    case Zone::RobotWorkspace: return robot_workspace;
    case Zone::Shared: return shared;
  }
  throw std::logic_error("bad zone");
}

Rect ScenePart::rect() const {
  return {pose.x - footprint.x / 2.0, pose.y - footprint.y / 2.0, pose.x + footprint.x / 2.0,
          pose.y + footprint.y / 2.0};
}

const ScenePart* Scene::find(const std::string& label) const {
  const auto it = std::find_if(parts.begin(), parts.end(),
                               [&](const ScenePart& p) { return p.label == label; });
  return it == parts.end() ? nullptr : &*it;
}

ScenePart* Scene::find(const std::string& label) {
  return const_cast<ScenePart*>(std::as_const(*this).find(label));
}

Point2 SceneConfig::footprint_for(const std::string& label) const {
  const auto it = footprints.find(label);
  return it == footprints.end() ? default_footprint : it->second;
}

namespace {

constexpr double kGridGap = 0.02;

bool overlaps_any(const Rect& r, const std::vector<ScenePart>& parts) {
  return std::any_of(parts.begin(), parts.end(), [&](const ScenePart& p) {
    return !p.assembled && !p.in_transit && p.rect().overlaps(r);
  });
}

}  // namespace

Scene randomize_scene(const AssemblyPlan& plan, const SceneConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  Scene scene;
  scene.layout = config.layout;

  const Rect& station = config.layout.user_station;
  double cursor_x = station.x_min + kGridGap;
  double cursor_y = station.y_min + kGridGap;
  double row_height = 0.0;

  for (const auto& step : plan.steps()) {
    ScenePart part;
    part.label = step.part_label;
    part.footprint = config.footprint_for(step.part_label);
    if (!(part.footprint.x > 0.0 && part.footprint.y > 0.0)) {
      throw InputError("scene: non-positive footprint for '" + part.label + "'");
    }

    if (step.source == PartSource::UserStation) {
      part.zone = Zone::UserStation;
      if (auto it = config.user_station_poses.find(part.label);
          it != config.user_station_poses.end()) {
        part.pose = it->second;
      } else {
        if (cursor_x + part.footprint.x > station.x_max) {
          cursor_x = station.x_min + kGridGap;
          cursor_y += row_height + kGridGap;
          row_height = 0.0;
        }
        part.pose = {cursor_x + part.footprint.x / 2.0, cursor_y + part.footprint.y / 2.0};
        cursor_x += part.footprint.x + kGridGap;
        row_height = std::max(row_height, part.footprint.y);
      }
      if (!station.contains(part.rect()) || overlaps_any(part.rect(), scene.parts)) {
        throw CapacityError("scene: cannot place user-station part '" + part.label + "'");
      }
    } else {
      part.zone = Zone::RobotWorkspace;
      const Rect& ws = config.layout.robot_workspace;
      const double lo_x = ws.x_min + part.footprint.x / 2.0;
      const double hi_x = ws.x_max - part.footprint.x / 2.0;
      const double lo_y = ws.y_min + part.footprint.y / 2.0;
      const double hi_y = ws.y_max - part.footprint.y / 2.0;
      if (lo_x > hi_x || lo_y > hi_y) {
        throw CapacityError("scene: part '" + part.label + "' larger than robot workspace");
      }
      bool placed = false;
      for (int attempt = 0; attempt < config.max_attempts && !placed; ++attempt) {
        part.pose = {rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y)};
        placed = !overlaps_any(part.rect(), scene.parts);
      }
      if (!placed) {
        throw CapacityError("scene: no free spot for '" + part.label + "' after " +
                            std::to_string(config.max_attempts) + " attempts");
      }
    }
    scene.parts.push_back(std::move(part));
  }
  return scene;
}

Point2 Camera::to_pixels(Point2 m) const {
  return {(m.x - origin_m.x) * px_per_m, (m.y - origin_m.y) * px_per_m};
}

BBox Camera::project(const std::string& label, const Rect& r) const {
  const Point2 lo = to_pixels({r.x_min, r.y_min});
  const Point2 hi = to_pixels({r.x_max, r.y_max});
  return {label, lo.x, lo.y, hi.x, hi.y, 1.0};
}

bool visible_from(Zone zone, Viewpoint viewpoint) {
  if (viewpoint == Viewpoint::User) return true;
  return zone == Zone::RobotWorkspace || zone == Zone::Shared;
}

DetectionFrame render_detections(const Scene& scene, Viewpoint viewpoint, const Camera& camera,
                                 const NoiseModel& noise, Rng& rng, std::int64_t timestamp_us) {
  DetectionFrame frame;
  frame.source = viewpoint;
  frame.timestamp_us = timestamp_us;
  frame.frame_width = camera.width_px;
  frame.frame_height = camera.height_px;
  const double w = camera.width_px;
  const double h = camera.height_px;
  const double confidence = std::clamp(1.0 - noise.dropout_p, 0.0, 1.0);

  for (const auto& part : scene.parts) {
    if (part.assembled || part.in_transit || !visible_from(part.zone, viewpoint)) continue;
    // Fixed draw order per part keeps the stream aligned whatever the outcome.
    const bool dropped = rng.bernoulli(noise.dropout_p);
    const double jx0 = rng.normal(), jy0 = rng.normal(), jx1 = rng.normal(), jy1 = rng.normal();
    if (dropped) continue;

    BBox box = camera.project(part.label, part.rect());
    box.x_min = std::clamp(box.x_min + noise.jitter_px * jx0, 0.0, w);
    box.y_min = std::clamp(box.y_min + noise.jitter_px * jy0, 0.0, h);
    box.x_max = std::clamp(box.x_max + noise.jitter_px * jx1, 0.0, w);
    box.y_max = std::clamp(box.y_max + noise.jitter_px * jy1, 0.0, h);
    if (box.x_max <= box.x_min || box.y_max <= box.y_min) continue;
    box.confidence = confidence;
    frame.boxes.push_back(std::move(box));
  }
  return frame;
}

void RobotModel::validate() const {
  if (!(speed_mps > 0.0) || !(grasp_s > 0.0) || !(place_s > 0.0)) {
    throw InputError("robot model: speed, grasp and place times must be positive");
  }
}

void SimClock::step(std::int64_t dt_us) {
  if (dt_us < 0 || tick_us <= 0 || dt_us % tick_us != 0) {
    throw std::invalid_argument("sim clock: step must be a non-negative multiple of the tick");
  }
  now_us += dt_us;
}

namespace {

double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::int64_t seconds_to_us(double s) { return static_cast<std::int64_t>(std::llround(s * 1e6)); }

}  // namespace

FetchPlan plan_fetch(const RobotModel& robot, const std::string& label, Point2 part_pose,
                     Point2 drop_pose, std::int64_t start_us) {
  const double to_part = distance(robot.home_pose, part_pose) / robot.speed_mps;
  const double to_drop = distance(part_pose, drop_pose) / robot.speed_mps;
  const double to_home = distance(drop_pose, robot.home_pose) / robot.speed_mps;
  FetchPlan plan;
  plan.label = label;
  plan.start_us = start_us;
  plan.part_pose = part_pose;
  plan.drop_pose = drop_pose;
  plan.picked_up_us = start_us + seconds_to_us(to_part + robot.grasp_s);
  plan.delivered_us = start_us + seconds_to_us(to_part + robot.grasp_s + to_drop + robot.place_s);
  plan.returned_us =
      start_us + seconds_to_us(to_part + robot.grasp_s + to_drop + robot.place_s + to_home);
  return plan;
}

Simulator::Simulator(const AssemblyPlan& plan, SimConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      scene_(randomize_scene(plan, config_.scene, seed)),
      noise_rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
  config_.robot.validate();
  clock_.tick_us = config_.tick_us;
  if (clock_.tick_us <= 0) throw InputError("sim: tick_us must be positive");
}

Point2 Simulator::free_drop_slot() const {
  double cell_w = 0.0;
  double cell_h = 0.0;
  for (const auto& p : scene_.parts) {
    cell_w = std::max(cell_w, p.footprint.x);
    cell_h = std::max(cell_h, p.footprint.y);
  }
  cell_w += kGridGap;
  cell_h += kGridGap;
  const Rect& shared = scene_.layout.shared;
  for (double y = shared.y_min; y + cell_h <= shared.y_max + 1e-12; y += cell_h) {
    for (double x = shared.x_min; x + cell_w <= shared.x_max + 1e-12; x += cell_w) {
      const Rect cell{x, y, x + cell_w, y + cell_h};
      const bool taken = std::any_of(scene_.parts.begin(), scene_.parts.end(), [&](const auto& p) {
        return p.zone == Zone::Shared && !p.assembled && p.rect().overlaps(cell);
      });
      if (!taken) return {x + cell_w / 2.0, y + cell_h / 2.0};
    }
  }
  throw CapacityError("shared zone is full");
}

void Simulator::command_fetch(const std::string& label) {
  auto fault = [&](std::string reason) {
    pending_faults_.push_back({RobotEventKind::Fault, label, clock_.now_us, std::move(reason)});
  };
  if (fetch_) return fault("robot busy");
  const ScenePart* part = scene_.find(label);
  if (part == nullptr || part->zone != Zone::RobotWorkspace || part->assembled ||
      part->in_transit) {
    return fault("part '" + label + "' is not in the robot workspace");
  }
  Point2 drop;
  try {
    drop = free_drop_slot();
  } catch (const CapacityError& e) {
    return fault(e.what());
  }
  fetch_ = plan_fetch(config_.robot, label, part->pose, drop, clock_.now_us);
  fetch_stage_ = 0;
}

std::vector<RobotEvent> Simulator::step(std::int64_t dt_us) {
  if (dt_us < 0 || dt_us % clock_.tick_us != 0) {
    throw std::invalid_argument("sim: step must be a non-negative multiple of the tick");
  }
  std::vector<RobotEvent> events;
  for (std::int64_t elapsed = 0; elapsed < dt_us; elapsed += clock_.tick_us) {
    clock_.step(clock_.tick_us);
    const std::int64_t now = clock_.now_us;
    for (auto& f : pending_faults_) {
      f.timestamp_us = now;
      events.push_back(std::move(f));
    }
    pending_faults_.clear();

    while (fetch_) {
      if (fetch_stage_ == 0 && now >= fetch_->picked_up_us) {
        scene_.find(fetch_->label)->in_transit = true;
        events.push_back({RobotEventKind::PickedUp, fetch_->label, now, {}});
        fetch_stage_ = 1;
      } else if (fetch_stage_ == 1 && now >= fetch_->delivered_us) {
        ScenePart* part = scene_.find(fetch_->label);
        part->in_transit = false;
        part->zone = Zone::Shared;
        part->pose = fetch_->drop_pose;
        events.push_back({RobotEventKind::Delivered, fetch_->label, now, {}});
        fetch_stage_ = 2;
      } else if (fetch_stage_ == 2 && now >= fetch_->returned_us) {
        events.push_back({RobotEventKind::Returned, fetch_->label, now, {}});
        fetch_.reset();
      } else {
        break;
      }
    }
  }
  return events;
}

Point2 Simulator::robot_position() const {
  const Point2 home = config_.robot.home_pose;
  if (!fetch_) return home;
  const auto& f = *fetch_;
  const double v = config_.robot.speed_mps;
  const double t = static_cast<double>(clock_.now_us - f.start_us) / 1e6;
  auto lerp = [](Point2 a, Point2 b, double u) {
    u = std::clamp(u, 0.0, 1.0);
    return Point2{a.x + (b.x - a.x) * u, a.y + (b.y - a.y) * u};
  };
  const double leg1 = distance(home, f.part_pose) / v;
  const double leg2 = distance(f.part_pose, f.drop_pose) / v;
  const double leg3 = distance(f.drop_pose, home) / v;
  const double t1 = leg1;
  const double t2 = t1 + config_.robot.grasp_s;
  const double t3 = t2 + leg2;
  const double t4 = t3 + config_.robot.place_s;
  if (t < t1) return lerp(home, f.part_pose, leg1 > 0 ? t / leg1 : 1.0);
  if (t < t2) return f.part_pose;
  if (t < t3) return lerp(f.part_pose, f.drop_pose, leg2 > 0 ? (t - t2) / leg2 : 1.0);
  if (t < t4) return f.drop_pose;
  return lerp(f.drop_pose, home, leg3 > 0 ? (t - t4) / leg3 : 1.0);
}

DetectionFrame Simulator::render(Viewpoint viewpoint) {
  return render_detections(scene_, viewpoint, config_.cameras.camera(viewpoint), config_.noise,
                           noise_rng_, clock_.now_us);
}

void Simulator::mark_assembled(const std::string& label) {
  ScenePart* part = scene_.find(label);
  if (part == nullptr) throw InputError("sim: unknown part '" + label + "'");
  part->assembled = true;
  part->in_transit = false;
  part->zone = Zone::UserStation;
  const Rect& station = scene_.layout.user_station;
  part->pose = {(station.x_min + station.x_max) / 2.0, (station.y_min + station.y_max) / 2.0};
}

// --- scripts ---------------------------------------------------------------

GazeScript parse_script(const nlohmann::json& document) {
  const nlohmann::json* entries = &document;
  if (document.is_object()) {
    if (!document.contains("entries")) throw ScriptError("script: missing 'entries'");
    entries = &document["entries"];
  }
  if (!entries->is_array()) throw ScriptError("script: entries must be an array");

  GazeScript script;
  std::size_t index = 0;
  for (const auto& j : *entries) {
    const std::string where = "script entry " + std::to_string(index++);
    if (!j.is_object() || !j.contains("duration_ms") || !j["duration_ms"].is_number_integer()) {
      throw ScriptError(where + ": needs integer 'duration_ms'");
    }
    ScriptEntry e;
    e.duration_ms = j["duration_ms"].get<std::int64_t>();
    if (e.duration_ms < 0) throw ScriptError(where + ": negative duration");
    try {
      if (j.contains("target")) {
        e.kind = ScriptEntry::Kind::Fixate;
        e.label = j["target"].get<std::string>();
      } else if (j.contains("touch")) {
        e.kind = ScriptEntry::Kind::Touch;
        e.label = j["touch"].get<std::string>();
      } else if (j.contains("point")) {
        e.kind = ScriptEntry::Kind::LookAt;
        e.point = {j["point"].at(0).get<double>(), j["point"].at(1).get<double>()};
      } else if (j.value("away", false)) {
        e.kind = ScriptEntry::Kind::LookAway;
      } else {
        throw ScriptError(where + ": needs one of target, touch, point, away");
      }
    } catch (const nlohmann::json::exception& ex) {
      throw ScriptError(where + ": " + ex.what());
    }
    script.entries.push_back(std::move(e));
  }
  return script;
}

GazeScript load_script_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open script file '" + path + "'");
  try {
    return parse_script(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ScriptError("script file '" + path + "': " + e.what());
  }
}

nlohmann::json script_to_json(const GazeScript& script) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : script.entries) {
    nlohmann::json j;
    switch (e.kind) {
      case ScriptEntry::Kind::Fixate: j["target"] = e.label; break;
      case ScriptEntry::Kind::Touch: j["touch"] = e.label; break;
      case ScriptEntry::Kind::LookAt: j["point"] = {e.point.x, e.point.y}; break;
      case ScriptEntry::Kind::LookAway: j["away"] = true; break;
    }
    j["duration_ms"] = e.duration_ms;
    entries.push_back(std::move(j));
  }
  return {{"entries", entries}};
}

namespace {

std::int64_t entry_samples(const ScriptEntry& e, double rate_hz) {
  return static_cast<std::int64_t>(std::llround(static_cast<double>(e.duration_ms) * rate_hz / 1000.0));
}

std::int64_t period_us(double rate_hz) {
  return static_cast<std::int64_t>(std::llround(1e6 / rate_hz));
}

}  // namespace

std::vector<GazeSample> scripted_gaze(const Scene& scene, const Camera& user_camera,
                                      const GazeScript& script, double sigma_px,
                                      double sample_rate_hz, std::uint64_t seed,
                                      std::int64_t start_us) {
  if (!(sample_rate_hz > 0.0)) throw ScriptError("script: sample rate must be positive");
  Rng rng(seed);
  const std::int64_t period = period_us(sample_rate_hz);
  std::vector<GazeSample> samples;
  std::int64_t k = 0;
  for (const auto& e : script.entries) {
    const std::int64_t n = entry_samples(e, sample_rate_hz);
    if (e.kind == ScriptEntry::Kind::Touch) {
      k += n;
      continue;
    }
    Point2 aim = e.point;
    if (e.kind == ScriptEntry::Kind::Fixate) {
      const ScenePart* part = scene.find(e.label);
      if (part == nullptr || part->assembled || !visible_from(part->zone, Viewpoint::User)) {
        throw ScriptError("script: target '" + e.label + "' is not in the user's view");
      }
      aim = bbox_center(user_camera.project(part->label, part->rect()));
    }
    for (std::int64_t i = 0; i < n; ++i, ++k) {
      GazeSample s;
      s.timestamp_us = start_us + k * period;
      if (e.kind == ScriptEntry::Kind::LookAway) {
        s.valid = false;
      } else {
        const double nx = rng.normal();
        const double ny = rng.normal();
        s.x = aim.x + sigma_px * nx;
        s.y = aim.y + sigma_px * ny;
      }
      samples.push_back(s);
    }
  }
  return samples;
}

std::vector<ScriptTouch> scripted_touches(const GazeScript& script, double sample_rate_hz,
                                          std::int64_t start_us) {
  const std::int64_t period = period_us(sample_rate_hz);
  std::vector<ScriptTouch> touches;
  std::int64_t k = 0;
  for (const auto& e : script.entries) {
    if (e.kind == ScriptEntry::Kind::Touch) touches.push_back({start_us + k * period, e.label});
    k += entry_samples(e, sample_rate_hz);
  }
  return touches;
}

std::vector<IntendedLabel> script_annotations(const GazeScript& script, double sample_rate_hz,
                                              std::int64_t start_us) {
  const std::int64_t period = period_us(sample_rate_hz);
  std::vector<IntendedLabel> out;
  std::int64_t k = 0;
  for (const auto& e : script.entries) {
    const std::int64_t n = entry_samples(e, sample_rate_hz);
    if (e.kind == ScriptEntry::Kind::Fixate || e.kind == ScriptEntry::Kind::Touch) {
      out.push_back({start_us + k * period, start_us + (k + n) * period, e.label});
    }
    k += n;
  }
  return out;
}

std::int64_t script_duration_us(const GazeScript& script, double sample_rate_hz) {
  std::int64_t k = 0;
  for (const auto& e : script.entries) k += entry_samples(e, sample_rate_hz);
  return k * period_us(sample_rate_hz);
}

}  // namespace gear
