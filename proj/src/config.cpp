#include "gear/config.hpp"

#include <cstdlib>
#include <fstream>
#include <initializer_list>

#include "gear/codec.hpp"
#include "gear/errors.hpp"

namespace gear {

using nlohmann::json;

namespace {

void check_keys(const json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw InputError(std::string("config: '") + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw InputError(std::string("config: unknown key '") + key + "' in '" + section + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::int64_t ms_to_us(double ms) { return static_cast<std::int64_t>(ms * 1000.0); }

}  // namespace

AppConfig apply_config(const json& document, AppConfig base) {
  AppConfig c = std::move(base);
  try {
    check_keys(document, "<root>", {"stream", "orchestrator", "sim", "session", "gateway"});

    if (document.contains("stream")) {
      const auto& s = document["stream"];
      check_keys(s, "stream", {"frame_width", "frame_height", "sample_rate_hz", "window_size"});
      auto& st = c.run.orchestrator.stream;
      read(s, "frame_width", st.frame_width);
      read(s, "frame_height", st.frame_height);
      read(s, "sample_rate_hz", st.sample_rate_hz);
      read(s, "window_size", st.window_size);
    }
    if (document.contains("orchestrator")) {
      const auto& o = document["orchestrator"];
      check_keys(o, "orchestrator",
                 {"dwell_threshold", "refractory_ms", "staleness_ms", "min_confidence"});
      auto& oc = c.run.orchestrator;
      read(o, "dwell_threshold", oc.dwell_threshold);
      if (o.contains("refractory_ms")) oc.refractory_us = ms_to_us(o["refractory_ms"].get<double>());
      if (o.contains("staleness_ms")) oc.staleness_us = ms_to_us(o["staleness_ms"].get<double>());
      read(o, "min_confidence", oc.min_confidence);
    }
    if (document.contains("sim")) {
      const auto& s = document["sim"];
      check_keys(s, "sim",
                 {"tick_us", "robot", "noise", "layout", "default_footprint_m", "footprints_m",
                  "user_station_poses_m", "max_attempts", "cameras"});
      auto& sc = c.run.sim;
      read(s, "tick_us", sc.tick_us);
      if (s.contains("robot")) {
        const auto& r = s["robot"];
        check_keys(r, "sim.robot", {"speed_mps", "grasp_s", "place_s", "home_pose_m"});
        read(r, "speed_mps", sc.robot.speed_mps);
        read(r, "grasp_s", sc.robot.grasp_s);
        read(r, "place_s", sc.robot.place_s);
        read(r, "home_pose_m", sc.robot.home_pose);
      }
      if (s.contains("noise")) {
        const auto& n = s["noise"];
        check_keys(n, "sim.noise", {"jitter_px", "dropout_p"});
        read(n, "jitter_px", sc.noise.jitter_px);
        read(n, "dropout_p", sc.noise.dropout_p);
      }
      if (s.contains("layout")) {
        const auto& l = s["layout"];
        check_keys(l, "sim.layout", {"user_station", "robot_workspace", "shared"});
        read(l, "user_station", sc.scene.layout.user_station);
        read(l, "robot_workspace", sc.scene.layout.robot_workspace);
        read(l, "shared", sc.scene.layout.shared);
      }
      read(s, "default_footprint_m", sc.scene.default_footprint);
      read(s, "footprints_m", sc.scene.footprints);
      read(s, "user_station_poses_m", sc.scene.user_station_poses);
      read(s, "max_attempts", sc.scene.max_attempts);
      if (s.contains("cameras")) {
        const auto& cam = s["cameras"];
        check_keys(cam, "sim.cameras", {"user", "robot"});
        read(cam, "user", sc.cameras.user);
        read(cam, "robot", sc.cameras.robot);
      }
    }
    if (document.contains("session")) {
      const auto& s = document["session"];
      check_keys(s, "session", {"gaze_sigma_px", "frame_period_ms", "assemble_delay_ms", "tail_s"});
      read(s, "gaze_sigma_px", c.run.gaze_sigma_px);
      if (s.contains("frame_period_ms")) c.run.frame_period_us = ms_to_us(s["frame_period_ms"].get<double>());
      if (s.contains("assemble_delay_ms")) c.run.assemble_delay_us = ms_to_us(s["assemble_delay_ms"].get<double>());
      if (s.contains("tail_s")) c.run.tail_us = ms_to_us(s["tail_s"].get<double>() * 1000.0);
    }
    if (document.contains("gateway")) {
      const auto& g = document["gateway"];
      check_keys(g, "gateway",
                 {"host", "tcp_port", "ws_port", "ws_path", "static_dir", "snapshot_period_ms"});
      read(g, "host", c.gateway.host);
      read(g, "tcp_port", c.gateway.tcp_port);
      read(g, "ws_port", c.gateway.ws_port);
      read(g, "ws_path", c.gateway.ws_path);
      read(g, "static_dir", c.gateway.static_dir);
      if (g.contains("snapshot_period_ms")) {
        c.gateway.snapshot_period_us = ms_to_us(g["snapshot_period_ms"].get<double>());
      }
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  c.run.orchestrator.validate();
  c.run.sim.robot.validate();
  const auto& noise = c.run.sim.noise;
  if (!(noise.jitter_px >= 0.0) || !(noise.dropout_p >= 0.0 && noise.dropout_p <= 1.0) ||
      !(c.run.gaze_sigma_px >= 0.0)) {
    throw InputError("config: jitter and gaze sigma must be >= 0, dropout_p in [0, 1]");
  }
  if (c.run.sim.tick_us <= 0 || c.run.frame_period_us <= 0) {
    throw InputError("config: tick and frame period must be positive");
  }
  if (c.run.frame_period_us % c.run.sim.tick_us != 0 ||
      c.run.orchestrator.stream.sample_period_us() % c.run.sim.tick_us != 0) {
    throw InputError("config: frame and gaze sample periods must be multiples of the sim tick");
  }
  return c;
}

json config_to_json(const AppConfig& c) {
  const auto& o = c.run.orchestrator;
  const auto& s = c.run.sim;
  return {
      {"stream", o.stream},
      {"orchestrator",
       {{"dwell_threshold", o.dwell_threshold},
        {"refractory_ms", static_cast<double>(o.refractory_us) / 1000.0},
        {"staleness_ms", static_cast<double>(o.staleness_us) / 1000.0},
        {"min_confidence", o.min_confidence}}},
      {"sim",
       {{"tick_us", s.tick_us},
        {"robot",
         {{"speed_mps", s.robot.speed_mps},
          {"grasp_s", s.robot.grasp_s},
          {"place_s", s.robot.place_s},
          {"home_pose_m", s.robot.home_pose}}},
        {"noise", {{"jitter_px", s.noise.jitter_px}, {"dropout_p", s.noise.dropout_p}}},
        {"layout",
         {{"user_station", s.scene.layout.user_station},
          {"robot_workspace", s.scene.layout.robot_workspace},
          {"shared", s.scene.layout.shared}}},
        {"default_footprint_m", s.scene.default_footprint},
        {"footprints_m", s.scene.footprints},
        {"user_station_poses_m", s.scene.user_station_poses},
        {"max_attempts", s.scene.max_attempts},
        {"cameras", {{"user", s.cameras.user}, {"robot", s.cameras.robot}}}}},
      {"session",
       {{"gaze_sigma_px", c.run.gaze_sigma_px},
        {"frame_period_ms", static_cast<double>(c.run.frame_period_us) / 1000.0},
        {"assemble_delay_ms", static_cast<double>(c.run.assemble_delay_us) / 1000.0},
        {"tail_s", static_cast<double>(c.run.tail_us) / 1e6}}},
      {"gateway",
       {{"host", c.gateway.host},
        {"tcp_port", c.gateway.tcp_port},
        {"ws_port", c.gateway.ws_port},
        {"ws_path", c.gateway.ws_path},
        {"static_dir", c.gateway.static_dir},
        {"snapshot_period_ms", static_cast<double>(c.gateway.snapshot_period_us) / 1000.0}}},
  };
}

AppConfig load_app_config(const std::optional<std::string>& explicit_path) {
  std::optional<std::string> path = explicit_path;
  if (!path) {
    if (const char* env = std::getenv(kConfigEnvVar); env != nullptr && *env != '\0') path = env;
  }
  if (!path) return apply_config(json::object());
  std::ifstream in(*path);
  if (!in) throw InputError("cannot open config file '" + *path + "'");
  try {
    return apply_config(json::parse(in));
  } catch (const json::parse_error& e) {
    throw InputError("config file '" + *path + "': " + e.what());
  }
}

}  // namespace gear
