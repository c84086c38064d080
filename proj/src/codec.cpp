#include "gear/codec.hpp"

#include <sstream>

#include "gear/errors.hpp"

namespace gear {

using nlohmann::json;

void to_json(json& j, const StreamConfig& v) {
  j = {{"frame_width", v.frame_width},
       {"frame_height", v.frame_height},
       {"sample_rate_hz", v.sample_rate_hz},
       {"window_size", v.window_size}};
}

void from_json(const json& j, StreamConfig& v) {
  v.frame_width = j.at("frame_width").get<int>();
  v.frame_height = j.at("frame_height").get<int>();
  v.sample_rate_hz = j.at("sample_rate_hz").get<double>();
  v.window_size = j.at("window_size").get<std::size_t>();
}

void to_json(json& j, const GazeSample& v) {
  j = {{"timestamp_us", v.timestamp_us}, {"x", v.x}, {"y", v.y}, {"valid", v.valid}};
}

void from_json(const json& j, GazeSample& v) {
  v.timestamp_us = j.at("timestamp_us").get<std::int64_t>();
  v.valid = j.at("valid").get<bool>();
  // Coordinates of invalid samples are ignored, so they may be omitted.
  v.x = v.valid || j.contains("x") ? j.at("x").get<double>() : 0.0;
  v.y = v.valid || j.contains("y") ? j.at("y").get<double>() : 0.0;
}

void to_json(json& j, const MeanGaze& v) {
  j = {{"x_mean", v.x_mean},
       {"y_mean", v.y_mean},
       {"n", v.n},
       {"span_us", v.span_us},
       {"timestamp_us", v.timestamp_us}};
}

void from_json(const json& j, MeanGaze& v) {
  v.x_mean = j.at("x_mean").get<double>();
  v.y_mean = j.at("y_mean").get<double>();
  v.n = j.at("n").get<std::size_t>();
  v.span_us = j.at("span_us").get<std::int64_t>();
  v.timestamp_us = j.at("timestamp_us").get<std::int64_t>();
}

void to_json(json& j, const BBox& v) {
  j = {{"label", v.label}, {"x_min", v.x_min}, {"y_min", v.y_min},
       {"x_max", v.x_max}, {"y_max", v.y_max}, {"confidence", v.confidence}};
}

void from_json(const json& j, BBox& v) {
  v.label = j.at("label").get<std::string>();
  v.x_min = j.at("x_min").get<double>();
  v.y_min = j.at("y_min").get<double>();
  v.x_max = j.at("x_max").get<double>();
  v.y_max = j.at("y_max").get<double>();
  v.confidence = j.at("confidence").get<double>();
}

void to_json(json& j, const DetectionFrame& v) {
  j = {{"source", to_string(v.source)},
       {"timestamp_us", v.timestamp_us},
       {"frame_width", v.frame_width},
       {"frame_height", v.frame_height},
       {"boxes", v.boxes}};
}

void from_json(const json& j, DetectionFrame& v) {
  v.source = viewpoint_from_string(j.at("source").get<std::string>());
  v.timestamp_us = j.at("timestamp_us").get<std::int64_t>();
  v.frame_width = j.at("frame_width").get<int>();
  v.frame_height = j.at("frame_height").get<int>();
  v.boxes = j.at("boxes").get<std::vector<BBox>>();
}

void to_json(json& j, const IntentEvent& v) {
  j = {{"source", to_string(v.source)},
       {"label", v.label},
       {"timestamp_us", v.timestamp_us},
       {"dwell_emissions", v.dwell_emissions}};
}

void from_json(const json& j, IntentEvent& v) {
  v.source = intent_source_from_string(j.at("source").get<std::string>());
  v.label = j.at("label").get<std::string>();
  v.timestamp_us = j.at("timestamp_us").get<std::int64_t>();
  v.dwell_emissions = j.at("dwell_emissions").get<int>();
}

void to_json(json& j, const Announcement& v) {
  j = {{"kind", to_string(v.kind)}, {"text", v.text}, {"timestamp_us", v.timestamp_us}};
}

void from_json(const json& j, Announcement& v) {
  v.kind = announcement_kind_from_string(j.at("kind").get<std::string>());
  v.text = j.at("text").get<std::string>();
  v.timestamp_us = j.at("timestamp_us").get<std::int64_t>();
}

void to_json(json& j, const RobotEvent& v) {
  j = {{"event", to_string(v.kind)}, {"label", v.label}, {"timestamp_us", v.timestamp_us}};
  if (!v.reason.empty()) j["reason"] = v.reason;
}

void from_json(const json& j, RobotEvent& v) {
  v.kind = robot_event_kind_from_string(j.at("event").get<std::string>());
  v.label = j.at("label").get<std::string>();
  v.timestamp_us = j.at("timestamp_us").get<std::int64_t>();
  v.reason = j.value("reason", std::string());
}

void to_json(json& j, const IntendedLabel& v) {
  j = {{"from_us", v.from_us}, {"to_us", v.to_us}, {"label", v.label}};
}

void from_json(const json& j, IntendedLabel& v) {
  v.from_us = j.at("from_us").get<std::int64_t>();
  v.to_us = j.at("to_us").get<std::int64_t>();
  v.label = j.at("label").get<std::string>();
}

void to_json(json& j, const SessionMetrics& v) {
  j = {{"completion_time_s", v.completion_time_s}, {"requests_total", v.requests_total},
       {"requests_incorrect", v.requests_incorrect}, {"error_rate", v.error_rate},
       {"complete", v.complete},                      {"annotated", v.annotated}};
}

void from_json(const json& j, SessionMetrics& v) {
  v.completion_time_s = j.at("completion_time_s").get<double>();
  v.requests_total = j.at("requests_total").get<std::size_t>();
  v.requests_incorrect = j.at("requests_incorrect").get<std::size_t>();
  v.error_rate = j.at("error_rate").get<double>();
  v.complete = j.at("complete").get<bool>();
  v.annotated = j.at("annotated").get<bool>();
}

void to_json(json& j, const OrchestratorConfig& v) {
  j = {{"stream", v.stream},
       {"dwell_threshold", v.dwell_threshold},
       {"refractory_us", v.refractory_us},
       {"staleness_us", v.staleness_us},
       {"min_confidence", v.min_confidence}};
}

void from_json(const json& j, OrchestratorConfig& v) {
  v.stream = j.at("stream").get<StreamConfig>();
  v.dwell_threshold = j.at("dwell_threshold").get<int>();
  v.refractory_us = j.at("refractory_us").get<std::int64_t>();
  v.staleness_us = j.at("staleness_us").get<std::int64_t>();
  v.min_confidence = j.at("min_confidence").get<double>();
}

void to_json(json& j, const Point2& v) { j = json::array({v.x, v.y}); }

void from_json(const json& j, Point2& v) {
  v.x = j.at(0).get<double>();
  v.y = j.at(1).get<double>();
}

void to_json(json& j, const Rect& v) {
  j = {{"x_min", v.x_min}, {"y_min", v.y_min}, {"x_max", v.x_max}, {"y_max", v.y_max}};
}

void from_json(const json& j, Rect& v) {
  v.x_min = j.at("x_min").get<double>();
  v.y_min = j.at("y_min").get<double>();
  v.x_max = j.at("x_max").get<double>();
  v.y_max = j.at("y_max").get<double>();
}

void to_json(json& j, const ScenePart& v) {
  j = {{"label", v.label},          {"pose_m", v.pose},           {"footprint_m", v.footprint},
       {"zone", to_string(v.zone)}, {"assembled", v.assembled},   {"in_transit", v.in_transit}};
}

void from_json(const json& j, ScenePart& v) {
  v.label = j.at("label").get<std::string>();
  v.pose = j.at("pose_m").get<Point2>();
  v.footprint = j.at("footprint_m").get<Point2>();
  v.zone = zone_from_string(j.at("zone").get<std::string>());
  v.assembled = j.at("assembled").get<bool>();
  v.in_transit = j.at("in_transit").get<bool>();
}

void to_json(json& j, const Scene& v) {
  j = {{"parts", v.parts},
       {"layout",
        {{"user_station", v.layout.user_station},
         {"robot_workspace", v.layout.robot_workspace},
         {"shared", v.layout.shared}}}};
}

void from_json(const json& j, Scene& v) {
  v.parts = j.at("parts").get<std::vector<ScenePart>>();
  const auto& l = j.at("layout");
  v.layout.user_station = l.at("user_station").get<Rect>();
  v.layout.robot_workspace = l.at("robot_workspace").get<Rect>();
  v.layout.shared = l.at("shared").get<Rect>();
}

void to_json(json& j, const Camera& v) {
  j = {{"width_px", v.width_px},
       {"height_px", v.height_px},
       {"px_per_m", v.px_per_m},
       {"origin_m", v.origin_m}};
}

void from_json(const json& j, Camera& v) {
  v.width_px = j.at("width_px").get<int>();
  v.height_px = j.at("height_px").get<int>();
  v.px_per_m = j.at("px_per_m").get<double>();
  v.origin_m = j.at("origin_m").get<Point2>();
}

// --- event log ----------------------------------------------------------------

namespace {

struct RecordEncoder {
  json& j;
  void operator()(const SessionStart& p) const {
    j["kind"] = "session_start";
    j["plan_id"] = p.plan_id;
  }
  void operator()(const GazeSampleRef& p) const {
    j["kind"] = "gaze_sample";
    j["sample_timestamp_us"] = p.sample_timestamp_us;
    j["valid"] = p.valid;
  }
  void operator()(const MeanGaze& p) const {
    j["kind"] = "mean_gaze";
    j["gaze"] = p;
  }
  void operator()(const IntentEvent& p) const {
    j["kind"] = "intent";
    j["intent"] = p;
  }
  void operator()(const ValidationRecord& p) const {
    j["kind"] = "validation";
    j["intent"] = p.intent;
    j["outcome"] = p.outcome;
    j["pending"] = p.pending;
    j["announced"] = to_string(p.announced);
  }
  void operator()(const Announcement& p) const {
    j["kind"] = "announcement";
    j["announcement"] = p;
  }
  void operator()(const PhaseChange& p) const {
    j["kind"] = "phase_change";
    j["from"] = to_string(p.from);
    j["to"] = to_string(p.to);
    j["label"] = p.label;
  }
  void operator()(const Delivery& p) const {
    j["kind"] = "delivery";
    j["step_id"] = p.step_id;
    j["label"] = p.label;
  }
  void operator()(const AssemblyMark& p) const {
    j["kind"] = "assembly_mark";
    j["step_id"] = p.step_id;
    j["label"] = p.label;
  }
  void operator()(const FaultRecord& p) const {
    j["kind"] = "fault";
    j["code"] = p.code;
    j["message"] = p.message;
  }
};

}  // namespace

json log_record_to_json(const EventLogRecord& r) {
  json j = {{"t_us", r.timestamp_us}};
  std::visit(RecordEncoder{j}, r.payload);
  return j;
}

EventLogRecord log_record_from_json(const json& j) {
  EventLogRecord r;
  r.timestamp_us = j.at("t_us").get<std::int64_t>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "session_start") {
    r.payload = SessionStart{j.at("plan_id").get<std::string>()};
  } else if (kind == "gaze_sample") {
    r.payload = GazeSampleRef{j.at("sample_timestamp_us").get<std::int64_t>(),
                              j.at("valid").get<bool>()};
  } else if (kind == "mean_gaze") {
    r.payload = j.at("gaze").get<MeanGaze>();
  } else if (kind == "intent") {
    r.payload = j.at("intent").get<IntentEvent>();
  } else if (kind == "validation") {
    r.payload = ValidationRecord{
        j.at("intent").get<IntentEvent>(), j.at("outcome").get<std::string>(),
        j.at("pending").get<std::vector<std::string>>(),
        announcement_kind_from_string(j.at("announced").get<std::string>())};
  } else if (kind == "announcement") {
    r.payload = j.at("announcement").get<Announcement>();
  } else if (kind == "phase_change") {
    r.payload = PhaseChange{robot_phase_from_string(j.at("from").get<std::string>()),
                            robot_phase_from_string(j.at("to").get<std::string>()),
                            j.at("label").get<std::string>()};
  } else if (kind == "delivery") {
    r.payload = Delivery{j.at("step_id").get<std::string>(), j.at("label").get<std::string>()};
  } else if (kind == "assembly_mark") {
    r.payload = AssemblyMark{j.at("step_id").get<std::string>(), j.at("label").get<std::string>()};
  } else if (kind == "fault") {
    r.payload = FaultRecord{j.at("code").get<std::string>(), j.at("message").get<std::string>()};
  } else {
    throw InputError("event log: unknown record kind '" + kind + "'");
  }
  return r;
}

std::string log_to_jsonl(std::span<const EventLogRecord> log) {
  std::string out;
  for (const auto& r : log) {
    out += log_record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<EventLogRecord> log_from_jsonl(const std::string& document) {
  std::vector<EventLogRecord> log;
  std::istringstream in(document);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      log.push_back(log_record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw InputError(std::string("event log: ") + e.what());
    }
  }
  return log;
}

}  // namespace gear
