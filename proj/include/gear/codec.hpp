#pragma once

// JSON mappings for the domain types, found by nlohmann::json through ADL.
// Decoding is strict: a missing or mistyped field throws json::exception.

#include "json.hpp"

#include "gear/analysis.hpp"
#include "gear/annotation.hpp"
#include "gear/gaze.hpp"
#include "gear/orchestrator.hpp"
#include "gear/perception.hpp"
#include "gear/robot_events.hpp"
#include "gear/sim.hpp"

namespace gear {

void to_json(nlohmann::json& j, const StreamConfig& v);
void from_json(const nlohmann::json& j, StreamConfig& v);
void to_json(nlohmann::json& j, const GazeSample& v);
void from_json(const nlohmann::json& j, GazeSample& v);
void to_json(nlohmann::json& j, const MeanGaze& v);
void from_json(const nlohmann::json& j, MeanGaze& v);
void to_json(nlohmann::json& j, const BBox& v);
void from_json(const nlohmann::json& j, BBox& v);
void to_json(nlohmann::json& j, const DetectionFrame& v);
void from_json(const nlohmann::json& j, DetectionFrame& v);
void to_json(nlohmann::json& j, const IntentEvent& v);
void from_json(const nlohmann::json& j, IntentEvent& v);
void to_json(nlohmann::json& j, const Announcement& v);
void from_json(const nlohmann::json& j, Announcement& v);
void to_json(nlohmann::json& j, const RobotEvent& v);
void from_json(const nlohmann::json& j, RobotEvent& v);
void to_json(nlohmann::json& j, const IntendedLabel& v);
void from_json(const nlohmann::json& j, IntendedLabel& v);
void to_json(nlohmann::json& j, const SessionMetrics& v);
void from_json(const nlohmann::json& j, SessionMetrics& v);
void to_json(nlohmann::json& j, const OrchestratorConfig& v);
void from_json(const nlohmann::json& j, OrchestratorConfig& v);
void to_json(nlohmann::json& j, const Point2& v);
void from_json(const nlohmann::json& j, Point2& v);
void to_json(nlohmann::json& j, const Rect& v);
void from_json(const nlohmann::json& j, Rect& v);
void to_json(nlohmann::json& j, const ScenePart& v);
void from_json(const nlohmann::json& j, ScenePart& v);
void to_json(nlohmann::json& j, const Scene& v);
void from_json(const nlohmann::json& j, Scene& v);
void to_json(nlohmann::json& j, const Camera& v);
void from_json(const nlohmann::json& j, Camera& v);

/// One event-log line: {"t_us":..,"kind":..,...payload fields}.
nlohmann::json log_record_to_json(const EventLogRecord& r);
EventLogRecord log_record_from_json(const nlohmann::json& j);
std::string log_to_jsonl(std::span<const EventLogRecord> log);
std::vector<EventLogRecord> log_from_jsonl(const std::string& document);

}  // namespace gear
