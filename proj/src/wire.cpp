#include "gear/wire.hpp"

#include <array>
#include <utility>

#include "gear/codec.hpp"

namespace gear {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<MessageType, const char*>, 12> kTypeNames{{
    {MessageType::Hello, "HELLO"},
    {MessageType::Config, "CONFIG"},
    {MessageType::GazeSample, "GAZE_SAMPLE"},
    {MessageType::DetectionFrame, "DETECTION_FRAME"},
    {MessageType::TouchRequest, "TOUCH_REQUEST"},
    {MessageType::Intent, "INTENT"},
    {MessageType::Announcement, "ANNOUNCEMENT"},
    {MessageType::RobotState, "ROBOT_STATE"},
    {MessageType::SceneSnapshot, "SCENE_SNAPSHOT"},
    {MessageType::Metrics, "METRICS"},
    {MessageType::Fault, "FAULT"},
    {MessageType::AssemblyMark, "ASSEMBLY_MARK"},
}};

}  // namespace

const char* to_string(MessageType t) {
  for (const auto& [type, name] : kTypeNames) {
    if (type == t) return name;
  }
  return "?";
}

std::optional<MessageType> message_type_from_string(std::string_view s) {
  for (const auto& [type, name] : kTypeNames) {
    if (s == name) return type;
  }
  return std::nullopt;
}

std::string encode(const WireMessage& m) {
  return json{{"type", to_string(m.type)}, {"seq", m.seq}, {"payload", m.payload}}.dump();
}

WireMessage decode(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("message is not a JSON object");
  if (!j.contains("type") || !j["type"].is_string()) throw ProtocolError("missing string 'type'");
  if (!j.contains("seq") || !j["seq"].is_number_unsigned()) {
    throw ProtocolError("missing unsigned integer 'seq'");
  }
  const auto type_name = j["type"].get<std::string>();
  const auto type = message_type_from_string(type_name);
  if (!type) throw UnknownMessageType("unknown message type '" + type_name + "'");
  WireMessage m;
  m.type = *type;
  m.seq = j["seq"].get<std::uint64_t>();
  if (j.contains("payload")) {
    if (!j["payload"].is_object()) throw ProtocolError("'payload' must be an object");
    m.payload = std::move(j["payload"]);
  }
  return m;
}

void to_json(json& j, const Hello& v) { j = {{"version", v.version}, {"role", v.role}}; }

void from_json(const json& j, Hello& v) {
  v.version = j.at("version").get<int>();
  v.role = j.value("role", std::string());
}

void to_json(json& j, const TouchRequest& v) {
  j = {{"label", v.label}, {"timestamp_us", v.timestamp_us}};
}

void from_json(const json& j, TouchRequest& v) {
  v.label = j.at("label").get<std::string>();
  v.timestamp_us = j.at("timestamp_us").get<std::int64_t>();
}

void to_json(json& j, const RobotStateUpdate& v) {
  j = {{"phase", to_string(v.phase)}, {"label", v.label}, {"timestamp_us", v.timestamp_us}};
  if (v.target) j["target"] = *v.target;
}

void from_json(const json& j, RobotStateUpdate& v) {
  v.phase = robot_phase_from_string(j.at("phase").get<std::string>());
  v.label = j.at("label").get<std::string>();
  v.timestamp_us = j.at("timestamp_us").get<std::int64_t>();
  v.target.reset();
  if (j.contains("target")) v.target = j["target"].get<BBox>();
}

void to_json(json& j, const AssemblyMarkRequest& v) {
  j = {{"step_id", v.step_id}, {"timestamp_us", v.timestamp_us}};
}

void from_json(const json& j, AssemblyMarkRequest& v) {
  v.step_id = j.at("step_id").get<std::string>();
  v.timestamp_us = j.at("timestamp_us").get<std::int64_t>();
}

void to_json(json& j, const FaultInfo& v) {
  j = {{"code", v.code}, {"message", v.message}};
  if (v.line) j["line"] = *v.line;
}

void from_json(const json& j, FaultInfo& v) {
  v.code = j.at("code").get<std::string>();
  v.message = j.at("message").get<std::string>();
  v.line.reset();
  if (j.contains("line")) v.line = j["line"].get<std::uint64_t>();
}

bool is_robot_event(const WireMessage& m) {
  return m.type == MessageType::RobotState && m.payload.contains("event");
}

std::optional<OrchestratorInput> to_orchestrator_input(const WireMessage& m) {
  try {
    switch (m.type) {
      case MessageType::GazeSample:
        return GazeInput{m.payload.get<GazeSample>()};
      case MessageType::DetectionFrame:
        return DetectionInput{m.payload.get<DetectionFrame>()};
      case MessageType::TouchRequest:
        return TouchInput{m.payload.get<TouchRequest>().label};
      case MessageType::RobotState:
        if (!is_robot_event(m)) return std::nullopt;
        return RobotEventInput{m.payload.get<RobotEvent>()};
      case MessageType::AssemblyMark:
        return AssemblyInput{m.payload.get<AssemblyMarkRequest>().step_id};
      default:
        return std::nullopt;
    }
  } catch (const json::exception& e) {
    throw ProtocolError(std::string(to_string(m.type)) + " payload: " + e.what());
  } catch (const InputError& e) {
    throw ProtocolError(std::string(to_string(m.type)) + " payload: " + e.what());
  }
}

WireMessage to_wire(const OrchestratorInput& input, std::int64_t timestamp_us) {
  struct Visitor {
    std::int64_t t;
    WireMessage operator()(const GazeInput& g) const { return {MessageType::GazeSample, 0, g.sample}; }
    WireMessage operator()(const DetectionInput& d) const {
      return {MessageType::DetectionFrame, 0, d.frame};
    }
    WireMessage operator()(const TouchInput& tch) const {
      return {MessageType::TouchRequest, 0, TouchRequest{tch.label, t}};
    }
    WireMessage operator()(const RobotEventInput& r) const {
      return {MessageType::RobotState, 0, r.event};
    }
    WireMessage operator()(const AssemblyInput& a) const {
      return {MessageType::AssemblyMark, 0, AssemblyMarkRequest{a.step_id, t}};
    }
  };
  return std::visit(Visitor{timestamp_us}, input);
}

std::optional<WireMessage> outbound_for(const EventLogRecord& record,
                                        const std::optional<RobotCommand>& command) {
  if (const auto* intent = std::get_if<IntentEvent>(&record.payload)) {
    return WireMessage{MessageType::Intent, 0, *intent};
  }
  if (const auto* a = std::get_if<Announcement>(&record.payload)) {
    return WireMessage{MessageType::Announcement, 0, *a};
  }
  if (const auto* p = std::get_if<PhaseChange>(&record.payload)) {
    RobotStateUpdate update{p->to, p->label, record.timestamp_us, std::nullopt};
    if (p->to == RobotPhase::Retrieving && command && command->label == p->label) {
      update.target = command->target;
    }
    return WireMessage{MessageType::RobotState, 0, update};
  }
  if (const auto* f = std::get_if<FaultRecord>(&record.payload)) {
    return WireMessage{MessageType::Fault, 0, FaultInfo{f->code, f->message, std::nullopt}};
  }
  return std::nullopt;
}

}  // namespace gear
