#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

#include "gear/errors.hpp"
#include "gear/orchestrator.hpp"

namespace gear {

inline constexpr int kProtocolVersion = 1;

enum class MessageType {
  Hello,
  Config,
  GazeSample,
  DetectionFrame,
  TouchRequest,
  Intent,
  Announcement,
  RobotState,
  SceneSnapshot,
  Metrics,
  Fault,
  AssemblyMark,
};

const char* to_string(MessageType t);
std::optional<MessageType> message_type_from_string(std::string_view s);

/// One line on the wire: {"type":"GAZE_SAMPLE","seq":12,"payload":{...}}.
struct WireMessage {
  MessageType type = MessageType::Hello;
  std::uint64_t seq = 0;
  nlohmann::json payload = nlohmann::json::object();

  bool operator==(const WireMessage&) const = default;
};

/// The line is well-formed JSON but names a type this protocol version lacks.
class UnknownMessageType : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

/// Compact JSON, no trailing newline.
std::string encode(const WireMessage& m);
/// Throws ProtocolError for malformed lines and UnknownMessageType for
/// unknown types.
WireMessage decode(std::string_view line);

// Typed payloads that have no domain type of their own.

struct Hello {
  int version = kProtocolVersion;
  std::string role;

  bool operator==(const Hello&) const = default;
};

struct TouchRequest {
  std::string label;
  std::int64_t timestamp_us = 0;

  bool operator==(const TouchRequest&) const = default;
};

/// Outbound ROBOT_STATE: the orchestrator's phase. While RETRIEVING the
/// aligned robot-view box of the requested part is attached as `target`.
struct RobotStateUpdate {
  RobotPhase phase = RobotPhase::Idle;
  std::string label;
  std::int64_t timestamp_us = 0;
  std::optional<BBox> target;

  bool operator==(const RobotStateUpdate&) const = default;
};

struct AssemblyMarkRequest {
  std::string step_id;
  std::int64_t timestamp_us = 0;

  bool operator==(const AssemblyMarkRequest&) const = default;
};

struct FaultInfo {
  std::string code;
  std::string message;
  std::optional<std::uint64_t> line;

  bool operator==(const FaultInfo&) const = default;
};

void to_json(nlohmann::json& j, const Hello& v);
void from_json(const nlohmann::json& j, Hello& v);
void to_json(nlohmann::json& j, const TouchRequest& v);
void from_json(const nlohmann::json& j, TouchRequest& v);
void to_json(nlohmann::json& j, const RobotStateUpdate& v);
void from_json(const nlohmann::json& j, RobotStateUpdate& v);
void to_json(nlohmann::json& j, const AssemblyMarkRequest& v);
void from_json(const nlohmann::json& j, AssemblyMarkRequest& v);
void to_json(nlohmann::json& j, const FaultInfo& v);
void from_json(const nlohmann::json& j, FaultInfo& v);

/// ROBOT_STATE carries either an inbound robot event (`event` field) or an
/// outbound phase update (`phase` field).
bool is_robot_event(const WireMessage& m);

/// Maps inbound message types to orchestrator inputs; nullopt for types the
/// orchestrator does not consume. Throws ProtocolError for bad payloads.
std::optional<OrchestratorInput> to_orchestrator_input(const WireMessage& m);

/// Builds the inbound message for an orchestrator input (what a live source
/// would have sent). Sequence number is left at 0.
WireMessage to_wire(const OrchestratorInput& input, std::int64_t timestamp_us);

/// Outbound message for a log record, when the record is broadcast at all
/// (intents, announcements and phase changes).
std::optional<WireMessage> outbound_for(const EventLogRecord& record,
                                        const std::optional<RobotCommand>& command);

}  // namespace gear
