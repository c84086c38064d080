#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gear/assembly.hpp"
#include "gear/gaze.hpp"
#include "gear/perception.hpp"
#include "gear/robot_events.hpp"

namespace gear {

enum class IntentSource { Gaze, Touch };
enum class RobotPhase { Idle, Announcing, Retrieving, Delivering, Returning };
enum class AnnouncementKind { Selected, Prerequisite, Unavailable, Busy };

const char* to_string(IntentSource s);
const char* to_string(RobotPhase p);
const char* to_string(AnnouncementKind k);
IntentSource intent_source_from_string(const std::string& s);
RobotPhase robot_phase_from_string(const std::string& s);
AnnouncementKind announcement_kind_from_string(const std::string& s);

struct IntentEvent {
  IntentSource source = IntentSource::Gaze;
  std::string label;
  std::int64_t timestamp_us = 0;
  int dwell_emissions = 0;  // 0 for touch

  bool operator==(const IntentEvent&) const = default;
};

struct Announcement {
  AnnouncementKind kind = AnnouncementKind::Selected;
  std::string text;
  std::int64_t timestamp_us = 0;

  bool operator==(const Announcement&) const = default;
};

std::string selected_text(const std::string& label);

// Event log payloads.
struct SessionStart {
  std::string plan_id;
  bool operator==(const SessionStart&) const = default;
};
struct GazeSampleRef {
  std::int64_t sample_timestamp_us = 0;
  bool valid = true;
  bool operator==(const GazeSampleRef&) const = default;
};
/// An intent together with how it was validated and announced.
struct ValidationRecord {
  IntentEvent intent;
  std::string outcome;  // ALLOWED, PREREQUISITE_NEEDED, UNKNOWN_PART, ALREADY_HANDLED, NOT_VISIBLE, BUSY
  std::vector<std::string> pending;
  AnnouncementKind announced = AnnouncementKind::Selected;
  bool operator==(const ValidationRecord&) const = default;
};
struct PhaseChange {
  RobotPhase from = RobotPhase::Idle;
  RobotPhase to = RobotPhase::Idle;
  std::string label;
  bool operator==(const PhaseChange&) const = default;
};
struct Delivery {
  std::string step_id;
  std::string label;
  bool operator==(const Delivery&) const = default;
};
struct AssemblyMark {
  std::string step_id;
  std::string label;
  bool operator==(const AssemblyMark&) const = default;
};
struct FaultRecord {
  std::string code;
  std::string message;
  bool operator==(const FaultRecord&) const = default;
};

using LogPayload = std::variant<SessionStart, GazeSampleRef, MeanGaze, IntentEvent, ValidationRecord,
                                Announcement, PhaseChange, Delivery, AssemblyMark, FaultRecord>;

struct EventLogRecord {
  std::int64_t timestamp_us = 0;
  LogPayload payload;

  bool operator==(const EventLogRecord&) const = default;
};

struct OrchestratorConfig {
  StreamConfig stream;
  int dwell_threshold = 1;
  std::int64_t refractory_us = 2'000'000;
  std::int64_t staleness_us = 200'000;
  double min_confidence = 0.0;

  void validate() const;
  bool operator==(const OrchestratorConfig&) const = default;
};

// Inputs, all stamped with their arrival time by the caller.
struct GazeInput {
  GazeSample sample;
};
struct DetectionInput {
  DetectionFrame frame;
};
struct TouchInput {
  std::string label;
};
struct RobotEventInput {
  RobotEvent event;
};
struct AssemblyInput {
  std::string step_id;
};
using OrchestratorInput =
    std::variant<GazeInput, DetectionInput, TouchInput, RobotEventInput, AssemblyInput>;

/// Single-threaded event loop from gaze/touch input to robot commands. Every
/// source, live or replayed, goes through dispatch(), so a session is a pure
/// function of its ordered inputs.
class Orchestrator {
 public:
  Orchestrator(AssemblyPlan plan, OrchestratorConfig config);

  void start_session(std::int64_t t_us);

  /// Returns the fetch command when the input led to a SELECTED announcement.
  std::optional<RobotCommand> dispatch(const OrchestratorInput& input, std::int64_t arrival_us);

  /// Dwell automaton over resolved targets. Returns an intent when the
  /// counter for one label reaches the threshold outside its refractory period.
  std::optional<IntentEvent> on_mean_gaze(const MeanGaze& gaze, const DetectionFrame* user_frame,
                                          std::int64_t now_us);

  /// UnknownPart when the label is not a part of the plan.
  std::variant<IntentEvent, UnknownPart> on_touch(const std::string& label,
                                                  std::int64_t timestamp_us) const;

  /// Validate, announce and possibly dispatch. Same path for gaze and touch.
  std::pair<Announcement, std::optional<RobotCommand>> handle_intent(const IntentEvent& intent,
                                                                    std::int64_t now_us);

  void on_robot_event(const RobotEvent& event, std::int64_t now_us);
  void on_assembled(const std::string& step_id, std::int64_t now_us);

  RobotPhase phase() const { return phase_; }
  const PlanState& plan_state() const { return state_; }
  const AssemblyPlan& plan() const { return plan_; }
  const OrchestratorConfig& config() const { return config_; }
  const std::vector<EventLogRecord>& log() const { return log_; }
  const std::optional<RobotCommand>& outstanding_command() const { return command_; }

 private:
  void append(std::int64_t t_us, LogPayload payload);
  void set_phase(RobotPhase to, std::int64_t t_us, const std::string& label);
  void fault(std::int64_t t_us, std::string code, std::string message);
  const DetectionFrame* fresh_frame(Viewpoint v, std::int64_t now_us) const;

  AssemblyPlan plan_;
  OrchestratorConfig config_;
  PlanState state_;
  GazeWindow window_;
  RobotPhase phase_ = RobotPhase::Idle;
  std::optional<RobotCommand> command_;
  std::vector<EventLogRecord> log_;
  std::int64_t clock_us_ = 0;

  std::optional<DetectionFrame> user_frame_;
  std::int64_t user_frame_arrival_us_ = 0;
  std::optional<DetectionFrame> robot_frame_;

  std::string dwell_label_;
  int dwell_count_ = 0;
  std::map<std::string, std::int64_t> last_intent_us_;
};

}  // namespace gear
