#include "gear/orchestrator.hpp"

#include <algorithm>

#include "gear/errors.hpp"

namespace gear {

const char* to_string(IntentSource s) { return s == IntentSource::Gaze ? "GAZE" : "TOUCH"; }

const char* to_string(RobotPhase p) {
  switch (p) {
    case RobotPhase::Idle: return "IDLE";
    case RobotPhase::Announcing: return "ANNOUNCING";
    case RobotPhase::Retrieving: return "RETRIEVING";
    case RobotPhase::Delivering: return "DELIVERING";
    case RobotPhase::Returning: return "RETURNING";
  }
  return "?";
}

const char* to_string(AnnouncementKind k) {
  switch (k) {
    case AnnouncementKind::Selected: return "SELECTED";
    case AnnouncementKind::Prerequisite: return "PREREQUISITE";
    case AnnouncementKind::Unavailable: return "UNAVAILABLE";
    case AnnouncementKind::Busy: return "BUSY";
  }
  return "?";
}

IntentSource intent_source_from_string(const std::string& s) {
  if (s == "GAZE") return IntentSource::Gaze;
  if (s == "TOUCH") return IntentSource::Touch;
  throw InputError("unknown intent source '" + s + "'");
}

RobotPhase robot_phase_from_string(const std::string& s) {
  for (auto p : {RobotPhase::Idle, RobotPhase::Announcing, RobotPhase::Retrieving,
                 RobotPhase::Delivering, RobotPhase::Returning}) {
    if (s == to_string(p)) return p;
  }
  throw InputError("unknown robot phase '" + s + "'");
}

AnnouncementKind announcement_kind_from_string(const std::string& s) {
  for (auto k : {AnnouncementKind::Selected, AnnouncementKind::Prerequisite,
                 AnnouncementKind::Unavailable, AnnouncementKind::Busy}) {
    if (s == to_string(k)) return k;
  }
  throw InputError("unknown announcement kind '" + s + "'");
}

std::string selected_text(const std::string& label) {
  return "Object " + label + " selected; Bringing now";
}

void OrchestratorConfig::validate() const {
  stream.validate();
  if (dwell_threshold < 1) throw InputError("orchestrator: dwell_threshold must be >= 1");
  if (refractory_us < 0 || staleness_us < 0) {
    throw InputError("orchestrator: refractory and staleness must be non-negative");
  }
  if (min_confidence < 0.0 || min_confidence > 1.0) {
    throw InputError("orchestrator: min_confidence must be in [0,1]");
  }
}

Orchestrator::Orchestrator(AssemblyPlan plan, OrchestratorConfig config)
    : plan_(std::move(plan)), config_(config), window_(config.stream) {
  config_.validate();
}

void Orchestrator::append(std::int64_t t_us, LogPayload payload) {
  clock_us_ = std::max(clock_us_, t_us);
  log_.push_back({clock_us_, std::move(payload)});
}

void Orchestrator::set_phase(RobotPhase to, std::int64_t t_us, const std::string& label) {
  if (to == phase_) return;
  append(t_us, PhaseChange{phase_, to, label});
  phase_ = to;
}

void Orchestrator::fault(std::int64_t t_us, std::string code, std::string message) {
  append(t_us, FaultRecord{std::move(code), std::move(message)});
}

void Orchestrator::start_session(std::int64_t t_us) { append(t_us, SessionStart{plan_.plan_id()}); }

const DetectionFrame* Orchestrator::fresh_frame(Viewpoint v, std::int64_t now_us) const {
  if (v == Viewpoint::Robot) return robot_frame_ ? &*robot_frame_ : nullptr;
  if (!user_frame_ || now_us - user_frame_arrival_us_ > config_.staleness_us) return nullptr;
  return &*user_frame_;
}

std::optional<IntentEvent> Orchestrator::on_mean_gaze(const MeanGaze& gaze,
                                                      const DetectionFrame* user_frame,
                                                      std::int64_t now_us) {
  std::optional<BBox> target;
  if (user_frame != nullptr) target = resolve_target(gaze, *user_frame);
  if (!target) {
    dwell_label_.clear();
    dwell_count_ = 0;
    return std::nullopt;
  }
  if (target->label == dwell_label_) {
    ++dwell_count_;
  } else {
    dwell_label_ = target->label;
    dwell_count_ = 1;
  }
  if (dwell_count_ < config_.dwell_threshold) return std::nullopt;

  const auto last = last_intent_us_.find(dwell_label_);
  if (last != last_intent_us_.end() && now_us - last->second < config_.refractory_us) {
    dwell_count_ = config_.dwell_threshold;  // keep saturated, no overflow
    return std::nullopt;
  }
  IntentEvent intent{IntentSource::Gaze, dwell_label_, now_us, dwell_count_};
  last_intent_us_[dwell_label_] = now_us;
  dwell_count_ = 0;
  return intent;
}

std::variant<IntentEvent, UnknownPart> Orchestrator::on_touch(const std::string& label,
                                                              std::int64_t timestamp_us) const {
  if (plan_.find_by_label(label) == nullptr) return UnknownPart{label};
  return IntentEvent{IntentSource::Touch, label, timestamp_us, 0};
}

namespace {

std::string join_labels(const AssemblyPlan& plan, const std::vector<std::string>& step_ids) {
  std::string out;
  for (const auto& id : step_ids) {
    if (!out.empty()) out += ", ";
    out += plan.step(id).part_label;
  }
  return out;
}

}  // namespace

std::pair<Announcement, std::optional<RobotCommand>> Orchestrator::handle_intent(
    const IntentEvent& intent, std::int64_t now_us) {
  append(now_us, intent);
  const std::string& label = intent.label;
  ValidationRecord record{intent, {}, {}, AnnouncementKind::Unavailable};
  Announcement announcement{AnnouncementKind::Unavailable, {}, now_us};
  std::optional<RobotCommand> command;

  if (phase_ != RobotPhase::Idle) {
    record.outcome = "BUSY";
    announcement = {AnnouncementKind::Busy, "Robot is busy; request for " + label + " ignored",
                    now_us};
  } else {
    const ValidationOutcome outcome = validate_request(plan_, state_, label);
    record.outcome = outcome_name(outcome);
    if (std::holds_alternative<UnknownPart>(outcome)) {
      announcement.text = "Object " + label + " is not part of this assembly";
    } else if (std::holds_alternative<AlreadyHandled>(outcome)) {
      announcement.text = "Object " + label + " was already delivered";
    } else if (const auto* needed = std::get_if<PrerequisiteNeeded>(&outcome)) {
      record.pending = needed->pending;
      announcement = {AnnouncementKind::Prerequisite,
                      "Object " + label + " needs " + join_labels(plan_, needed->pending) +
                          " assembled first",
                      now_us};
    } else {
      const auto& allowed = std::get<Allowed>(outcome);
      const DetectionFrame* robot_view = fresh_frame(Viewpoint::Robot, now_us);
      std::optional<BBox> aligned;
      if (robot_view != nullptr) aligned = align_object(*robot_view, label, config_.min_confidence);
      if (!aligned) {
        record.outcome = "NOT_VISIBLE";
        announcement.text = "Object " + label + " is not visible to the robot";
      } else {
        announcement = {AnnouncementKind::Selected, selected_text(label), now_us};
        command = RobotCommand{allowed.step_id, label, *aligned, now_us};
      }
    }
  }
  record.announced = announcement.kind;
  append(now_us, record);

  if (command) {
    set_phase(RobotPhase::Announcing, now_us, label);
    append(now_us, announcement);
    set_phase(RobotPhase::Retrieving, now_us, label);
    command_ = command;
  } else {
    append(now_us, announcement);
  }
  return {announcement, command};
}

void Orchestrator::on_robot_event(const RobotEvent& event, std::int64_t now_us) {
  const std::string label = command_ ? command_->label : event.label;
  auto abort = [&](std::string code, std::string message) {
    fault(now_us, std::move(code), std::move(message));
    set_phase(RobotPhase::Idle, now_us, label);
    command_.reset();
  };

  if (event.kind == RobotEventKind::Fault) {
    return abort("robot_fault", event.reason.empty() ? "robot reported a fault" : event.reason);
  }
  const std::string what = std::string(to_string(event.kind)) + " for '" + event.label +
                           "' while " + to_string(phase_);
  if (!command_ || event.label != command_->label) return abort("protocol_error", what);

  switch (event.kind) {
    case RobotEventKind::PickedUp:
      if (phase_ != RobotPhase::Retrieving) return abort("protocol_error", what);
      set_phase(RobotPhase::Delivering, now_us, label);
      break;
    case RobotEventKind::Delivered:
      if (phase_ != RobotPhase::Delivering) return abort("protocol_error", what);
      mark_delivered(plan_, state_, command_->step_id);
      append(now_us, Delivery{command_->step_id, label});
      set_phase(RobotPhase::Returning, now_us, label);
      break;
    case RobotEventKind::Returned:
      if (phase_ != RobotPhase::Returning) return abort("protocol_error", what);
      set_phase(RobotPhase::Idle, now_us, label);
      command_.reset();
      break;
    case RobotEventKind::Fault:
      break;
  }
}

void Orchestrator::on_assembled(const std::string& step_id, std::int64_t now_us) {
  const AssemblyStep* step = plan_.find_step(step_id);
  if (step == nullptr) return fault(now_us, "unknown_step", "assembly mark for unknown step '" + step_id + "'");
  try {
    mark_assembled(plan_, state_, step_id);
  } catch (const OrderingError& e) {
    return fault(now_us, "ordering_error", e.what());
  }
  append(now_us, AssemblyMark{step_id, step->part_label});
}

std::optional<RobotCommand> Orchestrator::dispatch(const OrchestratorInput& input,
                                                   std::int64_t arrival_us) {
  if (const auto* gaze = std::get_if<GazeInput>(&input)) {
    append(arrival_us, GazeSampleRef{gaze->sample.timestamp_us, gaze->sample.valid});
    std::optional<MeanGaze> mean;
    try {
      mean = window_.push(gaze->sample);
    } catch (const StreamOrderError& e) {
      fault(arrival_us, "stream_order", e.what());
      return std::nullopt;
    }
    if (!mean) return std::nullopt;
    append(arrival_us, *mean);
    const auto intent = on_mean_gaze(*mean, fresh_frame(Viewpoint::User, arrival_us), arrival_us);
    if (!intent) return std::nullopt;
    return handle_intent(*intent, arrival_us).second;
  }
  if (const auto* det = std::get_if<DetectionInput>(&input)) {
    try {
      det->frame.validate();
    } catch (const InputError& e) {
      fault(arrival_us, "bad_frame", e.what());
      return std::nullopt;
    }
    if (det->frame.source == Viewpoint::User) {
      user_frame_ = det->frame;
      user_frame_arrival_us_ = arrival_us;
    } else {
      robot_frame_ = det->frame;
    }
    return std::nullopt;
  }
  if (const auto* touch = std::get_if<TouchInput>(&input)) {
    auto result = on_touch(touch->label, arrival_us);
    if (const auto* intent = std::get_if<IntentEvent>(&result)) {
      return handle_intent(*intent, arrival_us).second;
    }
    ValidationRecord record{{IntentSource::Touch, touch->label, arrival_us, 0},
                            "UNKNOWN_PART",
                            {},
                            AnnouncementKind::Unavailable};
    append(arrival_us, record);
    append(arrival_us, Announcement{AnnouncementKind::Unavailable,
                                    "Object " + touch->label + " is not part of this assembly",
                                    arrival_us});
    return std::nullopt;
  }
  if (const auto* robot = std::get_if<RobotEventInput>(&input)) {
    on_robot_event(robot->event, arrival_us);
    return std::nullopt;
  }
  on_assembled(std::get<AssemblyInput>(input).step_id, arrival_us);
  return std::nullopt;
}

}  // namespace gear
