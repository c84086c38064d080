#pragma once

#include <cstdint>
#include <string>

#include "gear/perception.hpp"

namespace gear {

enum class RobotEventKind { PickedUp, Delivered, Returned, Fault };

const char* to_string(RobotEventKind k);
RobotEventKind robot_event_kind_from_string(const std::string& s);

/// Progress report from the robot (simulated or live) for the current fetch.
struct RobotEvent {
  RobotEventKind kind = RobotEventKind::PickedUp;
  std::string label;
  std::int64_t timestamp_us = 0;
  std::string reason;  // set for faults

  bool operator==(const RobotEvent&) const = default;
};

/// Fetch order handed to the robot once a request is announced.
struct RobotCommand {
  std::string step_id;
  std::string label;
  BBox target;  // robot-view box from object alignment
  std::int64_t issued_us = 0;

  bool operator==(const RobotCommand&) const = default;
};

}  // namespace gear
