#include "gear/robot_events.hpp"

#include "gear/errors.hpp"

namespace gear {

const char* to_string(RobotEventKind k) {
  switch (k) {
    case RobotEventKind::PickedUp: return "PICKED_UP";
    case RobotEventKind::Delivered: return "DELIVERED";
    case RobotEventKind::Returned: return "RETURNED";
    case RobotEventKind::Fault: return "FAULT";
  }
  return "?";
}

RobotEventKind robot_event_kind_from_string(const std::string& s) {
  for (auto k : {RobotEventKind::PickedUp, RobotEventKind::Delivered, RobotEventKind::Returned,
                 RobotEventKind::Fault}) {
    if (s == to_string(k)) return k;
  }
  throw InputError("unknown robot event '" + s + "'");
}

}  // namespace gear
