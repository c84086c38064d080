#pragma once

#include <stdexcept>
#include <string>

namespace gear {

/// Bad user-supplied input: malformed files, schema violations, stream order.
/// The CLI maps this family to exit status 1; anything else is an internal fault.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StreamOrderError : public InputError {
 public:
  using InputError::InputError;
};

class PlanError : public InputError {
 public:
  PlanError(std::string step_id, const std::string& what)
      : InputError(what), step_id_(std::move(step_id)) {}

  const std::string& step_id() const noexcept { return step_id_; }

 private:
  std::string step_id_;
};

class OrderingError : public InputError {
 public:
  using InputError::InputError;
};

class ScriptError : public InputError {
 public:
  using InputError::InputError;
};

class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ProtocolError : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace gear
