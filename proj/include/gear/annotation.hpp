#pragma once

#include <cstdint>
#include <string>

namespace gear {

/// Ground truth of what the user meant to request over [from_us, to_us).
struct IntendedLabel {
  std::int64_t from_us = 0;
  std::int64_t to_us = 0;
  std::string label;

  bool operator==(const IntendedLabel&) const = default;
};

}  // namespace gear
