#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>

namespace gear {

/// One raw tracker sample in scene-camera pixels.
struct GazeSample {
  std::int64_t timestamp_us = 0;
  double x = 0.0;
  double y = 0.0;
  bool valid = true;

  bool operator==(const GazeSample&) const = default;
};

struct StreamConfig {
  int frame_width = 1920;
  int frame_height = 1080;
  double sample_rate_hz = 20.0;
  std::size_t window_size = 15;

  /// Throws InputError when a field is out of range.
  void validate() const;
  std::int64_t sample_period_us() const;

  bool operator==(const StreamConfig&) const = default;
};

/// Arithmetic mean of the most recent `window_size` valid samples.
struct MeanGaze {
  double x_mean = 0.0;
  double y_mean = 0.0;
  std::size_t n = 0;
  std::int64_t span_us = 0;
  /// Timestamp of the newest sample in the window.
  std::int64_t timestamp_us = 0;

  bool operator==(const MeanGaze&) const = default;
};

/// Sliding window over valid gaze samples. Emits one MeanGaze per push once
/// full (overlapping windows). Invalid samples are checked for ordering and
/// then dropped; they never enter the window.
class GazeWindow {
 public:
  explicit GazeWindow(StreamConfig config = {});

  /// Throws StreamOrderError when the timestamp does not exceed the previous one.
  std::optional<MeanGaze> push(const GazeSample& sample);

  /// Empties the window. Ordering state is kept so a reset cannot be used to
  /// rewind the stream.
  void reset();

  std::size_t size() const { return samples_.size(); }
  const StreamConfig& config() const { return config_; }

 private:
  StreamConfig config_;
  std::deque<GazeSample> samples_;
  std::optional<std::int64_t> last_timestamp_us_;
};

}  // namespace gear
