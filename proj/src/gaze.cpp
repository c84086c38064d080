#include "gear/gaze.hpp"

#include <cmath>
#include <string>

#include "gear/errors.hpp"

namespace gear {

void StreamConfig::validate() const {
  if (frame_width <= 0 || frame_height <= 0) {
    throw InputError("stream config: frame dimensions must be positive");
  }
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
    throw InputError("stream config: sample_rate_hz must be > 0");
  }
  if (window_size < 1) {
    throw InputError("stream config: window_size must be >= 1");
  }
}

std::int64_t StreamConfig::sample_period_us() const {
  return static_cast<std::int64_t>(std::llround(1e6 / sample_rate_hz));
}

GazeWindow::GazeWindow(StreamConfig config) : config_(config) { config_.validate(); }

std::optional<MeanGaze> GazeWindow::push(const GazeSample& sample) {
  if (last_timestamp_us_ && sample.timestamp_us <= *last_timestamp_us_) {
    throw StreamOrderError("gaze sample at " + std::to_string(sample.timestamp_us) +
                           " us does not follow " + std::to_string(*last_timestamp_us_) + " us");
  }
  last_timestamp_us_ = sample.timestamp_us;
  if (!sample.valid) return std::nullopt;

  samples_.push_back(sample);
  if (samples_.size() > config_.window_size) samples_.pop_front();
  if (samples_.size() < config_.window_size) return std::nullopt;

  // Recomputed from scratch each time: a running sum would accumulate drift
  // over long sessions.
  double sx = 0.0;
  double sy = 0.0;
  for (const auto& s : samples_) {
    sx += s.x;
    sy += s.y;
  }
  const auto n = static_cast<double>(samples_.size());
  MeanGaze mean;
  mean.x_mean = sx / n;
  mean.y_mean = sy / n;
  mean.n = samples_.size();
  mean.span_us = samples_.back().timestamp_us - samples_.front().timestamp_us;
  mean.timestamp_us = samples_.back().timestamp_us;
  return mean;
}

void GazeWindow::reset() { samples_.clear(); }

}  // namespace gear
