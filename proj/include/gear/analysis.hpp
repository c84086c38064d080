#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gear/annotation.hpp"
#include "gear/assembly.hpp"
#include "gear/gaze.hpp"
#include "gear/orchestrator.hpp"
#include "gear/perception.hpp"

namespace gear {

struct GazeAccuracyOptions {
  std::size_t discard_n = 10;
  std::size_t heatmap_bins = 64;
  int frame_width = 1920;
  int frame_height = 1080;
};

/// Accuracy of one fixation trial against the target box.
///
/// Selection thresholds around the box center: half-width along x, half-height
/// along y, and the center-to-corner radius. Fractions are taken over the used
/// samples (after the discard and with invalid samples removed).
struct GazeAccuracyReport {
  std::string target_label;
  std::size_t n_used = 0;
  std::vector<double> distances;  // pixels, in trace order
  double median_px = 0.0;
  double iqr_px = 0.0;
  double x_bound_px = 0.0;
  double y_bound_px = 0.0;
  double max_corner_px = 0.0;
  double frac_within_x_bound = 0.0;
  double frac_within_y_bound = 0.0;
  double frac_within_max_corner = 0.0;
  /// heatmap[row][col]; rows follow y, columns follow x. Out-of-frame samples
  /// land in the nearest edge bin so the total equals n_used.
  std::vector<std::vector<std::uint64_t>> heatmap;

  bool operator==(const GazeAccuracyReport&) const = default;
};

/// Throws InputError when the trace has no more than discard_n samples.
GazeAccuracyReport gaze_accuracy(std::span<const GazeSample> trace, const BBox& target,
                                 const GazeAccuracyOptions& options = {});

/// Linear-interpolation quantile of already sorted values, q in [0,1].
double quantile_sorted(std::span<const double> sorted, double q);

struct SessionMetrics {
  double completion_time_s = 0.0;
  std::size_t requests_total = 0;
  std::size_t requests_incorrect = 0;
  double error_rate = 0.0;
  /// All robot-sourced steps were assembled.
  bool complete = false;
  /// Intended-label ground truth was available.
  bool annotated = false;

  bool operator==(const SessionMetrics&) const = default;
};

/// Completion time runs from the session start to the last assembly mark. A
/// request is an intent that was announced as SELECTED; it is incorrect when
/// no annotation covering its timestamp names the same label. Throws
/// InputError when the log has no session start.
SessionMetrics session_metrics(std::span<const EventLogRecord> log, const AssemblyPlan& plan,
                               std::span<const IntendedLabel> annotations = {});

enum class ReportFormat { Csv, Jsonl };

ReportFormat report_format_from_string(const std::string& s);

// Column order of the CSV exports. JSONL lines carry the same keys, plus
// `distances` and `heatmap` for gaze reports.
inline constexpr const char* kGazeReportCsvHeader =
    "target_label,n_used,median_px,iqr_px,x_bound_px,y_bound_px,max_corner_px,"
    "frac_within_x_bound,frac_within_y_bound,frac_within_max_corner,heatmap_bins";
inline constexpr const char* kSessionMetricsCsvHeader =
    "completion_time_s,requests_total,requests_incorrect,error_rate,complete,annotated";

/// One CSV row or JSONL line per trial.
std::string export_report(std::span<const GazeAccuracyReport> reports, ReportFormat format);
std::string export_report(const SessionMetrics& metrics, ReportFormat format);
/// Heatmap as CSV, one line per grid row.
std::string export_heatmap_csv(const GazeAccuracyReport& report);

std::vector<GazeAccuracyReport> parse_gaze_reports_jsonl(const std::string& document);
SessionMetrics parse_session_metrics_jsonl(const std::string& document);

}  // namespace gear
