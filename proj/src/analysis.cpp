#include "gear/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "gear/errors.hpp"
#include "json.hpp"

namespace gear {

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

GazeAccuracyReport gaze_accuracy(std::span<const GazeSample> trace, const BBox& target,
                                 const GazeAccuracyOptions& options) {
  if (trace.size() <= options.discard_n) {
    throw InputError("gaze accuracy: trace has " + std::to_string(trace.size()) +
                     " samples, need more than " + std::to_string(options.discard_n));
  }
  if (options.heatmap_bins == 0 || options.frame_width <= 0 || options.frame_height <= 0) {
    throw InputError("gaze accuracy: heatmap bins and frame size must be positive");
  }

  GazeAccuracyReport report;
  report.target_label = target.label;
  report.x_bound_px = (target.x_max - target.x_min) / 2.0;
  report.y_bound_px = (target.y_max - target.y_min) / 2.0;
  report.max_corner_px = std::hypot(report.x_bound_px, report.y_bound_px);
  const std::size_t bins = options.heatmap_bins;
  report.heatmap.assign(bins, std::vector<std::uint64_t>(bins, 0));

  const Point2 center = bbox_center(target);
  std::size_t in_x = 0;
  std::size_t in_y = 0;
  std::size_t in_r = 0;
  auto bin_of = [bins](double v, int extent) {
    const double b = std::floor(v / extent * static_cast<double>(bins));
    return static_cast<std::size_t>(std::clamp(b, 0.0, static_cast<double>(bins - 1)));
  };

  for (const auto& s : trace.subspan(options.discard_n)) {
    if (!s.valid) continue;
    const double dx = s.x - center.x;
    const double dy = s.y - center.y;
    const double d = std::hypot(dx, dy);
    report.distances.push_back(d);
    if (std::abs(dx) <= report.x_bound_px) ++in_x;
    if (std::abs(dy) <= report.y_bound_px) ++in_y;
    if (d <= report.max_corner_px) ++in_r;
    ++report.heatmap[bin_of(s.y, options.frame_height)][bin_of(s.x, options.frame_width)];
  }

  report.n_used = report.distances.size();
  if (report.n_used > 0) {
    std::vector<double> sorted = report.distances;
    std::sort(sorted.begin(), sorted.end());
    report.median_px = quantile_sorted(sorted, 0.5);
    report.iqr_px = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    const auto n = static_cast<double>(report.n_used);
    report.frac_within_x_bound = static_cast<double>(in_x) / n;
    report.frac_within_y_bound = static_cast<double>(in_y) / n;
    report.frac_within_max_corner = static_cast<double>(in_r) / n;
  }
  return report;
}

SessionMetrics session_metrics(std::span<const EventLogRecord> log, const AssemblyPlan& plan,
                               std::span<const IntendedLabel> annotations) {
  const auto start = std::find_if(log.begin(), log.end(), [](const EventLogRecord& r) {
    return std::holds_alternative<SessionStart>(r.payload);
  });
  if (start == log.end()) throw InputError("session metrics: log has no session start");
  const std::int64_t start_us = start->timestamp_us;

  SessionMetrics m;
  m.annotated = !annotations.empty();
  std::optional<std::int64_t> last_mark_us;
  std::set<std::string> assembled;

  for (const auto& r : log) {
    if (const auto* mark = std::get_if<AssemblyMark>(&r.payload)) {
      assembled.insert(mark->step_id);
      last_mark_us = std::max(last_mark_us.value_or(r.timestamp_us), r.timestamp_us);
    } else if (const auto* v = std::get_if<ValidationRecord>(&r.payload)) {
      if (v->announced != AnnouncementKind::Selected) continue;
      ++m.requests_total;
      if (!m.annotated) continue;
      const auto t = v->intent.timestamp_us;
      const auto hit = std::find_if(annotations.begin(), annotations.end(), [t](const auto& a) {
        return a.from_us <= t && t < a.to_us;
      });
      if (hit == annotations.end() || hit->label != v->intent.label) ++m.requests_incorrect;
    }
  }

  if (last_mark_us) m.completion_time_s = static_cast<double>(*last_mark_us - start_us) / 1e6;
  m.complete = std::all_of(plan.steps().begin(), plan.steps().end(), [&](const AssemblyStep& s) {
    return s.source != PartSource::RobotWorkspace || assembled.contains(s.step_id);
  });
  if (m.requests_total > 0) {
    m.error_rate = static_cast<double>(m.requests_incorrect) / static_cast<double>(m.requests_total);
  }
  return m;
}

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "csv" || s == "CSV") return ReportFormat::Csv;
  if (s == "jsonl" || s == "JSONL") return ReportFormat::Jsonl;
  throw InputError("unknown report format '" + s + "'");
}

namespace {

// Shortest text that reads back to the same double.
std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

nlohmann::json gaze_report_json(const GazeAccuracyReport& r) {
  return {{"target_label", r.target_label},
          {"n_used", r.n_used},
          {"median_px", r.median_px},
          {"iqr_px", r.iqr_px},
          {"x_bound_px", r.x_bound_px},
          {"y_bound_px", r.y_bound_px},
          {"max_corner_px", r.max_corner_px},
          {"frac_within_x_bound", r.frac_within_x_bound},
          {"frac_within_y_bound", r.frac_within_y_bound},
          {"frac_within_max_corner", r.frac_within_max_corner},
          {"heatmap_bins", r.heatmap.size()},
          {"distances", r.distances},
          {"heatmap", r.heatmap}};
}

nlohmann::json metrics_json(const SessionMetrics& m) {
  return {{"completion_time_s", m.completion_time_s}, {"requests_total", m.requests_total},
          {"requests_incorrect", m.requests_incorrect}, {"error_rate", m.error_rate},
          {"complete", m.complete},                      {"annotated", m.annotated}};
}

}  // namespace

std::string export_report(std::span<const GazeAccuracyReport> reports, ReportFormat format) {
  std::string out;
  if (format == ReportFormat::Jsonl) {
    for (const auto& r : reports) out += gaze_report_json(r).dump() + "\n";
    return out;
  }
  out = std::string(kGazeReportCsvHeader) + "\n";
  for (const auto& r : reports) {
    out += r.target_label + "," + std::to_string(r.n_used) + "," + fmt_double(r.median_px) + "," +
           fmt_double(r.iqr_px) + "," + fmt_double(r.x_bound_px) + "," + fmt_double(r.y_bound_px) +
           "," + fmt_double(r.max_corner_px) + "," + fmt_double(r.frac_within_x_bound) + "," +
           fmt_double(r.frac_within_y_bound) + "," + fmt_double(r.frac_within_max_corner) + "," +
           std::to_string(r.heatmap.size()) + "\n";
  }
  return out;
}

std::string export_report(const SessionMetrics& m, ReportFormat format) {
  if (format == ReportFormat::Jsonl) return metrics_json(m).dump() + "\n";
  return std::string(kSessionMetricsCsvHeader) + "\n" + fmt_double(m.completion_time_s) + "," +
         std::to_string(m.requests_total) + "," + std::to_string(m.requests_incorrect) + "," +
         fmt_double(m.error_rate) + "," + (m.complete ? "true" : "false") + "," +
         (m.annotated ? "true" : "false") + "\n";
}

std::string export_heatmap_csv(const GazeAccuracyReport& report) {
  std::string out;
  for (const auto& row : report.heatmap) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out += ",";
      out += std::to_string(row[i]);
    }
    out += "\n";
  }
  return out;
}

std::vector<GazeAccuracyReport> parse_gaze_reports_jsonl(const std::string& document) {
  std::vector<GazeAccuracyReport> reports;
  std::istringstream in(document);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      GazeAccuracyReport r;
      r.target_label = j.at("target_label").get<std::string>();
      r.n_used = j.at("n_used").get<std::size_t>();
      r.median_px = j.at("median_px").get<double>();
      r.iqr_px = j.at("iqr_px").get<double>();
      r.x_bound_px = j.at("x_bound_px").get<double>();
      r.y_bound_px = j.at("y_bound_px").get<double>();
      r.max_corner_px = j.at("max_corner_px").get<double>();
      r.frac_within_x_bound = j.at("frac_within_x_bound").get<double>();
      r.frac_within_y_bound = j.at("frac_within_y_bound").get<double>();
      r.frac_within_max_corner = j.at("frac_within_max_corner").get<double>();
      r.distances = j.at("distances").get<std::vector<double>>();
      r.heatmap = j.at("heatmap").get<std::vector<std::vector<std::uint64_t>>>();
      reports.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("gaze report: ") + e.what());
    }
  }
  return reports;
}

SessionMetrics parse_session_metrics_jsonl(const std::string& document) {
  try {
    const auto j = nlohmann::json::parse(document);
    SessionMetrics m;
    m.completion_time_s = j.at("completion_time_s").get<double>();
    m.requests_total = j.at("requests_total").get<std::size_t>();
    m.requests_incorrect = j.at("requests_incorrect").get<std::size_t>();
    m.error_rate = j.at("error_rate").get<double>();
    m.complete = j.at("complete").get<bool>();
    m.annotated = j.at("annotated").get<bool>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("session metrics: ") + e.what());
  }
}

}  // namespace gear
