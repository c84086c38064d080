#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"

#include "gear/analysis.hpp"
#include "gear/assembly.hpp"
#include "gear/codec.hpp"
#include "gear/config.hpp"
#include "gear/errors.hpp"
#include "gear/gateway.hpp"
#include "gear/session.hpp"
#include "gear/sim.hpp"
#include "gear/trace.hpp"
#include "gear/wire.hpp"

namespace fs = std::filesystem;
using namespace gear;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitInternal = 2;

struct Common {
  std::uint64_t seed = 0;
  std::string plan = "gear_assembly";
  std::optional<std::string> config;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Scene and noise seed");
  cmd->add_option("--plan", c.plan, "Built-in plan name or plan JSON file");
  cmd->add_option("--config", c.config, "Config JSON (overrides $GEAR_CONFIG)");
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

std::string log_jsonl(const std::vector<EventLogRecord>& log) { return log_to_jsonl(log); }

// --- run-sim ----------------------------------------------------------------

struct RunSimArgs {
  Common common;
  std::optional<std::string> script;
  std::string out_dir = ".";
  std::string format = "csv";
  std::optional<double> jitter_px;
  std::optional<double> dropout_p;
  std::optional<double> gaze_sigma_px;
};

int run_sim_cmd(const RunSimArgs& a) {
  AppConfig config = load_app_config(a.common.config);
  if (a.jitter_px) config.run.sim.noise.jitter_px = *a.jitter_px;
  if (a.dropout_p) config.run.sim.noise.dropout_p = *a.dropout_p;
  if (a.gaze_sigma_px) config.run.gaze_sigma_px = *a.gaze_sigma_px;
  config = apply_config(nlohmann::json::object(), config);  // re-validate overrides
  const ReportFormat format = report_format_from_string(a.format);

  const AssemblyPlan plan = resolve_plan(a.common.plan);
  const GazeScript script =
      a.script ? load_script_file(*a.script) : default_fetch_script(plan, config.run);

  const fs::path dir(a.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir.string() + "'");

  std::ofstream trace(dir / "trace.jsonl", std::ios::binary | std::ios::trunc);
  if (!trace) throw InputError("cannot write '" + (dir / "trace.jsonl").string() + "'");
  const SessionResult result = run_sim(plan, script, a.common.seed, config.run, &trace);
  trace.close();

  write_file(dir / "events.jsonl", log_jsonl(result.log));
  const std::string metrics_name = format == ReportFormat::Csv ? "metrics.csv" : "metrics.jsonl";
  write_file(dir / metrics_name, export_report(result.metrics, format));

  std::cout << "plan " << plan.plan_id() << " seed " << a.common.seed << ": "
            << result.metrics.requests_total << " requests, " << result.metrics.requests_incorrect
            << " incorrect, completion " << result.metrics.completion_time_s << " s"
            << (result.metrics.complete ? "" : " (incomplete)") << "\n"
            << "wrote " << (dir / "trace.jsonl").string() << ", " << (dir / "events.jsonl").string()
            << ", " << (dir / metrics_name).string() << "\n";
  return kExitOk;
}

// --- serve ------------------------------------------------------------------

struct ServeArgs {
  Common common;
  std::optional<std::uint16_t> tcp_port;
  std::optional<std::uint16_t> ws_port;
  std::optional<std::string> host;
  std::optional<std::string> static_dir;
  std::string trace = "serve_trace.jsonl";
  double duration_s = 0.0;
  bool no_sim = false;
  bool no_auto_assemble = false;
};

int serve_cmd(const ServeArgs& a) {
  AppConfig config = load_app_config(a.common.config);
  if (a.tcp_port) config.gateway.tcp_port = *a.tcp_port;
  if (a.ws_port) config.gateway.ws_port = *a.ws_port;
  if (a.host) config.gateway.host = *a.host;
  if (a.static_dir) config.gateway.static_dir = *a.static_dir;
  if (a.duration_s < 0.0) throw InputError("--duration-s must be >= 0");

  GatewayOptions options{resolve_plan(a.common.plan), config, a.common.seed, a.trace,
                         !a.no_sim, !a.no_auto_assemble};
  Gateway gateway(std::move(options));
  gateway.start();
  std::cout << "serving plan " << a.common.plan << " on tcp " << config.gateway.host << ":"
            << gateway.tcp_port() << " and ws://" << config.gateway.host << ":"
            << gateway.ws_port() << config.gateway.ws_path << std::endl;
  if (a.duration_s > 0.0) {
    std::this_thread::sleep_for(std::chrono::duration<double>(a.duration_s));
    gateway.stop();
  } else {
    gateway.wait();
    gateway.stop();
  }
  std::cout << "stopped; trace in " << a.trace << "\n";
  return kExitOk;
}

// --- replay -----------------------------------------------------------------

struct ReplayArgs {
  Common common;
  std::string trace;
  double speed = 0.0;
  std::optional<std::string> out_dir;
  std::string format = "csv";
};

int replay_cmd(const ReplayArgs& a) {
  const ReportFormat format = report_format_from_string(a.format);
  const TraceContents contents = read_trace_file(a.trace);
  const SessionResult result = replay(contents, a.speed);
  if (a.out_dir) {
    const fs::path dir(*a.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory '" + dir.string() + "'");
    write_file(dir / "events.jsonl", log_jsonl(result.log));
    write_file(dir / (format == ReportFormat::Csv ? "metrics.csv" : "metrics.jsonl"),
               export_report(result.metrics, format));
  } else {
    std::cout << log_jsonl(result.log);
  }
  if (contents.truncated) {
    std::cerr << "warning: trace truncated at line " << contents.truncated_at_line
              << "; results are partial\n";
  }
  std::cerr << "replayed " << contents.records.size() << " records, "
            << result.metrics.requests_total << " requests\n";
  return kExitOk;
}

// --- analyze-gaze -------------------------------------------------------------

struct AnalyzeArgs {
  Common common;
  std::string trace;
  std::string target;
  std::optional<std::string> box;
  std::string format = "csv";
  std::optional<std::string> out;
  std::optional<std::string> heatmap;
  std::size_t discard = 10;
  std::size_t bins = 64;
};

BBox parse_box(const std::string& label, const std::string& text) {
  BBox b{label, 0, 0, 0, 0, 1.0};
  char c1 = 0, c2 = 0, c3 = 0;
  std::istringstream in(text);
  if (!(in >> b.x_min >> c1 >> b.y_min >> c2 >> b.x_max >> c3 >> b.y_max) || c1 != ',' ||
      c2 != ',' || c3 != ',' || !b.is_valid()) {
    throw InputError("--box expects x_min,y_min,x_max,y_max with min < max");
  }
  return b;
}

/// The target box as the user camera saw it at or before `t_us` (or the
/// first sighting when there is none before).
std::optional<BBox> target_box(const TraceContents& trace, const std::string& label,
                               std::int64_t t_us) {
  std::optional<BBox> before;
  std::optional<BBox> first;
  for (const auto& r : trace.records) {
    if (r.dir != Direction::In || r.msg.type != MessageType::DetectionFrame) continue;
    DetectionFrame frame;
    try {
      frame = r.msg.payload.get<DetectionFrame>();
    } catch (const std::exception&) {
      continue;
    }
    if (frame.source != Viewpoint::User) continue;
    for (const auto& b : frame.boxes) {
      if (b.label != label) continue;
      if (!first) first = b;
      if (r.t_us <= t_us) before = b;
    }
    if (r.t_us > t_us && first) break;
  }
  return before ? before : first;
}

int analyze_cmd(const AnalyzeArgs& a) {
  const ReportFormat format = report_format_from_string(a.format);
  const TraceContents contents = read_trace_file(a.trace);
  if (contents.truncated) {
    std::cerr << "warning: trace truncated at line " << contents.truncated_at_line << "\n";
  }

  std::vector<std::pair<std::int64_t, GazeSample>> samples;
  for (const auto& r : contents.records) {
    if (r.dir != Direction::In || r.msg.type != MessageType::GazeSample) continue;
    try {
      samples.emplace_back(r.t_us, r.msg.payload.get<GazeSample>());
    } catch (const std::exception&) {
    }
  }

  // Annotated intervals for the target are separate trials; otherwise the
  // whole trace is one trial.
  std::vector<IntendedLabel> trials;
  for (const auto& ann : contents.header.annotations) {
    if (ann.label == a.target) trials.push_back(ann);
  }
  if (trials.empty()) {
    trials.push_back({std::numeric_limits<std::int64_t>::min(),
                      std::numeric_limits<std::int64_t>::max(), a.target});
  }

  GazeAccuracyOptions options;
  options.discard_n = a.discard;
  options.heatmap_bins = a.bins;
  options.frame_width = contents.header.orchestrator.stream.frame_width;
  options.frame_height = contents.header.orchestrator.stream.frame_height;

  std::vector<GazeAccuracyReport> reports;
  for (const auto& trial : trials) {
    std::vector<GazeSample> used;
    for (const auto& [t, s] : samples) {
      if (s.timestamp_us >= trial.from_us && s.timestamp_us < trial.to_us) used.push_back(s);
    }
    std::optional<BBox> box;
    if (a.box) {
      box = parse_box(a.target, *a.box);
    } else {
      const std::int64_t at = used.empty() ? 0 : used.front().timestamp_us;
      box = target_box(contents, a.target, at);
    }
    if (!box) {
      throw InputError("no USER detection of '" + a.target + "' in the trace; pass --box");
    }
    reports.push_back(gaze_accuracy(used, *box, options));
  }

  const std::string text = export_report(reports, format);
  const std::string out =
      a.out ? *a.out : (format == ReportFormat::Csv ? "gaze_report.csv" : "gaze_report.jsonl");
  write_file(out, text);
  if (a.heatmap) write_file(*a.heatmap, export_heatmap_csv(reports.front()));
  for (const auto& r : reports) {
    std::cout << r.target_label << ": n=" << r.n_used << " median " << r.median_px
              << " px, within max-corner " << r.frac_within_max_corner << "\n";
  }
  std::cout << "wrote " << out << "\n";
  return kExitOk;
}

// --- metrics ----------------------------------------------------------------

struct MetricsArgs {
  Common common;
  std::string trace;
  std::string format = "csv";
  std::optional<std::string> out;
};

int metrics_cmd(const MetricsArgs& a) {
  const ReportFormat format = report_format_from_string(a.format);
  const TraceContents contents = read_trace_file(a.trace);
  const SessionResult result = replay(contents, 0.0);
  const std::string text = export_report(result.metrics, format);
  if (a.out) {
    write_file(*a.out, text);
  } else {
    std::cout << text;
  }
  if (contents.truncated) {
    std::cerr << "warning: trace truncated at line " << contents.truncated_at_line << "\n";
  }
  return kExitOk;
}

// --- validate-plan ----------------------------------------------------------

struct ValidateArgs {
  Common common;
  std::optional<std::string> file;
};

int validate_cmd(const ValidateArgs& a) {
  const std::string target = a.file ? *a.file : a.common.plan;
  const AssemblyPlan plan = resolve_plan(target);
  std::cout << "plan " << plan.plan_id() << ": " << plan.steps().size() << " steps, "
            << plan.robot_step_count() << " robot-sourced\norder:";
  for (const auto& id : plan.topological_order()) std::cout << " " << id;
  std::cout << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gear: gaze-driven part-request engine"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  RunSimArgs run_sim_args;
  auto* run_sim_app = app.add_subcommand("run-sim", "Simulated session in virtual time");
  add_common(run_sim_app, run_sim_args.common);
  run_sim_app->add_option("--script", run_sim_args.script, "Gaze script JSON");
  run_sim_app->add_option("--out", run_sim_args.out_dir, "Output directory");
  run_sim_app->add_option("--format", run_sim_args.format, "Metrics format: csv or jsonl");
  run_sim_app->add_option("--jitter-px", run_sim_args.jitter_px, "Detection corner jitter (px)");
  run_sim_app->add_option("--dropout-p", run_sim_args.dropout_p, "Detection dropout probability");
  run_sim_app->add_option("--gaze-sigma-px", run_sim_args.gaze_sigma_px, "Gaze noise (px)");

  ServeArgs serve_args;
  auto* serve_app = app.add_subcommand("serve", "Live gateway (raw TCP and WebSocket)");
  add_common(serve_app, serve_args.common);
  serve_app->add_option("--tcp-port", serve_args.tcp_port, "Raw TCP port (0 = ephemeral)");
  serve_app->add_option("--ws-port", serve_args.ws_port, "WebSocket port (0 = ephemeral)");
  serve_app->add_option("--host", serve_args.host, "Listen address");
  serve_app->add_option("--static-dir", serve_args.static_dir, "Static assets for plain GET");
  serve_app->add_option("--trace", serve_args.trace, "Trace file to write");
  serve_app->add_option("--duration-s", serve_args.duration_s, "Stop after this many seconds");
  serve_app->add_flag("--no-sim", serve_args.no_sim, "Do not simulate robot and cameras");
  serve_app->add_flag("--no-auto-assemble", serve_args.no_auto_assemble,
                      "Do not simulate the user assembling delivered parts");

  ReplayArgs replay_args;
  auto* replay_app = app.add_subcommand("replay", "Re-drive the engine from a trace");
  add_common(replay_app, replay_args.common);
  replay_app->add_option("trace", replay_args.trace, "Trace file")->required();
  replay_app->add_option("--speed", replay_args.speed, "Pacing factor; 0 = as fast as possible");
  replay_app->add_option("--out", replay_args.out_dir, "Output directory (default: log to stdout)");
  replay_app->add_option("--format", replay_args.format, "Metrics format: csv or jsonl");

  AnalyzeArgs analyze_args;
  auto* analyze_app = app.add_subcommand("analyze-gaze", "Gaze accuracy against a target box");
  add_common(analyze_app, analyze_args.common);
  analyze_app->add_option("trace", analyze_args.trace, "Trace file")->required();
  analyze_app->add_option("--target", analyze_args.target, "Target part label")->required();
  analyze_app->add_option("--box", analyze_args.box, "Target box x_min,y_min,x_max,y_max");
  analyze_app->add_option("--format", analyze_args.format, "csv or jsonl");
  analyze_app->add_option("--out", analyze_args.out, "Report path");
  analyze_app->add_option("--heatmap", analyze_args.heatmap, "Heatmap CSV path");
  analyze_app->add_option("--discard", analyze_args.discard, "Leading samples to discard");
  analyze_app->add_option("--bins", analyze_args.bins, "Heatmap bins per axis");

  MetricsArgs metrics_args;
  auto* metrics_app = app.add_subcommand("metrics", "Session metrics from a trace");
  add_common(metrics_app, metrics_args.common);
  metrics_app->add_option("trace", metrics_args.trace, "Trace file")->required();
  metrics_app->add_option("--format", metrics_args.format, "csv or jsonl");
  metrics_app->add_option("--out", metrics_args.out, "Output path (default: stdout)");

  ValidateArgs validate_args;
  auto* validate_app = app.add_subcommand("validate-plan", "Check a plan file");
  add_common(validate_app, validate_args.common);
  validate_app->add_option("file", validate_args.file, "Plan file or built-in name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitInput;
  }

  try {
    if (*run_sim_app) return run_sim_cmd(run_sim_args);
    if (*serve_app) return serve_cmd(serve_args);
    if (*replay_app) return replay_cmd(replay_args);
    if (*analyze_app) return analyze_cmd(analyze_args);
    if (*metrics_app) return metrics_cmd(metrics_args);
    if (*validate_app) return validate_cmd(validate_args);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const CapacityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
