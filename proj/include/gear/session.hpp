#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "gear/analysis.hpp"
#include "gear/config.hpp"
#include "gear/orchestrator.hpp"
#include "gear/sim.hpp"
#include "gear/trace.hpp"

namespace gear {

struct SessionResult {
  std::vector<EventLogRecord> log;
  SessionMetrics metrics;
  /// Fetch timetables as planned by the simulator (run-sim only).
  std::vector<FetchPlan> fetches;
  Scene initial_scene;
  Scene final_scene;
  std::int64_t end_us = 0;
  bool truncated = false;
};

/// Stand-in for the person at the bench: any loose part within reach
/// (user station or shared zone) whose prerequisites are assembled gets
/// built `delay_us` later.
class SimulatedAssembler {
 public:
  explicit SimulatedAssembler(std::int64_t delay_us) : delay_us_(delay_us) {}

  /// Steps whose assembly is due at `t_us`, in step-id order.
  std::vector<std::string> take_due(std::int64_t t_us);
  void schedule(const AssemblyPlan& plan, const PlanState& state, const Scene& scene,
                std::int64_t t_us);

 private:
  std::int64_t delay_us_;
  std::map<std::string, std::int64_t> due_;
};

/// End-to-end simulated session in virtual time. Every orchestrator input
/// and every broadcast is appended to `trace` when given.
///
/// Per tick the order is fixed: robot events, assembly marks, detection
/// frames (user, then robot), gaze samples, touches. The run ends when every
/// step is assembled and the robot is idle, or `tail_us` after the script.
SessionResult run_sim(const AssemblyPlan& plan, const GazeScript& script, std::uint64_t seed,
                      const SimRunConfig& config, std::ostream* trace = nullptr);

/// Re-drives a fresh orchestrator with the inbound records of a trace.
/// speed == 0 runs in virtual time; speed > 0 sleeps to reproduce the
/// recorded pacing scaled by 1/speed.
SessionResult replay(const TraceContents& trace, double speed = 0.0);

/// The default four-fetch script for the built-in gear plans: glance at an
/// empty spot, then for each robot-sourced part in plan order fixate it and
/// look back at the empty spot while the robot works.
GazeScript default_fetch_script(const AssemblyPlan& plan, const SimRunConfig& config);

}  // namespace gear
