#include "gear/session.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>
#include <thread>

#include "gear/codec.hpp"
#include "gear/errors.hpp"
#include "gear/wire.hpp"

namespace gear {

namespace {

constexpr const char* kSimChannel = "sim";
constexpr const char* kEngineChannel = "engine";

/// Feeds inputs to the orchestrator and mirrors everything into the trace.
class TracedLoop {
 public:
  TracedLoop(Orchestrator& orchestrator, std::optional<TraceWriter>& writer)
      : orchestrator_(orchestrator), writer_(writer) {}

  std::optional<RobotCommand> feed(const OrchestratorInput& input, std::int64_t t_us) {
    if (writer_) {
      WireMessage msg = to_wire(input, t_us);
      msg.seq = ++in_seq_;
      writer_->append({t_us, Direction::In, kSimChannel, std::move(msg)});
    }
    const std::size_t before = orchestrator_.log().size();
    auto command = orchestrator_.dispatch(input, t_us);
    if (writer_) {
      const auto& log = orchestrator_.log();
      for (std::size_t i = before; i < log.size(); ++i) {
        if (auto out = outbound_for(log[i], orchestrator_.outstanding_command())) {
          out->seq = ++out_seq_;
          writer_->append({log[i].timestamp_us, Direction::Out, kEngineChannel, std::move(*out)});
        }
      }
    }
    return command;
  }

 private:
  Orchestrator& orchestrator_;
  std::optional<TraceWriter>& writer_;
  std::uint64_t in_seq_ = 0;
  std::uint64_t out_seq_ = 0;
};

bool all_assembled(const AssemblyPlan& plan, const PlanState& state) {
  return std::all_of(plan.steps().begin(), plan.steps().end(),
                     [&](const AssemblyStep& s) { return state.assembled.contains(s.step_id); });
}

}  // namespace

std::vector<std::string> SimulatedAssembler::take_due(std::int64_t t_us) {
  std::vector<std::string> due;
  for (auto it = due_.begin(); it != due_.end();) {
    if (it->second <= t_us) {
      due.push_back(it->first);
      it = due_.erase(it);
    } else {
      ++it;
    }
  }
  return due;
}

void SimulatedAssembler::schedule(const AssemblyPlan& plan, const PlanState& state,
                                  const Scene& scene, std::int64_t t_us) {
  for (const auto& step : plan.steps()) {
    if (state.assembled.contains(step.step_id) || due_.contains(step.step_id)) continue;
    const ScenePart* part = scene.find(step.part_label);
    if (part == nullptr || part->assembled || part->in_transit ||
        part->zone == Zone::RobotWorkspace) {
      continue;
    }
    if (step.source == PartSource::RobotWorkspace && !state.delivered.contains(step.step_id)) {
      continue;
    }
    const bool ready = std::all_of(step.prerequisites.begin(), step.prerequisites.end(),
                                   [&](const auto& p) { return state.assembled.contains(p); });
    if (ready) due_[step.step_id] = t_us + delay_us_;
  }
}

SessionResult run_sim(const AssemblyPlan& plan, const GazeScript& script, std::uint64_t seed,
                      const SimRunConfig& config, std::ostream* trace) {
  const StreamConfig& stream = config.orchestrator.stream;
  const std::int64_t tick = config.sim.tick_us;
  if (config.frame_period_us % tick != 0 || stream.sample_period_us() % tick != 0) {
    throw InputError("run-sim: frame and gaze periods must be multiples of the sim tick");
  }

  Simulator sim(plan, config.sim, seed);
  Orchestrator orchestrator(plan, config.orchestrator);
  const auto samples = scripted_gaze(sim.scene(), config.sim.cameras.user, script,
                                     config.gaze_sigma_px, stream.sample_rate_hz, seed + 1);
  const auto touches = scripted_touches(script, stream.sample_rate_hz);
  const auto annotations = script_annotations(script, stream.sample_rate_hz);
  const std::int64_t script_end = script_duration_us(script, stream.sample_rate_hz);

  std::optional<TraceWriter> writer;
  if (trace != nullptr) {
    TraceHeader header;
    header.producer = "run-sim";
    header.plan = plan_to_json(plan);
    header.seed = seed;
    header.orchestrator = config.orchestrator;
    header.session_start_us = 0;
    header.annotations = annotations;
    header.extra = {{"script", script_to_json(script)},
                    {"gaze_sigma_px", config.gaze_sigma_px},
                    {"scene", sim.scene()}};
    writer.emplace(*trace, header);
  }
  TracedLoop loop(orchestrator, writer);

  SessionResult result;
  result.initial_scene = sim.scene();
  orchestrator.start_session(0);

  SimulatedAssembler assembler(config.assemble_delay_us);
  std::size_t next_sample = 0;
  std::size_t next_touch = 0;

  auto dispatch = [&](const OrchestratorInput& input, std::int64_t t) {
    if (auto command = loop.feed(input, t)) {
      sim.command_fetch(command->label);
      if (sim.active_fetch()) result.fetches.push_back(*sim.active_fetch());
    }
  };

  std::int64_t t = 0;
  for (;; t += tick) {
    if (t > 0) {
      for (const auto& ev : sim.step(tick)) dispatch(RobotEventInput{ev}, t);
    }

    for (const auto& step_id : assembler.take_due(t)) {
      sim.mark_assembled(plan.step(step_id).part_label);
      dispatch(AssemblyInput{step_id}, t);
    }
    assembler.schedule(plan, orchestrator.plan_state(), sim.scene(), t);

    if (t % config.frame_period_us == 0) {
      dispatch(DetectionInput{sim.render(Viewpoint::User)}, t);
      dispatch(DetectionInput{sim.render(Viewpoint::Robot)}, t);
    }
    while (next_sample < samples.size() && samples[next_sample].timestamp_us <= t) {
      dispatch(GazeInput{samples[next_sample++]}, t);
    }
    while (next_touch < touches.size() && touches[next_touch].timestamp_us <= t) {
      dispatch(TouchInput{touches[next_touch++].label}, t);
    }

    const bool done = all_assembled(plan, orchestrator.plan_state()) && !sim.robot_busy() &&
                      orchestrator.phase() == RobotPhase::Idle;
    if (done || t >= script_end + config.tail_us) break;
  }

  result.log = orchestrator.log();
  result.metrics = session_metrics(result.log, plan, annotations);
  result.final_scene = sim.scene();
  result.end_us = t;
  return result;
}

SessionResult replay(const TraceContents& trace, double speed) {
  if (speed < 0.0) throw InputError("replay: speed must be >= 0");
  const AssemblyPlan plan = load_plan(trace.header.plan);
  Orchestrator orchestrator(plan, trace.header.orchestrator);
  orchestrator.start_session(trace.header.session_start_us);

  const auto wall_start = std::chrono::steady_clock::now();
  const std::int64_t trace_start = trace.header.session_start_us;
  for (const auto& record : trace.records) {
    if (record.dir != Direction::In) continue;
    if (speed > 0.0) {
      const auto offset = std::chrono::microseconds(static_cast<std::int64_t>(
          static_cast<double>(record.t_us - trace_start) / speed));
      std::this_thread::sleep_until(wall_start + offset);
    }
    std::optional<OrchestratorInput> input;
    try {
      input = to_orchestrator_input(record.msg);
    } catch (const ProtocolError&) {
      // The live gateway rejected the same payload, so the engine never saw it.
      continue;
    }
    if (input) orchestrator.dispatch(*input, record.t_us);
  }

  SessionResult result;
  result.log = orchestrator.log();
  result.metrics = session_metrics(result.log, plan, trace.header.annotations);
  result.truncated = trace.truncated;
  result.end_us = trace.records.empty() ? trace_start : trace.records.back().t_us;
  return result;
}

GazeScript default_fetch_script(const AssemblyPlan& plan, const SimRunConfig& config) {
  const Point2 rest = config.sim.cameras.user.to_pixels(config.sim.robot.home_pose);
  GazeScript script;
  script.entries.push_back({ScriptEntry::Kind::LookAt, {}, rest, 3000});
  for (const auto& id : plan.topological_order()) {
    const auto& step = plan.step(id);
    if (step.source != PartSource::RobotWorkspace) continue;
    script.entries.push_back({ScriptEntry::Kind::Fixate, step.part_label, {}, 1500});
    script.entries.push_back({ScriptEntry::Kind::LookAt, {}, rest, 18000});
  }
  return script;
}

}  // namespace gear
