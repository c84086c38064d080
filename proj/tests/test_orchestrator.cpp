#include <algorithm>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"

#include "gear/assembly.hpp"
#include "gear/errors.hpp"
#include "gear/orchestrator.hpp"

using namespace gear;

namespace {

AssemblyPlan default_plan() { return *builtin_plan("gear_assembly"); }

DetectionFrame user_frame(std::int64_t t = 0) {
  return {Viewpoint::User,
          t,
          {{"gear_large", 100, 100, 300, 300, 0.9},
           {"gear_medium", 400, 100, 560, 260, 0.9},
           {"gear_small", 700, 100, 820, 220, 0.9},
           {"cap_grey", 1000, 100, 1100, 200, 0.9},
           {"peg_grey", 1300, 100, 1400, 200, 0.9}},
          1920,
          1080};
}

DetectionFrame robot_frame(std::int64_t t = 0) {
  return {Viewpoint::Robot,
          t,
          {{"gear_large", 100, 100, 200, 200, 0.9},
           {"gear_medium", 300, 100, 380, 180, 0.9},
           {"gear_small", 500, 100, 560, 160, 0.9},
           {"cap_grey", 700, 100, 750, 150, 0.9}},
          1280,
          720};
}

MeanGaze at(double x, double y, std::int64_t t = 0) { return {x, y, 15, 700'000, t}; }

RobotEvent ev(RobotEventKind k, const std::string& label) { return {k, label, 0, {}}; }

template <typename T>
std::vector<T> records_of(const Orchestrator& o) {
  std::vector<T> out;
  for (const auto& r : o.log()) {
    if (const auto* p = std::get_if<T>(&r.payload)) out.push_back(*p);
  }
  return out;
}

/// An orchestrator with both camera frames in and peg_grey assembled.
Orchestrator ready(OrchestratorConfig cfg = {}) {
  Orchestrator o(default_plan(), cfg);
  o.start_session(0);
  o.dispatch(DetectionInput{user_frame()}, 0);
  o.dispatch(DetectionInput{robot_frame()}, 0);
  o.dispatch(AssemblyInput{"peg_grey"}, 0);
  return o;
}

/// Feeds n valid samples at (x, y), 50 ms apart from t0; returns commands.
std::vector<RobotCommand> look(Orchestrator& o, double x, double y, std::int64_t t0, int n) {
  std::vector<RobotCommand> out;
  for (int i = 0; i < n; ++i) {
    const std::int64_t t = t0 + i * 50'000;
    if (auto c = o.dispatch(GazeInput{{t, x, y, true}}, t)) out.push_back(*c);
  }
  return out;
}

void run_fetch(Orchestrator& o, const std::string& label, std::int64_t t) {
  o.dispatch(RobotEventInput{ev(RobotEventKind::PickedUp, label)}, t);
  o.dispatch(RobotEventInput{ev(RobotEventKind::Delivered, label)}, t + 1);
  o.dispatch(RobotEventInput{ev(RobotEventKind::Returned, label)}, t + 2);
}

}  // namespace

TEST_CASE("selected announcement text is verbatim") {
  CHECK(selected_text("gear_large") == "Object gear_large selected; Bringing now");
}

TEST_CASE("first emission resolving to a part yields a gaze intent") {
  Orchestrator o(default_plan(), {});
  const auto frame = user_frame();
  const auto intent = o.on_mean_gaze(at(760, 160, 5), &frame, 5);
  REQUIRE(intent);
  CHECK(intent->source == IntentSource::Gaze);
  CHECK(intent->label == "gear_small");
  CHECK(intent->dwell_emissions == 1);
  CHECK(intent->timestamp_us == 5);
}

TEST_CASE("dwell threshold 3 over A,A,B,A,A,A fires on the sixth emission") {
  OrchestratorConfig cfg;
  cfg.dwell_threshold = 3;
  Orchestrator o(default_plan(), cfg);
  const auto frame = user_frame();
  const MeanGaze a = at(200, 200), b = at(480, 180);
  const std::vector<MeanGaze> seq{a, a, b, a, a, a};
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto intent = o.on_mean_gaze(seq[i], &frame, static_cast<std::int64_t>(i) * 50'000);
    if (i < 5) {
      CHECK_FALSE(intent);
    } else {
      REQUIRE(intent);
      CHECK(intent->label == "gear_large");
      CHECK(intent->dwell_emissions == 3);
    }
  }
}

TEST_CASE("emission resolving to nothing resets the counter") {
  OrchestratorConfig cfg;
  cfg.dwell_threshold = 2;
  Orchestrator o(default_plan(), cfg);
  const auto frame = user_frame();
  CHECK_FALSE(o.on_mean_gaze(at(200, 200), &frame, 0));
  CHECK_FALSE(o.on_mean_gaze(at(1800, 900), &frame, 1));
  CHECK_FALSE(o.on_mean_gaze(at(200, 200), &frame, 2));
  CHECK(o.on_mean_gaze(at(200, 200), &frame, 3));
  // No frame at all behaves like no match.
  CHECK_FALSE(o.on_mean_gaze(at(200, 200), nullptr, 4));
  CHECK_FALSE(o.on_mean_gaze(at(200, 200), &frame, 5));
}

TEST_CASE("gaze intents always carry at least the dwell threshold") {
  std::mt19937_64 rng(11);
  for (int threshold = 1; threshold <= 4; ++threshold) {
    OrchestratorConfig cfg;
    cfg.dwell_threshold = threshold;
    cfg.refractory_us = 0;
    Orchestrator o(default_plan(), cfg);
    const auto frame = user_frame();
    std::uniform_int_distribution<int> pick(0, 2);
    const MeanGaze targets[] = {at(200, 200), at(480, 180), at(1800, 900)};
    for (int i = 0; i < 500; ++i) {
      if (auto intent = o.on_mean_gaze(targets[pick(rng)], &frame, i)) {
        CHECK(intent->dwell_emissions >= threshold);
      }
    }
  }
}

TEST_CASE("refractory period suppresses the same label for 2 s") {
  Orchestrator o(default_plan(), {});
  const auto frame = user_frame();
  CHECK(o.on_mean_gaze(at(200, 200), &frame, 0));
  CHECK_FALSE(o.on_mean_gaze(at(200, 200), &frame, 1'999'999));
  CHECK(o.on_mean_gaze(at(480, 180), &frame, 1'000'000));  // other label unaffected
  CHECK(o.on_mean_gaze(at(200, 200), &frame, 2'000'000));
}

TEST_CASE("touch intents") {
  Orchestrator o(default_plan(), {});
  const auto ok = o.on_touch("peg_grey", 7);
  REQUIRE(std::holds_alternative<IntentEvent>(ok));
  CHECK(std::get<IntentEvent>(ok) == IntentEvent{IntentSource::Touch, "peg_grey", 7, 0});
  const auto bad = o.on_touch("spanner", 7);
  REQUIRE(std::holds_alternative<UnknownPart>(bad));
  CHECK(std::get<UnknownPart>(bad).label == "spanner");
}

TEST_CASE("allowed intent announces SELECTED and issues one fetch") {
  Orchestrator o = ready();
  const auto [ann, cmd] = o.handle_intent({IntentSource::Touch, "gear_large", 10, 0}, 10);
  CHECK(ann.kind == AnnouncementKind::Selected);
  CHECK(ann.text == "Object gear_large selected; Bringing now");
  REQUIRE(cmd);
  CHECK(cmd->label == "gear_large");
  CHECK(cmd->step_id == "gear_large");
  CHECK(cmd->target == robot_frame().boxes[0]);
  CHECK(o.phase() == RobotPhase::Retrieving);
  CHECK(o.outstanding_command() == cmd);
}

TEST_CASE("unmet prerequisites announce PREREQUISITE listing parts in order") {
  Orchestrator o(default_plan(), {});
  o.dispatch(DetectionInput{robot_frame()}, 0);
  const auto [ann, cmd] = o.handle_intent({IntentSource::Touch, "gear_large", 0, 0}, 0);
  CHECK(ann.kind == AnnouncementKind::Prerequisite);
  CHECK(ann.text == "Object gear_large needs peg_grey assembled first");
  CHECK_FALSE(cmd);
  const auto [ann2, cmd2] = o.handle_intent({IntentSource::Touch, "cap_grey", 0, 0}, 0);
  CHECK(ann2.text ==
        "Object cap_grey needs peg_grey, gear_large, gear_medium, gear_small assembled first");
  const auto recs = records_of<ValidationRecord>(o);
  REQUIRE(recs.size() == 2);
  CHECK(recs[1].outcome == "PREREQUISITE_NEEDED");
  CHECK(recs[1].pending ==
        std::vector<std::string>{"peg_grey", "gear_large", "gear_medium", "gear_small"});
  CHECK(o.phase() == RobotPhase::Idle);
}

TEST_CASE("unknown, invisible and handled parts announce UNAVAILABLE") {
  Orchestrator o(default_plan(), {});
  o.dispatch(AssemblyInput{"peg_grey"}, 0);
  // No robot frame yet: the part cannot be aligned.
  auto [a1, c1] = o.handle_intent({IntentSource::Touch, "gear_large", 0, 0}, 0);
  CHECK(a1.kind == AnnouncementKind::Unavailable);
  CHECK_FALSE(c1);
  CHECK(records_of<ValidationRecord>(o).back().outcome == "NOT_VISIBLE");

  auto [a2, c2] = o.handle_intent({IntentSource::Gaze, "spanner", 0, 1}, 0);
  CHECK(a2.kind == AnnouncementKind::Unavailable);
  CHECK(records_of<ValidationRecord>(o).back().outcome == "UNKNOWN_PART");

  auto [a3, c3] = o.handle_intent({IntentSource::Touch, "peg_grey", 0, 0}, 0);
  CHECK(a3.kind == AnnouncementKind::Unavailable);
  CHECK(records_of<ValidationRecord>(o).back().outcome == "ALREADY_HANDLED");
  CHECK(o.phase() == RobotPhase::Idle);
}

TEST_CASE("min_confidence gates alignment") {
  OrchestratorConfig cfg;
  cfg.min_confidence = 0.95;
  Orchestrator o = ready(cfg);
  auto [ann, cmd] = o.handle_intent({IntentSource::Touch, "gear_large", 0, 0}, 0);
  CHECK(ann.kind == AnnouncementKind::Unavailable);
  CHECK_FALSE(cmd);
}

TEST_CASE("requests while busy are announced BUSY and dropped") {
  Orchestrator o = ready();
  REQUIRE(o.dispatch(TouchInput{"gear_large"}, 0));
  // Two taps 100 ms apart on the same label.
  CHECK_FALSE(o.dispatch(TouchInput{"gear_large"}, 100'000));
  const auto anns = records_of<Announcement>(o);
  REQUIRE(anns.size() == 2);
  CHECK(anns[1].kind == AnnouncementKind::Busy);
  CHECK(anns[1].text == "Robot is busy; request for gear_large ignored");
  CHECK(o.outstanding_command()->issued_us == 0);
  CHECK(records_of<ValidationRecord>(o).back().outcome == "BUSY");
}

TEST_CASE("full fetch cycle walks the phases and leaves one delivery") {
  Orchestrator o = ready();
  REQUIRE(o.dispatch(TouchInput{"gear_large"}, 10));
  run_fetch(o, "gear_large", 20);
  CHECK(o.phase() == RobotPhase::Idle);
  CHECK_FALSE(o.outstanding_command());
  const auto phases = records_of<PhaseChange>(o);
  const std::vector<std::pair<RobotPhase, RobotPhase>> expected{
      {RobotPhase::Idle, RobotPhase::Announcing},
      {RobotPhase::Announcing, RobotPhase::Retrieving},
      {RobotPhase::Retrieving, RobotPhase::Delivering},
      {RobotPhase::Delivering, RobotPhase::Returning},
      {RobotPhase::Returning, RobotPhase::Idle}};
  REQUIRE(phases.size() == expected.size());
  for (std::size_t i = 0; i < phases.size(); ++i) {
    CHECK(phases[i].from == expected[i].first);
    CHECK(phases[i].to == expected[i].second);
    CHECK(phases[i].label == "gear_large");
  }
  const auto deliveries = records_of<Delivery>(o);
  REQUIRE(deliveries.size() == 1);
  CHECK(deliveries[0] == Delivery{"gear_large", "gear_large"});
  CHECK(o.plan_state().delivered.count("gear_large") == 1);
}

TEST_CASE("delivered while delivering updates the plan state") {
  Orchestrator o = ready();
  o.dispatch(TouchInput{"gear_large"}, 0);
  o.dispatch(RobotEventInput{ev(RobotEventKind::PickedUp, "gear_large")}, 1);
  CHECK(o.phase() == RobotPhase::Delivering);
  CHECK(o.plan_state().delivered.empty());
  o.dispatch(RobotEventInput{ev(RobotEventKind::Delivered, "gear_large")}, 2);
  CHECK(o.phase() == RobotPhase::Returning);
  CHECK(o.plan_state().delivered == std::set<std::string>{"gear_large"});
}

TEST_CASE("out-of-order robot events fault and force IDLE") {
  SUBCASE("picked up while idle") {
    Orchestrator o = ready();
    o.dispatch(RobotEventInput{ev(RobotEventKind::PickedUp, "gear_large")}, 1);
    const auto faults = records_of<FaultRecord>(o);
    REQUIRE(faults.size() == 1);
    CHECK(faults[0].code == "protocol_error");
    CHECK(o.phase() == RobotPhase::Idle);
  }
  SUBCASE("delivered before pickup") {
    Orchestrator o = ready();
    o.dispatch(TouchInput{"gear_large"}, 0);
    o.dispatch(RobotEventInput{ev(RobotEventKind::Delivered, "gear_large")}, 1);
    CHECK(records_of<FaultRecord>(o).size() == 1);
    CHECK(o.phase() == RobotPhase::Idle);
    CHECK_FALSE(o.outstanding_command());
    CHECK(o.plan_state().delivered.empty());
  }
  SUBCASE("event for another part") {
    Orchestrator o = ready();
    o.dispatch(TouchInput{"gear_large"}, 0);
    o.dispatch(RobotEventInput{ev(RobotEventKind::PickedUp, "cap_grey")}, 1);
    CHECK(records_of<FaultRecord>(o).size() == 1);
    CHECK(o.phase() == RobotPhase::Idle);
  }
  SUBCASE("robot fault aborts from any phase") {
    Orchestrator o = ready();
    o.dispatch(TouchInput{"gear_large"}, 0);
    o.dispatch(RobotEventInput{ev(RobotEventKind::PickedUp, "gear_large")}, 1);
    o.dispatch(RobotEventInput{{RobotEventKind::Fault, "gear_large", 2, "gripper slip"}}, 2);
    const auto faults = records_of<FaultRecord>(o);
    REQUIRE(faults.size() == 1);
    CHECK(faults[0] == FaultRecord{"robot_fault", "gripper slip"});
    CHECK(o.phase() == RobotPhase::Idle);
    // The part can be requested again.
    CHECK(o.dispatch(TouchInput{"gear_large"}, 3));
  }
}

TEST_CASE("assembly marks") {
  Orchestrator o = ready();
  o.dispatch(AssemblyInput{"gear_large"}, 1);  // never delivered
  o.dispatch(AssemblyInput{"nope"}, 2);
  const auto faults = records_of<FaultRecord>(o);
  REQUIRE(faults.size() == 2);
  CHECK(faults[0].code == "ordering_error");
  CHECK(faults[1].code == "unknown_step");
  CHECK(records_of<AssemblyMark>(o) == std::vector<AssemblyMark>{{"peg_grey", "peg_grey"}});
}

TEST_CASE("gaze stream drives a fetch through the sliding window") {
  Orchestrator o = ready();
  // 14 samples fill the window short of an emission; the 15th selects.
  auto cmds = look(o, 200, 200, 0, 14);
  CHECK(cmds.empty());
  cmds = look(o, 200, 200, 700'000, 1);
  // The user frame arrived at t=0 and is stale by now.
  CHECK(cmds.empty());
  o.dispatch(DetectionInput{user_frame(700'000)}, 700'000);
  cmds = look(o, 200, 200, 750'000, 1);
  REQUIRE(cmds.size() == 1);
  CHECK(cmds[0].label == "gear_large");
  CHECK(records_of<MeanGaze>(o).size() == 2);
  CHECK(records_of<GazeSampleRef>(o).size() == 16);
}

TEST_CASE("user frames older than the staleness bound are ignored") {
  for (const std::int64_t age : {std::int64_t{200'000}, std::int64_t{200'001}}) {
    OrchestratorConfig cfg;
    cfg.stream.window_size = 1;
    Orchestrator o(default_plan(), cfg);
    o.dispatch(DetectionInput{user_frame()}, 1'000'000);
    o.dispatch(GazeInput{{1'000'000 + age, 200, 200, true}}, 1'000'000 + age);
    CHECK(records_of<IntentEvent>(o).size() == (age <= 200'000 ? 1u : 0u));
  }
}

TEST_CASE("stream ordering faults and bad frames are logged, not thrown") {
  Orchestrator o(default_plan(), {});
  o.dispatch(GazeInput{{100, 1, 1, true}}, 100);
  o.dispatch(GazeInput{{100, 1, 1, true}}, 101);
  DetectionFrame bad = user_frame();
  bad.boxes[0].x_max = 5000;
  o.dispatch(DetectionInput{bad}, 102);
  const auto faults = records_of<FaultRecord>(o);
  REQUIRE(faults.size() == 2);
  CHECK(faults[0].code == "stream_order");
  CHECK(faults[1].code == "bad_frame");
}

TEST_CASE("gaze and touch take the same validation path") {
  for (const std::string label : {"gear_large", "cap_grey", "peg_grey", "spanner"}) {
    Orchestrator g = ready();
    Orchestrator t = ready();
    auto [ga, gc] = g.handle_intent({IntentSource::Gaze, label, 5, 1}, 5);
    auto [ta, tc] = t.handle_intent({IntentSource::Touch, label, 5, 0}, 5);
    CHECK(ga == ta);
    CHECK(gc == tc);
    auto gv = records_of<ValidationRecord>(g).back();
    auto tv = records_of<ValidationRecord>(t).back();
    CHECK(gv.outcome == tv.outcome);
    CHECK(gv.pending == tv.pending);
    CHECK(g.phase() == t.phase());
  }
}

TEST_CASE("config validation") {
  OrchestratorConfig cfg;
  cfg.dwell_threshold = 0;
  CHECK_THROWS_AS(Orchestrator(default_plan(), cfg), InputError);
  cfg = {};
  cfg.refractory_us = -1;
  CHECK_THROWS_AS(Orchestrator(default_plan(), cfg), InputError);
  cfg = {};
  cfg.min_confidence = 1.5;
  CHECK_THROWS_AS(Orchestrator(default_plan(), cfg), InputError);
}

namespace {

/// A random input stream mixing gaze, taps, frames, robot events (in and out
/// of order) and assembly marks.
std::vector<std::pair<OrchestratorInput, std::int64_t>> random_inputs(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<std::string> labels{"peg_grey", "gear_large", "gear_medium",
                                        "gear_small", "cap_grey", "spanner"};
  std::uniform_int_distribution<int> kind(0, 9);
  std::uniform_int_distribution<std::size_t> lab(0, labels.size() - 1);
  std::uniform_int_distribution<int> evk(0, 3);
  std::uniform_real_distribution<double> px(0, 1920), py(0, 1080);
  std::vector<std::pair<OrchestratorInput, std::int64_t>> out;
  std::int64_t t = 0;
  for (int i = 0; i < 600; ++i) {
    t += 50'000;
    switch (kind(rng)) {
      case 0:
        out.push_back({DetectionInput{user_frame(t)}, t});
        break;
      case 1:
        out.push_back({DetectionInput{robot_frame(t)}, t});
        break;
      case 2:
        out.push_back({TouchInput{labels[lab(rng)]}, t});
        break;
      case 3:
        out.push_back({AssemblyInput{labels[lab(rng)]}, t});
        break;
      case 4:
      case 5:
        out.push_back(
            {RobotEventInput{{static_cast<RobotEventKind>(evk(rng)), labels[lab(rng)], t, "x"}},
             t});
        break;
      default:
        out.push_back({GazeInput{{t, px(rng), py(rng), kind(rng) != 0}}, t});
        break;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("identical inputs give identical logs") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inputs = random_inputs(seed);
    Orchestrator a(default_plan(), {}), b(default_plan(), {});
    for (const auto& [in, t] : inputs) {
      a.dispatch(in, t);
      b.dispatch(in, t);
    }
    CHECK(a.log() == b.log());
  }
}

TEST_CASE("lifecycle invariants under random input") {
  for (std::uint64_t seed = 100; seed < 160; ++seed) {
    Orchestrator o(default_plan(), {});
    o.dispatch(AssemblyInput{"peg_grey"}, 0);
    std::size_t commands = 0;
    for (const auto& [in, t] : random_inputs(seed)) {
      const bool had = o.outstanding_command().has_value();
      const auto cmd = o.dispatch(in, t);
      if (cmd) {
        ++commands;
        CHECK_FALSE(had);  // at most one outstanding
        CHECK(o.outstanding_command() == cmd);
      }
      CHECK(o.outstanding_command().has_value() == (o.phase() != RobotPhase::Idle));
    }
    // Each SELECTED is closed by exactly one delivery or one fault before the
    // next one, or is still open at the end.
    int open = 0;
    std::size_t selected = 0;
    std::int64_t last_t = 0;
    for (const auto& r : o.log()) {
      CHECK(r.timestamp_us >= last_t);
      last_t = r.timestamp_us;
      if (const auto* a = std::get_if<Announcement>(&r.payload)) {
        if (a->kind == AnnouncementKind::Selected) {
          CHECK(open == 0);
          open = 1;
          ++selected;
        }
      } else if (std::holds_alternative<Delivery>(r.payload)) {
        CHECK(open == 1);
        open = 2;  // delivered; a later fault may still abort the return
      } else if (const auto* f = std::get_if<FaultRecord>(&r.payload)) {
        if (f->code == "robot_fault" || f->code == "protocol_error") {
          if (open == 1) open = 0;
        }
      } else if (const auto* p = std::get_if<PhaseChange>(&r.payload)) {
        if (p->to == RobotPhase::Idle) open = 0;
      }
    }
    CHECK(selected == commands);
    // Transitions only along the cycle or an abort to IDLE.
    for (const auto& p : records_of<PhaseChange>(o)) {
      const bool forward =
          (p.from == RobotPhase::Idle && p.to == RobotPhase::Announcing) ||
          (p.from == RobotPhase::Announcing && p.to == RobotPhase::Retrieving) ||
          (p.from == RobotPhase::Retrieving && p.to == RobotPhase::Delivering) ||
          (p.from == RobotPhase::Delivering && p.to == RobotPhase::Returning) ||
          (p.from == RobotPhase::Returning && p.to == RobotPhase::Idle);
      CHECK((forward || p.to == RobotPhase::Idle));
    }
  }
}

TEST_CASE("enum names round trip") {
  for (auto p : {RobotPhase::Idle, RobotPhase::Announcing, RobotPhase::Retrieving,
                 RobotPhase::Delivering, RobotPhase::Returning}) {
    CHECK(robot_phase_from_string(to_string(p)) == p);
  }
  for (auto k : {AnnouncementKind::Selected, AnnouncementKind::Prerequisite,
                 AnnouncementKind::Unavailable, AnnouncementKind::Busy}) {
    CHECK(announcement_kind_from_string(to_string(k)) == k);
  }
  CHECK(intent_source_from_string("TOUCH") == IntentSource::Touch);
  CHECK_THROWS_AS(robot_phase_from_string("idle"), InputError);
}
