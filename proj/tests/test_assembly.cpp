#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "json.hpp"

#include "gear/assembly.hpp"
#include "gear/errors.hpp"

using namespace gear;
using nlohmann::json;

namespace {

AssemblyStep step(std::string id, std::set<std::string> pre,
                  PartSource src = PartSource::RobotWorkspace) {
  return {id, id, std::move(pre), src};
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  return json::parse(in);
}

// Prerequisite map read straight from the plan document.
std::map<std::string, std::set<std::string>> prereq_map(const json& doc) {
  std::map<std::string, std::set<std::string>> m;
  for (const auto& s : doc["steps"]) {
    m[s["step_id"]] = s["prerequisites"].get<std::set<std::string>>();
  }
  return m;
}

// Every unmet ancestor of `id`.
std::set<std::string> unmet_ancestors(const std::map<std::string, std::set<std::string>>& pre,
                                      const std::set<std::string>& assembled,
                                      const std::string& id) {
  std::set<std::string> out;
  std::vector<std::string> stack(pre.at(id).begin(), pre.at(id).end());
  while (!stack.empty()) {
    auto s = stack.back();
    stack.pop_back();
    if (assembled.contains(s) || !out.insert(s).second) continue;
    for (const auto& p : pre.at(s)) stack.push_back(p);
  }
  return out;
}

bool respects_order(const std::vector<std::string>& order,
                    const std::map<std::string, std::set<std::string>>& pre) {
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  for (const auto& [id, ps] : pre) {
    for (const auto& p : ps) {
      if (!pos.contains(p) || !pos.contains(id) || pos[p] >= pos[id]) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("default plan: base peg allowed, large gear needs the peg, unknown part") {
  const AssemblyPlan plan = *builtin_plan("gear_assembly");
  PlanState state;
  CHECK(std::holds_alternative<Allowed>(validate_request(plan, state, "peg_grey")));
  const auto out = validate_request(plan, state, "gear_large");
  REQUIRE(std::holds_alternative<PrerequisiteNeeded>(out));
  CHECK(std::get<PrerequisiteNeeded>(out).pending == std::vector<std::string>{"peg_grey"});
  CHECK(std::holds_alternative<UnknownPart>(validate_request(plan, state, "wrench")));
  CHECK(std::string(outcome_name(validate_request(plan, state, "wrench"))) == "UNKNOWN_PART");
}

TEST_CASE("pending list is the unmet ancestry in topological order") {
  const AssemblyPlan plan = *builtin_plan("gear_assembly");
  PlanState state;
  const auto out = validate_request(plan, state, "cap_grey");
  REQUIRE(std::holds_alternative<PrerequisiteNeeded>(out));
  CHECK(std::get<PrerequisiteNeeded>(out).pending ==
        std::vector<std::string>{"peg_grey", "gear_large", "gear_medium", "gear_small"});
}

TEST_CASE("delivered or assembled steps are already handled") {
  const AssemblyPlan plan = *builtin_plan("gear_assembly");
  PlanState state;
  mark_assembled(plan, state, "peg_grey");
  CHECK(std::holds_alternative<AlreadyHandled>(validate_request(plan, state, "peg_grey")));
  mark_delivered(plan, state, "gear_large");
  CHECK(std::holds_alternative<AlreadyHandled>(validate_request(plan, state, "gear_large")));
  mark_assembled(plan, state, "gear_large");
  CHECK(state.assembled == std::set<std::string>{"peg_grey", "gear_large"});
}

TEST_CASE("assembling a robot step before delivery is an ordering error") {
  const AssemblyPlan plan = *builtin_plan("gear_assembly");
  PlanState state;
  CHECK_THROWS_AS(mark_assembled(plan, state, "gear_large"), OrderingError);
  CHECK_NOTHROW(mark_assembled(plan, state, "peg_grey"));
  CHECK_THROWS_AS(mark_delivered(plan, state, "nope"), InputError);
}

TEST_CASE("marking is monotone and idempotent") {
  const AssemblyPlan plan = *builtin_plan("gear_assembly");
  PlanState state;
  mark_assembled(plan, state, "peg_grey");
  mark_assembled(plan, state, "peg_grey");
  mark_delivered(plan, state, "gear_large");
  mark_delivered(plan, state, "gear_large");
  CHECK(state.assembled.size() == 1);
  CHECK(state.delivered.size() == 1);
}

TEST_CASE("plan construction rejects malformed graphs and names the step") {
  CHECK_THROWS_AS(AssemblyPlan("p", {step("a", {"b"}), step("b", {"a"})}), PlanError);
  try {
    AssemblyPlan("p", {step("a", {}), step("b", {"c"}), step("c", {"d"}), step("d", {"b"})});
    FAIL("cycle accepted");
  } catch (const PlanError& e) {
    const std::string what = e.what();
    CHECK(what.find("cycle") != std::string::npos);
    CHECK(what.find('b') != std::string::npos);
    CHECK(what.find('c') != std::string::npos);
    CHECK(what.find('d') != std::string::npos);
  }
  CHECK_THROWS_AS(AssemblyPlan("p", {step("a", {"a"})}), PlanError);
  CHECK_THROWS_AS(AssemblyPlan("p", {step("a", {"ghost"})}), PlanError);
  CHECK_THROWS_AS(AssemblyPlan("p", {step("a", {}), step("a", {})}), PlanError);
  std::vector<AssemblyStep> same_label{step("a", {}), step("b", {})};
  same_label[1].part_label = "a";
  CHECK_THROWS_AS(AssemblyPlan("p", same_label), PlanError);
  try {
    AssemblyPlan("p", {step("a", {"ghost"})});
  } catch (const PlanError& e) {
    CHECK(e.step_id() == "a");
  }
}

TEST_CASE("topological order takes the earliest-declared ready step") {
  const AssemblyPlan plan("p", {step("z", {}), step("y", {"z"}), step("a", {}), step("b", {})});
  CHECK(plan.topological_order() == std::vector<std::string>{"z", "y", "a", "b"});
  const AssemblyPlan later("p", {step("y", {"b"}), step("a", {}), step("b", {})});
  CHECK(later.topological_order() == std::vector<std::string>{"a", "b", "y"});
}

TEST_CASE("json round trip and file loading") {
  const AssemblyPlan plan = *builtin_plan("gear_nutbolt");
  const AssemblyPlan again = load_plan(plan_to_json(plan));
  CHECK(again.steps() == plan.steps());
  CHECK(again.plan_id() == plan.plan_id());

  const auto from_file = resolve_plan(std::string(GEAR_SOURCE_DIR) + "/plans/gear_assembly.json");
  CHECK(from_file.steps() == builtin_plan("gear_assembly")->steps());
  CHECK_THROWS_AS(resolve_plan("/no/such/plan.json"), InputError);
  CHECK_THROWS_AS(load_plan(json{{"plan_id", "x"}}), PlanError);
  CHECK_THROWS_AS(load_plan(json::parse(R"({"plan_id":"x","steps":[{"step_id":"a","part_label":"a",
      "prerequisites":[],"source":"MOON"}]})")),
                  PlanError);
}

TEST_CASE("shipped plans match their files") {
  for (const auto& name : builtin_plan_names()) {
    const auto doc = read_json(std::string(GEAR_SOURCE_DIR) + "/plans/" + name + ".json");
    const AssemblyPlan plan = *builtin_plan(name);
    CHECK(plan.plan_id() == doc["plan_id"]);
    CHECK(plan.steps().size() == doc["steps"].size());
    CHECK(respects_order(plan.topological_order(), prereq_map(doc)));
  }
  CHECK(builtin_plan("gear_assembly")->robot_step_count() == 4);
  CHECK_FALSE(builtin_plan("nope"));
}

TEST_CASE("every request order on the shipped plan is judged by its prerequisites") {
  const auto doc = read_json(std::string(GEAR_SOURCE_DIR) + "/plans/gear_assembly.json");
  const auto pre = prereq_map(doc);
  const AssemblyPlan plan = load_plan(doc);
  std::vector<std::string> ids;
  for (const auto& [id, p] : pre) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  int perms = 0;
  do {
    ++perms;
    PlanState state;
    for (const auto& id : ids) {
      const bool ready = std::all_of(pre.at(id).begin(), pre.at(id).end(),
                                     [&](const auto& p) { return state.assembled.contains(p); });
      const auto out = validate_request(plan, state, plan.step(id).part_label);
      REQUIRE(std::holds_alternative<Allowed>(out) == ready);
      if (ready) {
        mark_delivered(plan, state, id);
        mark_assembled(plan, state, id);
      } else {
        const auto& pending = std::get<PrerequisiteNeeded>(out).pending;
        CHECK(std::set<std::string>(pending.begin(), pending.end()) ==
              unmet_ancestors(pre, state.assembled, id));
      }
    }
  } while (std::next_permutation(ids.begin(), ids.end()));
  CHECK(perms == 120);
}

TEST_CASE("property: random DAGs") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 9)(rng);
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) names.push_back("s" + std::to_string(i));
    std::shuffle(names.begin(), names.end(), rng);
    // Edges only point from earlier to later names in the shuffled order,
    // then the declaration order is shuffled again.
    std::map<std::string, std::set<std::string>> pre;
    std::bernoulli_distribution edge(0.3);
    for (int i = 0; i < n; ++i) {
      pre[names[i]];
      for (int j = 0; j < i; ++j) {
        if (edge(rng)) pre[names[i]].insert(names[j]);
      }
    }
    std::vector<AssemblyStep> steps;
    for (const auto& [id, ps] : pre) steps.push_back(step(id, ps, PartSource::UserStation));
    std::shuffle(steps.begin(), steps.end(), rng);
    const AssemblyPlan plan("r", steps);

    auto order = plan.topological_order();
    CHECK(respects_order(order, pre));
    std::sort(order.begin(), order.end());
    std::sort(names.begin(), names.end());
    CHECK(order == names);

    PlanState state;
    std::bernoulli_distribution done(0.4);
    for (const auto& id : plan.topological_order()) {
      if (done(rng)) mark_assembled(plan, state, id);
    }
    for (const auto& [id, ps] : pre) {
      const auto out = validate_request(plan, state, id);
      if (state.assembled.contains(id)) {
        CHECK(std::holds_alternative<AlreadyHandled>(out));
        continue;
      }
      const auto unmet = unmet_ancestors(pre, state.assembled, id);
      const bool direct_ok = std::all_of(ps.begin(), ps.end(),
                                         [&](const auto& p) { return state.assembled.contains(p); });
      CHECK(std::holds_alternative<Allowed>(out) == direct_ok);
      if (const auto* need = std::get_if<PrerequisiteNeeded>(&out)) {
        CHECK(std::set<std::string>(need->pending.begin(), need->pending.end()) == unmet);
        CHECK(respects_order(need->pending, [&] {
          std::map<std::string, std::set<std::string>> sub;
          for (const auto& p : need->pending) {
            for (const auto& q : pre.at(p)) {
              if (unmet.contains(q)) sub[p].insert(q);
            }
          }
          return sub;
        }()));
      }
    }
  }
}

TEST_CASE("cycle detection on random graphs with a back edge") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 8)(rng);
    std::vector<AssemblyStep> steps;
    for (int i = 0; i < n; ++i) {
      std::set<std::string> p;
      if (i > 0) p.insert("s" + std::to_string(i - 1));
      steps.push_back(step("s" + std::to_string(i), p));
    }
    const int from = std::uniform_int_distribution<int>(0, n - 2)(rng);
    steps[from].prerequisites.insert("s" + std::to_string(n - 1));
    CHECK_THROWS_AS(AssemblyPlan("c", steps), PlanError);
  }
}
