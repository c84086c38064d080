#include "gear/assembly.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "builtin_plans.hpp"
#include "gear/errors.hpp"

namespace gear {

const char* to_string(PartSource s) {
  return s == PartSource::UserStation ? "USER_STATION" : "ROBOT_WORKSPACE";
}

PartSource part_source_from_string(const std::string& s) {
  if (s == "USER_STATION") return PartSource::UserStation;
  if (s == "ROBOT_WORKSPACE") return PartSource::RobotWorkspace;
  throw InputError("unknown part source '" + s + "'");
}

void AssemblyPlan::throw_cycle(const std::vector<bool>& done) const {
  // Every unfinished step has an unfinished prerequisite, so walking those
  // links must revisit a step; the revisited stretch is the cycle.
  std::size_t at = static_cast<std::size_t>(std::find(done.begin(), done.end(), false) - done.begin());
  std::vector<std::size_t> path;
  std::vector<std::size_t> seen_at(steps_.size(), steps_.size());
  while (seen_at[at] == steps_.size()) {
    seen_at[at] = path.size();
    path.push_back(at);
    for (const auto& p : steps_[at].prerequisites) {
      const std::size_t idx = by_id_.find(p)->second;
      if (!done[idx]) {
        at = idx;
        break;
      }
    }
  }
  std::string cycle;
  for (std::size_t i = seen_at[at]; i < path.size(); ++i) cycle += steps_[path[i]].step_id + " -> ";
  cycle += steps_[at].step_id;
  throw PlanError(steps_[at].step_id, "plan: prerequisite cycle " + cycle);
}

AssemblyPlan::AssemblyPlan(std::string plan_id, std::vector<AssemblyStep> steps)
    : plan_id_(std::move(plan_id)), steps_(std::move(steps)) {
  if (plan_id_.empty()) throw PlanError("", "plan: empty plan_id");
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    const auto& s = steps_[i];
    if (s.step_id.empty()) throw PlanError("", "plan: step with empty step_id");
    if (s.part_label.empty()) throw PlanError(s.step_id, "plan: step '" + s.step_id + "' has no part_label");
    if (!by_id_.emplace(s.step_id, i).second) {
      throw PlanError(s.step_id, "plan: duplicate step_id '" + s.step_id + "'");
    }
    if (!by_label_.emplace(s.part_label, i).second) {
      throw PlanError(s.step_id, "plan: duplicate part_label '" + s.part_label + "' at step '" +
                                     s.step_id + "'");
    }
  }
  for (const auto& s : steps_) {
    for (const auto& p : s.prerequisites) {
      if (p == s.step_id) {
        throw PlanError(s.step_id, "plan: step '" + s.step_id + "' lists itself as prerequisite");
      }
      if (!by_id_.contains(p)) {
        throw PlanError(s.step_id,
                        "plan: step '" + s.step_id + "' references unknown prerequisite '" + p + "'");
      }
    }
  }

  // Kahn's algorithm, always taking the earliest-declared ready step.
  std::vector<std::size_t> indegree(steps_.size(), 0);
  for (std::size_t i = 0; i < steps_.size(); ++i) indegree[i] = steps_[i].prerequisites.size();
  std::vector<bool> done(steps_.size(), false);
  for (std::size_t emitted = 0; emitted < steps_.size(); ++emitted) {
    std::size_t next = steps_.size();
    for (std::size_t i = 0; i < steps_.size(); ++i) {
      if (!done[i] && indegree[i] == 0) {
        next = i;
        break;
      }
    }
    if (next == steps_.size()) throw_cycle(done);
    done[next] = true;
    topo_.push_back(steps_[next].step_id);
    for (std::size_t i = 0; i < steps_.size(); ++i) {
      if (steps_[i].prerequisites.contains(steps_[next].step_id)) --indegree[i];
    }
  }
}

const AssemblyStep* AssemblyPlan::find_step(std::string_view step_id) const {
  const auto it = by_id_.find(step_id);
  return it == by_id_.end() ? nullptr : &steps_[it->second];
}

const AssemblyStep* AssemblyPlan::find_by_label(std::string_view label) const {
  const auto it = by_label_.find(label);
  return it == by_label_.end() ? nullptr : &steps_[it->second];
}

const AssemblyStep& AssemblyPlan::step(std::string_view step_id) const {
  const auto* s = find_step(step_id);
  if (s == nullptr) throw InputError("unknown step '" + std::string(step_id) + "'");
  return *s;
}

std::size_t AssemblyPlan::robot_step_count() const {
  return static_cast<std::size_t>(std::count_if(steps_.begin(), steps_.end(), [](const auto& s) {
    return s.source == PartSource::RobotWorkspace;
  }));
}

const char* outcome_name(const ValidationOutcome& o) {
  struct Visitor {
    const char* operator()(const Allowed&) const { return "ALLOWED"; }
    const char* operator()(const PrerequisiteNeeded&) const { return "PREREQUISITE_NEEDED"; }
    const char* operator()(const UnknownPart&) const { return "UNKNOWN_PART"; }
    const char* operator()(const AlreadyHandled&) const { return "ALREADY_HANDLED"; }
  };
  return std::visit(Visitor{}, o);
}

ValidationOutcome validate_request(const AssemblyPlan& plan, const PlanState& state,
                                   std::string_view label) {
  const auto* step = plan.find_by_label(label);
  if (step == nullptr) return UnknownPart{std::string(label)};
  if (state.delivered.contains(step->step_id) || state.assembled.contains(step->step_id)) {
    return AlreadyHandled{step->step_id};
  }

  std::set<std::string> unmet;
  std::vector<const AssemblyStep*> frontier{step};
  while (!frontier.empty()) {
    const auto* cur = frontier.back();
    frontier.pop_back();
    for (const auto& p : cur->prerequisites) {
      if (state.assembled.contains(p) || !unmet.insert(p).second) continue;
      frontier.push_back(&plan.step(p));
    }
  }
  if (unmet.empty()) return Allowed{step->step_id};

  PrerequisiteNeeded needed{step->step_id, {}};
  for (const auto& id : plan.topological_order()) {
    if (unmet.contains(id)) needed.pending.push_back(id);
  }
  return needed;
}

void mark_delivered(const AssemblyPlan& plan, PlanState& state, const std::string& step_id) {
  plan.step(step_id);
  state.delivered.insert(step_id);
}

void mark_assembled(const AssemblyPlan& plan, PlanState& state, const std::string& step_id) {
  const auto& s = plan.step(step_id);
  if (s.source == PartSource::RobotWorkspace && !state.delivered.contains(step_id)) {
    throw OrderingError("step '" + step_id + "' assembled before it was delivered");
  }
  state.assembled.insert(step_id);
}

AssemblyPlan load_plan(const nlohmann::json& document) {
  if (!document.is_object()) throw PlanError("", "plan: document is not an object");
  if (!document.contains("plan_id") || !document["plan_id"].is_string()) {
    throw PlanError("", "plan: missing string field 'plan_id'");
  }
  if (!document.contains("steps") || !document["steps"].is_array()) {
    throw PlanError("", "plan: missing array field 'steps'");
  }
  std::vector<AssemblyStep> steps;
  for (const auto& js : document["steps"]) {
    AssemblyStep s;
    const std::string hint = js.is_object() && js.contains("step_id") && js["step_id"].is_string()
                                 ? js["step_id"].get<std::string>()
                                 : std::string();
    try {
      s.step_id = js.at("step_id").get<std::string>();
      s.part_label = js.at("part_label").get<std::string>();
      for (const auto& p : js.at("prerequisites")) s.prerequisites.insert(p.get<std::string>());
      s.source = part_source_from_string(js.at("source").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw PlanError(hint, "plan: malformed step '" + hint + "': " + e.what());
    } catch (const InputError& e) {
      throw PlanError(hint, "plan: step '" + hint + "': " + e.what());
    }
    steps.push_back(std::move(s));
  }
  return AssemblyPlan(document["plan_id"].get<std::string>(), std::move(steps));
}

AssemblyPlan load_plan_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open plan file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw PlanError("", "plan file '" + path + "': " + e.what());
  }
  return load_plan(doc);
}

nlohmann::json plan_to_json(const AssemblyPlan& plan) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : plan.steps()) {
    steps.push_back({{"step_id", s.step_id},
                     {"part_label", s.part_label},
                     {"prerequisites", s.prerequisites},
                     {"source", to_string(s.source)}});
  }
  return {{"plan_id", plan.plan_id()}, {"steps", steps}};
}

std::vector<std::string> builtin_plan_names() {
  std::vector<std::string> names;
  for (const auto& [name, text] : detail::builtin_plan_documents()) names.emplace_back(name);
  return names;
}

std::optional<AssemblyPlan> builtin_plan(std::string_view name) {
  for (const auto& [n, text] : detail::builtin_plan_documents()) {
    if (n == name) return load_plan(nlohmann::json::parse(text));
  }
  return std::nullopt;
}

AssemblyPlan resolve_plan(const std::string& name_or_path) {
  if (auto p = builtin_plan(name_or_path)) return *std::move(p);
  return load_plan_file(name_or_path);
}

}  // namespace gear
