#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace gear {

enum class PartSource { UserStation, RobotWorkspace };

const char* to_string(PartSource s);
PartSource part_source_from_string(const std::string& s);

struct AssemblyStep {
  std::string step_id;
  std::string part_label;
  std::set<std::string> prerequisites;
  PartSource source = PartSource::RobotWorkspace;

  bool operator==(const AssemblyStep&) const = default;
};

/// Immutable, validated prerequisite DAG. Construction rejects cycles,
/// duplicate ids or labels, self-references and dangling prerequisites.
class AssemblyPlan {
 public:
  AssemblyPlan(std::string plan_id, std::vector<AssemblyStep> steps);

  const std::string& plan_id() const { return plan_id_; }
  const std::vector<AssemblyStep>& steps() const { return steps_; }
  /// Step ids in a topological order; ties keep declaration order.
  const std::vector<std::string>& topological_order() const { return topo_; }

  const AssemblyStep* find_step(std::string_view step_id) const;
  const AssemblyStep* find_by_label(std::string_view label) const;
  const AssemblyStep& step(std::string_view step_id) const;

  std::size_t robot_step_count() const;

 private:
  [[noreturn]] void throw_cycle(const std::vector<bool>& done) const;

  std::string plan_id_;
  std::vector<AssemblyStep> steps_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
  std::map<std::string, std::size_t, std::less<>> by_label_;
  std::vector<std::string> topo_;
};

struct PlanState {
  std::set<std::string> delivered;
  std::set<std::string> assembled;

  bool operator==(const PlanState&) const = default;
};

struct Allowed {
  std::string step_id;
  bool operator==(const Allowed&) const = default;
};
struct PrerequisiteNeeded {
  std::string step_id;
  /// Unmet prerequisite step ids, topologically ordered.
  std::vector<std::string> pending;
  bool operator==(const PrerequisiteNeeded&) const = default;
};
struct UnknownPart {
  std::string label;
  bool operator==(const UnknownPart&) const = default;
};
struct AlreadyHandled {
  std::string step_id;
  bool operator==(const AlreadyHandled&) const = default;
};

using ValidationOutcome = std::variant<Allowed, PrerequisiteNeeded, UnknownPart, AlreadyHandled>;

const char* outcome_name(const ValidationOutcome& o);

/// Checks a part request against progress. The pending list walks back from
/// the requested step through prerequisites that are not yet assembled, so it
/// is empty exactly when the request is Allowed.
ValidationOutcome validate_request(const AssemblyPlan& plan, const PlanState& state,
                                   std::string_view label);

void mark_delivered(const AssemblyPlan& plan, PlanState& state, const std::string& step_id);
/// Throws OrderingError for a robot-sourced step that was never delivered.
void mark_assembled(const AssemblyPlan& plan, PlanState& state, const std::string& step_id);

/// Throws PlanError naming the offending step.
AssemblyPlan load_plan(const nlohmann::json& document);
AssemblyPlan load_plan_file(const std::string& path);
nlohmann::json plan_to_json(const AssemblyPlan& plan);

/// Names of the plans compiled into the library.
std::vector<std::string> builtin_plan_names();
std::optional<AssemblyPlan> builtin_plan(std::string_view name);
/// A built-in name, or else a path to a plan file.
AssemblyPlan resolve_plan(const std::string& name_or_path);

}  // namespace gear
