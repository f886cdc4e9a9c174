#pragma once

// Concrete action and condition kinds, their parameter schemas and the
// satisfaction rules that gate sequence advancement.

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbranch/branch.hpp"
#include "bbranch/config.hpp"

namespace bbranch {

class CatalogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParamSpec {
  enum class Type { Number, String };
  std::string name;
  Type type = Type::Number;
  bool required = false;
  std::optional<double> min;                 // inclusive
  std::vector<std::string> choices;          // for strings; empty means any
  std::string summary;
};

enum class Satisfaction { OneShot, ReachTarget, Duration };

std::string_view to_string(Satisfaction s);

struct ActionDescriptor {
  std::string kind;
  std::vector<ParamSpec> params;
  Satisfaction satisfaction = Satisfaction::OneShot;
  std::string summary;
};

struct ConditionDescriptor {
  std::string kind;
  std::vector<ParamSpec> params;
  std::string summary;
};

class Catalog {
 public:
  void add(ActionDescriptor d);
  void add(ConditionDescriptor d);

  const ActionDescriptor* find_action(const std::string& kind) const;
  const ConditionDescriptor* find_condition(const std::string& kind) const;
  const std::map<std::string, ActionDescriptor>& actions() const { return actions_; }
  const std::map<std::string, ConditionDescriptor>& conditions() const { return conditions_; }

  /// Machine-readable export for prompt builders and UIs (canonical JSON).
  std::string to_json() const;

 private:
  std::map<std::string, ActionDescriptor> actions_;
  std::map<std::string, ConditionDescriptor> conditions_;
};

/// The built-in catalog: 9 actions and 6 conditions. Stable for the process.
const Catalog& catalog();

/// Parameter problems for one node against its schema (unknown names,
/// wrong types, missing required ones, out-of-range values).
std::vector<std::string> check_params(const std::vector<ParamSpec>& schema, const Params& params);

/// One tick of an action's motor behavior. `progress` belongs to the
/// current activation and is updated in place.
ActionStep step_action(const std::string& kind, const Params& params, ActionProgress& progress,
                       const PerceptionView& view, double dt, const SimConfig& config);

/// Pure predicate. `armed_tick` is the tick the condition was first
/// evaluated; only elapsed_ticks reads it.
bool eval_condition(const std::string& kind, const Params& params, const PerceptionView& view,
                    std::optional<Tick> armed_tick = std::nullopt);

/// NodeEvaluator backed by the built-in catalog.
class CatalogEvaluator final : public NodeEvaluator {
 public:
  explicit CatalogEvaluator(SimConfig config) : config_(std::move(config)) {}

  bool evaluate(const ConditionNode& condition, const PerceptionView& view) override;
  ActionStep step(ActionNode& action, const PerceptionView& view, double dt) override;

 private:
  SimConfig config_;
};

}  // namespace bbranch
