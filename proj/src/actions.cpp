#include "bbranch/actions.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace bbranch {

std::string_view to_string(Satisfaction s) {
  switch (s) {
    case Satisfaction::OneShot: return "one_shot";
    case Satisfaction::ReachTarget: return "reach_target";
    case Satisfaction::Duration: return "duration";
  }
  return "?";
}

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::Tackle: return "tackle";
    case AttackKind::Thunderbolt: return "thunderbolt";
    case AttackKind::IronTail: return "iron_tail";
  }
  return "?";
}

std::optional<AttackKind> attack_from_string(std::string_view name) {
  if (name == "tackle") return AttackKind::Tackle;
  if (name == "thunderbolt") return AttackKind::Thunderbolt;
  if (name == "iron_tail") return AttackKind::IronTail;
  return std::nullopt;
}

void Catalog::add(ActionDescriptor d) {
  const std::string kind = d.kind;
  if (!actions_.emplace(kind, std::move(d)).second) throw CatalogError("duplicate action kind " + kind);
}

void Catalog::add(ConditionDescriptor d) {
  const std::string kind = d.kind;
  if (!conditions_.emplace(kind, std::move(d)).second) {
    throw CatalogError("duplicate condition kind " + kind);
  }
}

const ActionDescriptor* Catalog::find_action(const std::string& kind) const {
  auto it = actions_.find(kind);
  return it == actions_.end() ? nullptr : &it->second;
}

const ConditionDescriptor* Catalog::find_condition(const std::string& kind) const {
  auto it = conditions_.find(kind);
  return it == conditions_.end() ? nullptr : &it->second;
}

namespace {

nlohmann::ordered_json params_json(const std::vector<ParamSpec>& params) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& p : params) {
    nlohmann::ordered_json j;
    j["name"] = p.name;
    j["type"] = p.type == ParamSpec::Type::Number ? "number" : "string";
    j["required"] = p.required;
    if (p.min) j["min"] = *p.min;
    if (!p.choices.empty()) j["choices"] = p.choices;
    j["summary"] = p.summary;
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace

std::string Catalog::to_json() const {
  nlohmann::ordered_json doc;
  doc["version"] = 1;
  auto& actions = doc["actions"] = nlohmann::ordered_json::array();
  for (const auto& [kind, d] : actions_) {
    actions.push_back({{"kind", kind},
                       {"satisfaction", std::string(to_string(d.satisfaction))},
                       {"params", params_json(d.params)},
                       {"summary", d.summary}});
  }
  auto& conditions = doc["conditions"] = nlohmann::ordered_json::array();
  for (const auto& [kind, d] : conditions_) {
    conditions.push_back({{"kind", kind}, {"params", params_json(d.params)}, {"summary", d.summary}});
  }
  return doc.dump();
}

const Catalog& catalog() {
  static const Catalog instance = [] {
    using T = ParamSpec::Type;
    Catalog c;
    c.add(ActionDescriptor{"move_direction",
                           {{"dir", T::String, true, std::nullopt, {"forward", "backward", "left", "right"},
                             "direction relative to the agent's facing"},
                            {"seconds", T::Number, false, 0.01, {}, "how long to walk (default 1 s)"}},
                           Satisfaction::Duration,
                           "walk in a direction relative to the current facing"});
    c.add(ActionDescriptor{"approach_opponent",
                           {{"value", T::Number, false, 0.1, {}, "stop distance in meters (default 1.2)"}},
                           Satisfaction::ReachTarget,
                           "walk toward the opponent until within the stop distance"});
    c.add(ActionDescriptor{"retreat_from_opponent",
                           {{"value", T::Number, false, 0.1, {}, "distance to reach in meters (default 6)"}},
                           Satisfaction::ReachTarget,
                           "walk directly away from the opponent"});
    c.add(ActionDescriptor{"go_behind_opponent", {}, Satisfaction::ReachTarget,
                           "walk to the point behind the opponent's back, then face it"});
    c.add(ActionDescriptor{"face_opponent", {}, Satisfaction::ReachTarget, "turn in place toward the opponent"});
    c.add(ActionDescriptor{"idle", {}, Satisfaction::OneShot, "do nothing"});
    c.add(ActionDescriptor{"tackle", {}, Satisfaction::OneShot,
                           "dash straight ahead at high speed, damaging on body contact"});
    c.add(ActionDescriptor{"thunderbolt", {}, Satisfaction::OneShot,
                           "launch a sphere bullet straight ahead"});
    c.add(ActionDescriptor{"iron_tail", {}, Satisfaction::OneShot,
                           "spin in place, damaging the opponent if within range"});

    const ParamSpec threshold{"value", T::Number, true, 0.0, {}, "threshold (strict comparison)"};
    c.add(ConditionDescriptor{"distance_below", {threshold}, "distance to the opponent is below value meters"});
    c.add(ConditionDescriptor{"distance_above", {threshold}, "distance to the opponent is above value meters"});
    c.add(ConditionDescriptor{"self_hp_below", {threshold}, "own HP is below value"});
    c.add(ConditionDescriptor{"opponent_hp_below", {threshold}, "opponent HP is below value"});
    c.add(ConditionDescriptor{"opponent_in_front",
                              {{"value", T::Number, false, 0.0, {}, "angle tolerance in degrees (default 15)"}},
                              "the opponent is within the angle tolerance of the facing direction"});
    c.add(ConditionDescriptor{"elapsed_ticks",
                              {{"value", T::Number, true, 0.0, {}, "ticks since the condition was armed"}},
                              "at least value ticks have passed since the condition was armed"});
    return c;
  }();
  return instance;
}

std::vector<std::string> check_params(const std::vector<ParamSpec>& schema, const Params& params) {
  std::vector<std::string> out;
  for (const auto& [name, value] : params) {
    auto spec = std::find_if(schema.begin(), schema.end(), [&](const ParamSpec& p) { return p.name == name; });
    if (spec == schema.end()) {
      out.push_back("unknown parameter '" + name + "'");
      continue;
    }
    if (spec->type == ParamSpec::Type::Number) {
      const double* d = std::get_if<double>(&value);
      if (!d) {
        out.push_back("parameter '" + name + "' must be a number");
      } else if (!std::isfinite(*d) || (spec->min && *d < *spec->min)) {
        out.push_back("parameter '" + name + "' is out of range");
      }
    } else {
      const std::string* s = std::get_if<std::string>(&value);
      if (!s) {
        out.push_back("parameter '" + name + "' must be a string");
      } else if (!spec->choices.empty() &&
                 std::find(spec->choices.begin(), spec->choices.end(), *s) == spec->choices.end()) {
        out.push_back("parameter '" + name + "' has unsupported value '" + *s + "'");
      }
    }
  }
  for (const auto& spec : schema) {
    if (spec.required && !params.count(spec.name)) out.push_back("missing parameter '" + spec.name + "'");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Motor behavior

namespace {

constexpr double kAngleEps = 1e-9;

// Rotation toward `error` that never overshoots; `last` is set when this
// tick's rotation closes the gap.
RotateIntent turn_toward(double error, double dt, const SimConfig& config, bool& last) {
  const double max_step = config.rotate_speed * dt;
  last = std::abs(error) <= max_step + kAngleEps;
  const double omega = std::clamp(error / dt, -config.rotate_speed, config.rotate_speed);
  return RotateIntent{omega};
}

MoveIntent walk_toward(Vec2 from, Vec2 to, double dt, double speed) {
  const Vec2 d = to - from;
  const double len = d.length();
  if (len == 0.0) return MoveIntent{};
  const double s = std::min(speed, len / dt);
  return MoveIntent{d * (s / len)};
}

ActionStep attack_step(AttackKind kind, ActionProgress& progress, const PerceptionView& view) {
  const auto k = index(kind);
  if (!progress.started) {
    progress.started = true;
    progress.baseline = view.self_attacks;
  }
  if (progress.done) return {IdleIntent{}, true};
  if (view.self_attacks[k] > progress.baseline[k]) {
    // The tackle only counts once its dash has ended.
    if (kind == AttackKind::Tackle && view.self_dashing) return {IdleIntent{}, false};
    progress.done = true;
    return {IdleIntent{}, true};
  }
  return {AttackIntent{kind}, false};
}

Vec2 clamp_to_arena(Vec2 p, const SimConfig& config) {
  const double e = config.arena_half_extent;
  return {std::clamp(p.x, -e, e), std::clamp(p.y, -e, e)};
}

}  // namespace

ActionStep step_action(const std::string& kind, const Params& params, ActionProgress& progress,
                       const PerceptionView& view, double dt, const SimConfig& config) {
  if (!(dt > 0.0)) throw CatalogError("step_action requires dt > 0");
  const std::uint32_t tick_index = progress.ticks++;

  if (kind == "idle") {
    progress.done = true;
    return {IdleIntent{}, true};
  }
  if (kind == "tackle") return attack_step(AttackKind::Tackle, progress, view);
  if (kind == "thunderbolt") return attack_step(AttackKind::Thunderbolt, progress, view);
  if (kind == "iron_tail") return attack_step(AttackKind::IronTail, progress, view);

  if (progress.done) return {IdleIntent{}, true};

  if (kind == "move_direction") {
    const std::string dir = string_param(params, "dir").value_or("forward");
    double offset = 0.0;
    if (dir == "backward") offset = std::numbers::pi;
    else if (dir == "left") offset = std::numbers::pi / 2.0;
    else if (dir == "right") offset = -std::numbers::pi / 2.0;
    const double seconds = number_param(params, "seconds").value_or(config.default_action_seconds);
    const auto needed = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::llround(seconds / dt)));
    const bool last = tick_index + 1 >= needed;
    if (last) progress.done = true;
    return {MoveIntent{from_angle(view.self.facing + offset) * config.walk_speed}, last};
  }

  if (kind == "approach_opponent") {
    const double stop = number_param(params, "value").value_or(config.approach_distance);
    if (view.distance < stop) {
      progress.done = true;
      return {IdleIntent{}, true};
    }
    // Aim for a point just inside the stop distance so we do not overshoot.
    const Vec2 d = view.opponent.position - view.self.position;
    const double len = d.length();
    const Vec2 target = view.opponent.position - d * ((stop * 0.9) / len);
    return {walk_toward(view.self.position, target, dt, config.walk_speed), false};
  }

  if (kind == "retreat_from_opponent") {
    const double goal = number_param(params, "value").value_or(config.retreat_distance);
    if (view.distance > goal) {
      progress.done = true;
      return {IdleIntent{}, true};
    }
    Vec2 away = view.self.position - view.opponent.position;
    if (away.length() == 0.0) away = from_angle(view.self.facing + std::numbers::pi);
    return {MoveIntent{away * (config.walk_speed / away.length())}, false};
  }

  if (kind == "face_opponent") {
    const double err = bearing_error(view.self.position, view.self.facing, view.opponent.position);
    if (std::abs(err) <= config.face_tolerance) {
      progress.done = true;
      return {IdleIntent{}, true};
    }
    bool last = false;
    RotateIntent r = turn_toward(err, dt, config, last);
    if (last) progress.done = true;
    return {r, last};
  }

  if (kind == "go_behind_opponent") {
    const Vec2 target = clamp_to_arena(
        view.opponent.position - from_angle(view.opponent.facing) * config.behind_offset, config);
    if (distance(view.self.position, target) > config.reach_tolerance) {
      return {walk_toward(view.self.position, target, dt, config.walk_speed), false};
    }
    const double err = bearing_error(view.self.position, view.self.facing, view.opponent.position);
    if (std::abs(err) <= config.face_tolerance) {
      progress.done = true;
      return {IdleIntent{}, true};
    }
    bool last = false;
    RotateIntent r = turn_toward(err, dt, config, last);
    if (last) progress.done = true;
    return {r, last};
  }

  throw CatalogError("unknown action kind '" + kind + "'");
}

bool eval_condition(const std::string& kind, const Params& params, const PerceptionView& view,
                    std::optional<Tick> armed_tick) {
  const double value = number_param(params, "value").value_or(0.0);
  if (kind == "distance_below") return view.distance < value;
  if (kind == "distance_above") return view.distance > value;
  if (kind == "self_hp_below") return view.self_hp < value;
  if (kind == "opponent_hp_below") return view.opponent_hp < value;
  if (kind == "opponent_in_front") {
    const double tol_deg = number_param(params, "value").value_or(15.0);
    const double err = bearing_error(view.self.position, view.self.facing, view.opponent.position);
    return std::abs(err) < tol_deg * std::numbers::pi / 180.0;
  }
  if (kind == "elapsed_ticks") {
    if (!armed_tick || view.tick < *armed_tick) return false;
    return static_cast<double>(view.tick - *armed_tick) >= value;
  }
  throw CatalogError("unknown condition kind '" + kind + "'");
}

bool CatalogEvaluator::evaluate(const ConditionNode& condition, const PerceptionView& view) {
  return eval_condition(condition.kind, condition.params, view, condition.armed_tick);
}

ActionStep CatalogEvaluator::step(ActionNode& action, const PerceptionView& view, double dt) {
  return step_action(action.kind, action.params, action.progress, view, dt, config_);
}

}  // namespace bbranch
