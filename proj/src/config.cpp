#include "bbranch/config.hpp"

#include <cmath>

#include "json.hpp"

namespace bbranch {

int SimConfig::damage(AttackKind kind) const {
  switch (kind) {
    case AttackKind::Tackle: return tackle_damage;
    case AttackKind::Thunderbolt: return thunderbolt_damage;
    case AttackKind::IronTail: return iron_tail_damage;
  }
  return 0;
}

std::uint32_t SimConfig::ticks_for(double seconds) const {
  const double t = std::llround(seconds / tick_seconds);
  return t < 1.0 ? 1u : static_cast<std::uint32_t>(t);
}

namespace {

// Single table so JSON and validation cannot drift apart.
template <typename Fn>
void for_each_field(SimConfig& c, Fn&& fn) {
  fn("arena_half_extent", c.arena_half_extent);
  fn("tick_seconds", c.tick_seconds);
  fn("initial_hp", c.initial_hp);
  fn("spawn_distance", c.spawn_distance);
  fn("body_radius", c.body_radius);
  fn("walk_speed", c.walk_speed);
  fn("rotate_speed", c.rotate_speed);
  fn("dash_speed", c.dash_speed);
  fn("dash_seconds", c.dash_seconds);
  fn("projectile_speed", c.projectile_speed);
  fn("projectile_radius", c.projectile_radius);
  fn("iron_tail_radius", c.iron_tail_radius);
  fn("attack_cooldown_seconds", c.attack_cooldown_seconds);
  fn("default_action_seconds", c.default_action_seconds);
  fn("tackle_damage", c.tackle_damage);
  fn("thunderbolt_damage", c.thunderbolt_damage);
  fn("iron_tail_damage", c.iron_tail_damage);
  fn("approach_distance", c.approach_distance);
  fn("retreat_distance", c.retreat_distance);
  fn("behind_offset", c.behind_offset);
  fn("reach_tolerance", c.reach_tolerance);
  fn("face_tolerance", c.face_tolerance);
  fn("opponent_speed", c.opponent_speed);
}

}  // namespace

std::vector<std::string> SimConfig::problems() const {
  std::vector<std::string> out;
  SimConfig copy = *this;
  for_each_field(copy, [&](const char* name, auto& value) {
    if (!(value > 0) || !std::isfinite(static_cast<double>(value))) {
      out.push_back(std::string(name) + " must be positive");
    }
  });
  if (tick_seconds > 1.0) out.push_back("tick_seconds must be at most 1 second");
  if (spawn_distance >= 2.0 * arena_half_extent) out.push_back("spawn_distance does not fit in the arena");
  return out;
}

void SimConfig::validate() const {
  if (auto p = problems(); !p.empty()) throw ConfigError("invalid sim config: " + p.front());
}

void to_json(nlohmann::json& j, const SimConfig& c) {
  j = nlohmann::json::object();
  SimConfig copy = c;
  for_each_field(copy, [&](const char* name, auto& value) { j[name] = value; });
}

void from_json(const nlohmann::json& j, SimConfig& c) {
  if (!j.is_object()) throw ConfigError("sim config must be a JSON object");
  std::size_t matched = 0;
  for_each_field(c, [&](const char* name, auto& value) {
    auto it = j.find(name);
    if (it == j.end()) return;
    ++matched;
    if (!it->is_number()) throw ConfigError(std::string("sim config field ") + name + " must be a number");
    value = it->get<std::remove_reference_t<decltype(value)>>();
  });
  if (matched != j.size()) {
    for (const auto& [key, _] : j.items()) {
      bool known = false;
      SimConfig probe;
      for_each_field(probe, [&](const char* name, auto&) { known = known || key == name; });
      if (!known) throw ConfigError("unknown sim config field '" + key + "'");
    }
  }
}

}  // namespace bbranch
