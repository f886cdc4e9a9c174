#pragma once

#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "bbranch/intent.hpp"

namespace bbranch {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Arena and motor parameters. The defaults are artifact choices sized for
/// legible desk-scale traces; nothing here is a measured game value.
struct SimConfig {
  double arena_half_extent = 10.0;  // m, square arena centered on the origin
  double tick_seconds = 0.05;
  int initial_hp = 100;
  double spawn_distance = 6.0;  // m, agents mirrored on the x axis
  double body_radius = 0.5;     // m, tackle contact uses the sum of radii

  double walk_speed = 3.0;                     // m/s
  double rotate_speed = std::numbers::pi;      // rad/s
  double dash_speed = 10.0;                    // m/s
  double dash_seconds = 0.5;
  double projectile_speed = 8.0;               // m/s
  double projectile_radius = 0.3;              // m
  double iron_tail_radius = 1.5;               // m
  double attack_cooldown_seconds = 1.0;
  double default_action_seconds = 1.0;

  int tackle_damage = 10;
  int thunderbolt_damage = 8;
  int iron_tail_damage = 12;

  // Action tuning.
  double approach_distance = 1.2;   // m, approach_opponent stops inside this
  double retreat_distance = 6.0;    // m, retreat_from_opponent satisfied beyond this
  double behind_offset = 1.5;       // m behind the opponent's back
  double reach_tolerance = 0.2;     // m
  double face_tolerance = 1e-6;     // rad

  double opponent_speed = 1.5;  // m/s, scripted opponent policy

  int damage(AttackKind kind) const;
  std::uint32_t ticks_for(double seconds) const;

  /// Problems with the configuration; empty when valid.
  std::vector<std::string> problems() const;
  /// Throws ConfigError naming the first problem.
  void validate() const;

  friend bool operator==(const SimConfig&, const SimConfig&) = default;
};

void to_json(nlohmann::json& j, const SimConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, SimConfig& c);

}  // namespace bbranch
