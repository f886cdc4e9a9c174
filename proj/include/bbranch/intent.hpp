#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "bbranch/types.hpp"

namespace bbranch {

enum class AttackKind : std::uint8_t { Tackle = 0, Thunderbolt = 1, IronTail = 2 };
inline constexpr std::size_t kAttackKinds = 3;

constexpr std::size_t index(AttackKind k) { return static_cast<std::size_t>(k); }
std::string_view to_string(AttackKind kind);
std::optional<AttackKind> attack_from_string(std::string_view name);

using AttackCounters = std::array<std::uint32_t, kAttackKinds>;

struct IdleIntent {
  friend bool operator==(const IdleIntent&, const IdleIntent&) = default;
};
/// World-frame velocity; facing is unchanged.
struct MoveIntent {
  Vec2 velocity;
  friend bool operator==(const MoveIntent&, const MoveIntent&) = default;
};
struct RotateIntent {
  double angular = 0.0;  // rad/s, positive is counter-clockwise
  friend bool operator==(const RotateIntent&, const RotateIntent&) = default;
};
struct AttackIntent {
  AttackKind kind = AttackKind::Tackle;
  friend bool operator==(const AttackIntent&, const AttackIntent&) = default;
};

/// Per-tick output of an agent controller, consumed by the simulator.
using AgentIntent = std::variant<IdleIntent, MoveIntent, RotateIntent, AttackIntent>;

struct Pose {
  Vec2 position;
  double facing = 0.0;
  friend bool operator==(const Pose&, const Pose&) = default;
};

/// What one agent can perceive at the start of a tick. Condition
/// predicates and action stepping read only this.
struct PerceptionView {
  Pose self;
  Pose opponent;
  int self_hp = 0;
  int opponent_hp = 0;
  double distance = 0.0;
  Tick tick = 0;
  std::vector<Vec2> projectiles;
  AttackCounters self_attacks{};
  bool self_dashing = false;

  friend bool operator==(const PerceptionView&, const PerceptionView&) = default;
};

/// Builds a view with `distance` derived from the two positions.
PerceptionView make_view(Pose self, Pose opponent, int self_hp, int opponent_hp, Tick tick);

}  // namespace bbranch
