#pragma once

// Deterministic fixed-timestep arena: two agents, HP, movement, and the
// tackle / thunderbolt / iron-tail mechanics.

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "bbranch/config.hpp"
#include "bbranch/intent.hpp"

namespace bbranch {

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Outcome { Ongoing, PlayerWins, OpponentWins, Draw };

/// Wire name: "ongoing" | "player" | "opponent" | "draw".
std::string_view to_string(Outcome outcome);

struct AgentState {
  AgentId id = AgentId::Player;
  Vec2 position;
  double facing = 0.0;  // [0, 2*pi)
  int hp = 0;
  AttackCounters cooldown_ticks{};
  AttackCounters attack_counts{};
  std::uint32_t dash_ticks_left = 0;
  bool dash_hit = false;

  bool dashing() const { return dash_ticks_left > 0; }
  friend bool operator==(const AgentState&, const AgentState&) = default;
};

struct Projectile {
  AgentId owner = AgentId::Player;
  Vec2 position;
  Vec2 velocity;
  double radius = 0.0;
  friend bool operator==(const Projectile&, const Projectile&) = default;
};

struct WorldState {
  Tick tick = 0;
  std::array<AgentState, 2> agents;
  std::vector<Projectile> projectiles;
  std::mt19937_64 rng;
  Outcome outcome = Outcome::Ongoing;

  AgentState& agent(AgentId id) { return agents[index(id)]; }
  const AgentState& agent(AgentId id) const { return agents[index(id)]; }
  friend bool operator==(const WorldState&, const WorldState&) = default;
};

struct SimEvent {
  enum class Kind { AttackStarted, ProjectileSpawned, Hit, ProjectileExpired, Finished };
  Kind kind;
  AgentId agent = AgentId::Player;  // actor (attacker / projectile owner)
  AttackKind attack = AttackKind::Tackle;
  int damage = 0;
  friend bool operator==(const SimEvent&, const SimEvent&) = default;
};

using IntentPair = std::array<AgentIntent, 2>;

/// Agents at mirrored spawn points on the x axis, facing each other.
WorldState init(const SimConfig& config, std::uint64_t seed);

/// Advances one tick: movement, projectiles, contacts, damage, outcome.
/// Throws SimError on a finished world.
std::vector<SimEvent> step(WorldState& world, const IntentPair& intents, const SimConfig& config);

struct AgentSnapshot {
  AgentId id = AgentId::Player;
  Pose pose;
  int hp = 0;
  AttackCounters attack_counts{};
  bool dashing = false;
  friend bool operator==(const AgentSnapshot&, const AgentSnapshot&) = default;
};

/// Immutable copy of everything observers may see.
struct StateView {
  Tick tick = 0;
  std::array<AgentSnapshot, 2> agents;
  std::vector<Vec2> projectiles;
  Outcome outcome = Outcome::Ongoing;

  const AgentSnapshot& agent(AgentId id) const { return agents[index(id)]; }
  friend bool operator==(const StateView&, const StateView&) = default;
};

StateView snapshot(const WorldState& world);

/// Perception of `self` built from a snapshot.
PerceptionView perceive(const StateView& state, AgentId self);

}  // namespace bbranch
