#include "bbranch/sim.hpp"

#include <algorithm>
#include <cmath>

namespace bbranch {

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Ongoing: return "ongoing";
    case Outcome::PlayerWins: return "player";
    case Outcome::OpponentWins: return "opponent";
    case Outcome::Draw: return "draw";
  }
  return "?";
}

WorldState init(const SimConfig& config, std::uint64_t seed) {
  config.validate();
  WorldState w;
  w.rng.seed(seed);
  const double half = config.spawn_distance / 2.0;
  w.agents[0] = AgentState{AgentId::Player, {-half, 0.0}, 0.0, config.initial_hp};
  w.agents[1] = AgentState{AgentId::Opponent, {half, 0.0}, std::numbers::pi, config.initial_hp};
  return w;
}

namespace {

Vec2 clamp_position(Vec2 p, double extent) {
  return {std::clamp(p.x, -extent, extent), std::clamp(p.y, -extent, extent)};
}

bool outside(Vec2 p, double extent) { return std::abs(p.x) > extent || std::abs(p.y) > extent; }

void move_agent(AgentState& a, const AgentIntent& intent, const SimConfig& config) {
  const double dt = config.tick_seconds;
  if (a.dashing()) {
    a.position = clamp_position(a.position + from_angle(a.facing) * (config.dash_speed * dt),
                                config.arena_half_extent);
    --a.dash_ticks_left;
    return;
  }
  if (const auto* m = std::get_if<MoveIntent>(&intent)) {
    Vec2 v = m->velocity;
    const double speed = v.length();
    if (speed > config.walk_speed) v = v * (config.walk_speed / speed);
    a.position = clamp_position(a.position + v * dt, config.arena_half_extent);
  } else if (const auto* r = std::get_if<RotateIntent>(&intent)) {
    const double omega = std::clamp(r->angular, -config.rotate_speed, config.rotate_speed);
    a.facing = normalize_angle(a.facing + omega * dt);
  }
}

}  // namespace

std::vector<SimEvent> step(WorldState& world, const IntentPair& intents, const SimConfig& config) {
  if (world.outcome != Outcome::Ongoing) throw SimError("cannot step a finished world");
  std::vector<SimEvent> events;
  std::array<int, 2> pending_damage{0, 0};

  // Movement.
  for (auto& a : world.agents) {
    for (auto& cd : a.cooldown_ticks) cd = cd > 0 ? cd - 1 : 0;
    move_agent(a, intents[index(a.id)], config);
  }

  // Projectiles.
  std::erase_if(world.projectiles, [&](Projectile& p) {
    p.position += p.velocity * config.tick_seconds;
    if (outside(p.position, config.arena_half_extent)) {
      events.push_back({SimEvent::Kind::ProjectileExpired, p.owner, AttackKind::Thunderbolt, 0});
      return true;
    }
    return false;
  });

  // Contacts.
  std::erase_if(world.projectiles, [&](const Projectile& p) {
    const AgentState& target = world.agent(other(p.owner));
    if (distance(p.position, target.position) > p.radius) return false;
    pending_damage[index(target.id)] += config.thunderbolt_damage;
    events.push_back({SimEvent::Kind::Hit, p.owner, AttackKind::Thunderbolt, config.thunderbolt_damage});
    return true;
  });
  for (auto& a : world.agents) {
    AgentState& target = world.agent(other(a.id));
    if (a.dashing() && !a.dash_hit &&
        distance(a.position, target.position) <= 2.0 * config.body_radius) {
      a.dash_hit = true;
      a.dash_ticks_left = 0;
      pending_damage[index(target.id)] += config.tackle_damage;
      events.push_back({SimEvent::Kind::Hit, a.id, AttackKind::Tackle, config.tackle_damage});
    }
  }
  for (auto& a : world.agents) {
    const auto* attack = std::get_if<AttackIntent>(&intents[index(a.id)]);
    if (!attack || a.dashing() || a.cooldown_ticks[index(attack->kind)] > 0) continue;
    const AttackKind kind = attack->kind;
    ++a.attack_counts[index(kind)];
    a.cooldown_ticks[index(kind)] = config.ticks_for(config.attack_cooldown_seconds);
    events.push_back({SimEvent::Kind::AttackStarted, a.id, kind, 0});
    switch (kind) {
      case AttackKind::Tackle:
        a.dash_ticks_left = config.ticks_for(config.dash_seconds);
        a.dash_hit = false;
        break;
      case AttackKind::Thunderbolt:
        world.projectiles.push_back(Projectile{a.id, a.position,
                                               from_angle(a.facing) * config.projectile_speed,
                                               config.projectile_radius});
        events.push_back({SimEvent::Kind::ProjectileSpawned, a.id, kind, 0});
        break;
      case AttackKind::IronTail: {
        const AgentState& target = world.agent(other(a.id));
        if (distance(a.position, target.position) <= config.iron_tail_radius) {
          pending_damage[index(target.id)] += config.iron_tail_damage;
          events.push_back({SimEvent::Kind::Hit, a.id, kind, config.iron_tail_damage});
        }
        break;
      }
    }
  }

  // Damage.
  for (auto& a : world.agents) a.hp = std::max(0, a.hp - pending_damage[index(a.id)]);

  // Outcome.
  const bool player_down = world.agent(AgentId::Player).hp == 0;
  const bool opponent_down = world.agent(AgentId::Opponent).hp == 0;
  if (player_down && opponent_down) world.outcome = Outcome::Draw;
  else if (opponent_down) world.outcome = Outcome::PlayerWins;
  else if (player_down) world.outcome = Outcome::OpponentWins;
  if (world.outcome != Outcome::Ongoing) {
    events.push_back({SimEvent::Kind::Finished, player_down ? AgentId::Opponent : AgentId::Player,
                      AttackKind::Tackle, 0});
  }

  ++world.tick;
  return events;
}

StateView snapshot(const WorldState& world) {
  StateView v;
  v.tick = world.tick;
  for (const auto& a : world.agents) {
    v.agents[index(a.id)] = AgentSnapshot{a.id, Pose{a.position, a.facing}, a.hp, a.attack_counts, a.dashing()};
  }
  v.projectiles.reserve(world.projectiles.size());
  for (const auto& p : world.projectiles) v.projectiles.push_back(p.position);
  v.outcome = world.outcome;
  return v;
}

PerceptionView perceive(const StateView& state, AgentId self) {
  const AgentSnapshot& me = state.agent(self);
  const AgentSnapshot& them = state.agent(other(self));
  PerceptionView v = make_view(me.pose, them.pose, me.hp, them.hp, state.tick);
  v.projectiles = state.projectiles;
  v.self_attacks = me.attack_counts;
  v.self_dashing = me.dashing;
  return v;
}

}  // namespace bbranch
