#include "bbranch/match.hpp"

#include <algorithm>
#include <cmath>

namespace bbranch {

std::string_view to_string(OpponentPolicy policy) {
  return policy == OpponentPolicy::Idle ? "idle" : "scripted";
}

std::optional<OpponentPolicy> policy_from_string(std::string_view name) {
  if (name == "idle") return OpponentPolicy::Idle;
  if (name == "scripted") return OpponentPolicy::Scripted;
  return std::nullopt;
}

AgentIntent scripted_intent(const PerceptionView& view, const AgentState& self, const SimConfig& config,
                            std::mt19937_64& rng) {
  const double err = bearing_error(view.self.position, view.self.facing, view.opponent.position);
  const double dt = config.tick_seconds;
  if (std::abs(err) > 0.1) {
    return RotateIntent{std::clamp(err / dt, -config.rotate_speed, config.rotate_speed)};
  }
  if (view.distance <= config.iron_tail_radius) return AttackIntent{AttackKind::IronTail};
  // Occasional ranged shot; raw draw keeps this stable across std libraries.
  if (view.distance < 4.0 && self.cooldown_ticks[index(AttackKind::Thunderbolt)] == 0 && rng() % 16 == 0) {
    return AttackIntent{AttackKind::Thunderbolt};
  }
  const Vec2 d = view.opponent.position - view.self.position;
  return MoveIntent{d * (config.opponent_speed / d.length())};
}

Match::Match(SimConfig config, std::uint64_t seed, OpponentPolicy policy)
    : config_(std::move(config)),
      seed_(seed),
      policy_(policy),
      world_(init(config_, seed)),
      evaluator_(config_) {}

GraftReport Match::graft(AgentId id, const BranchFragment& fragment) {
  commanded_[index(id)] = true;
  return bbranch::graft(branches_[index(id)], fragment);
}

void Match::place(AgentId id, std::optional<int> hp, std::optional<double> facing) {
  AgentState& a = world_.agent(id);
  if (hp) a.hp = std::clamp(*hp, 0, config_.initial_hp);
  if (facing) a.facing = normalize_angle(*facing);
}

MatchStep Match::step() {
  MatchStep out;
  const StateView before = snapshot(world_);
  IntentPair intents{IdleIntent{}, IdleIntent{}};
  for (AgentId id : {AgentId::Player, AgentId::Opponent}) {
    const PerceptionView view = perceive(before, id);
    if (id == AgentId::Opponent && !commanded_[index(id)]) {
      if (policy_ == OpponentPolicy::Scripted) {
        intents[index(id)] = scripted_intent(view, world_.agent(id), config_, world_.rng);
      }
      continue;
    }
    out.traversal[index(id)] = tick(branches_[index(id)], view, evaluator_, config_.tick_seconds);
    intents[index(id)] = out.traversal[index(id)].intent;
  }
  out.events = bbranch::step(world_, intents, config_);
  return out;
}

void Match::reset() {
  world_ = init(config_, seed_);
  branches_ = {};
  commanded_ = {false, false};
}

}  // namespace bbranch
