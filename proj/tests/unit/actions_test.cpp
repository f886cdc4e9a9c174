#include "doctest.h"

#include <cmath>
#include <numbers>

#include "bbranch/actions.hpp"
#include "bbranch/sim.hpp"
#include "support/oracles.hpp"

using namespace bbranch;

namespace {

PerceptionView view(Vec2 self, double facing, Vec2 opp, Tick t = 0) {
  return make_view({self, facing}, {opp, std::numbers::pi}, 100, 100, t);
}

}  // namespace

TEST_CASE("catalog contents") {
  const Catalog& c = catalog();
  CHECK(c.actions().size() == 9);
  CHECK(c.conditions().size() == 6);
  for (const char* k : {"move_direction", "approach_opponent", "retreat_from_opponent", "go_behind_opponent",
                        "face_opponent", "idle", "tackle", "thunderbolt", "iron_tail"}) {
    CHECK(c.find_action(k));
  }
  for (const char* k : {"distance_below", "distance_above", "self_hp_below", "opponent_hp_below", "opponent_in_front",
                        "elapsed_ticks"}) {
    CHECK(c.find_condition(k));
  }
  CHECK_FALSE(c.find_action("fly"));
  CHECK_FALSE(c.find_condition("tackle"));
  CHECK(c.to_json() == catalog().to_json());
}

TEST_CASE("parameter checks") {
  const auto& md = catalog().find_action("move_direction")->params;
  CHECK(check_params(md, {{"dir", std::string("left")}}).empty());
  CHECK_FALSE(check_params(md, {}).empty());
  CHECK_FALSE(check_params(md, {{"dir", std::string("up")}}).empty());
  CHECK_FALSE(check_params(md, {{"dir", 1.0}}).empty());
  CHECK_FALSE(check_params(md, {{"dir", std::string("left")}, {"speed", 2.0}}).empty());
  CHECK_FALSE(check_params(md, {{"dir", std::string("left")}, {"seconds", 0.0}}).empty());
}

TEST_CASE("conditions compare strictly") {
  PerceptionView v = view({0, 0}, 0, {1.5, 0});
  CHECK(eval_condition("distance_below", {{"value", 2.0}}, v));
  CHECK_FALSE(eval_condition("distance_above", {{"value", 2.0}}, v));
  v.opponent_hp = 50;
  CHECK_FALSE(eval_condition("opponent_hp_below", {{"value", 50.0}}, v));
  CHECK(eval_condition("opponent_hp_below", {{"value", 51.0}}, v));
  v.self_hp = 10;
  CHECK(eval_condition("self_hp_below", {{"value", 11.0}}, v));
  CHECK(eval_condition("opponent_in_front", {}, v));
  CHECK_FALSE(eval_condition("opponent_in_front", {}, view({0, 0}, std::numbers::pi / 2, {1.5, 0})));
  CHECK_THROWS_AS(eval_condition("nope", {}, v), CatalogError);
}

TEST_CASE("elapsed ticks counts from arming") {
  const Params p{{"value", 20.0}};
  CHECK(eval_condition("elapsed_ticks", p, view({0, 0}, 0, {1, 0}, 120), Tick{100}));
  CHECK_FALSE(eval_condition("elapsed_ticks", p, view({0, 0}, 0, {1, 0}, 119), Tick{100}));
  CHECK_FALSE(eval_condition("elapsed_ticks", p, view({0, 0}, 0, {1, 0}, 120), std::nullopt));
}

TEST_CASE("idle is satisfied at once") {
  ActionProgress pr;
  const auto s = step_action("idle", {}, pr, view({0, 0}, 0, {3, 0}), 0.05, SimConfig{});
  CHECK(s.satisfied);
  CHECK(std::holds_alternative<IdleIntent>(s.intent));
}

TEST_CASE("thunderbolt is satisfied once the launch is counted") {
  SimConfig config;
  ActionProgress pr;
  PerceptionView v = view({0, 0}, 0, {4, 0});
  auto s = step_action("thunderbolt", {}, pr, v, 0.05, config);
  CHECK(s.intent == AgentIntent{AttackIntent{AttackKind::Thunderbolt}});
  CHECK_FALSE(s.satisfied);
  v.self_attacks[index(AttackKind::Thunderbolt)] = 1;
  s = step_action("thunderbolt", {}, pr, v, 0.05, config);
  CHECK(s.satisfied);
  CHECK(std::holds_alternative<IdleIntent>(s.intent));
}

TEST_CASE("tackle waits for the dash to end") {
  SimConfig config;
  ActionProgress pr;
  PerceptionView v = view({0, 0}, 0, {4, 0});
  step_action("tackle", {}, pr, v, 0.05, config);
  v.self_attacks[index(AttackKind::Tackle)] = 1;
  v.self_dashing = true;
  CHECK_FALSE(step_action("tackle", {}, pr, v, 0.05, config).satisfied);
  v.self_dashing = false;
  CHECK(step_action("tackle", {}, pr, v, 0.05, config).satisfied);
}

TEST_CASE("retreat reaches the threshold on the closed-form tick") {
  SimConfig config;
  WorldState w = init(config, 1);
  w.agent(AgentId::Player).position = {-1, 0};
  w.agent(AgentId::Opponent).position = {1, 0};
  ActionProgress pr;
  std::uint32_t moves = 0;
  bool satisfied = false;
  for (int i = 0; i < 100 && !satisfied; ++i) {
    const PerceptionView v = perceive(snapshot(w), AgentId::Player);
    const auto s = step_action("retreat_from_opponent", {}, pr, v, config.tick_seconds, config);
    satisfied = s.satisfied;
    if (!satisfied) {
      step(w, {s.intent, IdleIntent{}}, config);
      ++moves;
    }
  }
  CHECK(satisfied);
  CHECK(moves == bbtest::ticks_to_exceed(2.0, config.retreat_distance, config.walk_speed, config.tick_seconds));
  CHECK(moves == 27);
}

TEST_CASE("move_direction lasts its duration") {
  SimConfig config;
  ActionProgress pr;
  const Params p{{"dir", std::string("left")}, {"seconds", 0.5}};
  const PerceptionView v = view({0, 0}, 0, {4, 0});
  int steps = 0;
  ActionStep s;
  do {
    s = step_action("move_direction", p, pr, v, 0.05, config);
    ++steps;
    const auto& m = std::get<MoveIntent>(s.intent);
    CHECK(m.velocity.x == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m.velocity.y == doctest::Approx(config.walk_speed));
  } while (!s.satisfied && steps < 100);
  CHECK(steps == 10);
}

TEST_CASE("face_opponent turns at the rotate speed") {
  SimConfig config;
  WorldState w = init(config, 1);
  w.agent(AgentId::Player).facing = std::numbers::pi;  // back to the opponent
  ActionProgress pr;
  int steps = 0;
  bool done = false;
  while (!done && steps < 100) {
    const auto s = step_action("face_opponent", {}, pr, perceive(snapshot(w), AgentId::Player), 0.05, config);
    step(w, {s.intent, IdleIntent{}}, config);
    done = s.satisfied;
    ++steps;
  }
  // pi radians at pi rad/s is one second of turning.
  CHECK(steps == 20);
  const double err = bearing_error(w.agent(AgentId::Player).position, w.agent(AgentId::Player).facing,
                                   w.agent(AgentId::Opponent).position);
  CHECK(std::abs(err) < 1e-6);
}

TEST_CASE("approach stops inside the stop distance") {
  SimConfig config;
  WorldState w = init(config, 1);
  ActionProgress pr;
  bool done = false;
  for (int i = 0; i < 200 && !done; ++i) {
    const auto s = step_action("approach_opponent", {}, pr, perceive(snapshot(w), AgentId::Player), 0.05, config);
    done = s.satisfied;
    if (!done) step(w, {s.intent, IdleIntent{}}, config);
  }
  CHECK(done);
  const double d = distance(w.agent(AgentId::Player).position, w.agent(AgentId::Opponent).position);
  CHECK(d < config.approach_distance);
  CHECK(d > 0.5);
}

TEST_CASE("go_behind ends behind the opponent facing it") {
  SimConfig config;
  WorldState w = init(config, 1);
  ActionProgress pr;
  bool done = false;
  for (int i = 0; i < 400 && !done; ++i) {
    const auto s = step_action("go_behind_opponent", {}, pr, perceive(snapshot(w), AgentId::Player), 0.05, config);
    done = s.satisfied;
    step(w, {s.intent, IdleIntent{}}, config);
  }
  REQUIRE(done);
  const auto& me = w.agent(AgentId::Player);
  const auto& them = w.agent(AgentId::Opponent);
  // The opponent faces -x from (3, 0); its back is toward +x.
  CHECK(me.position.x == doctest::Approx(4.5).epsilon(0.05));
  CHECK(std::abs(bearing_error(me.position, me.facing, them.position)) < 1e-6);
}

TEST_CASE("unknown kinds and bad dt") {
  ActionProgress pr;
  CHECK_THROWS_AS(step_action("fly", {}, pr, PerceptionView{}, 0.05, SimConfig{}), CatalogError);
  CHECK_THROWS_AS(step_action("idle", {}, pr, PerceptionView{}, 0.0, SimConfig{}), CatalogError);
}
