#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "bbranch/actions.hpp"
#include "bbranch/graft.hpp"
#include "bbranch/sim.hpp"

namespace bbranch {

/// Controller for an agent that has never received a command.
enum class OpponentPolicy { Idle, Scripted };

std::string_view to_string(OpponentPolicy policy);
std::optional<OpponentPolicy> policy_from_string(std::string_view name);

/// Intent of the built-in scripted opponent: face, approach, nearest attack.
AgentIntent scripted_intent(const PerceptionView& view, const AgentState& self, const SimConfig& config,
                            std::mt19937_64& rng);

struct MatchStep {
  std::array<TickOutcome, 2> traversal;
  std::vector<SimEvent> events;
};

/// One battle: the world plus a behavior branch per agent. All mutation
/// happens on the caller's thread; grafts go in between steps.
class Match {
 public:
  Match(SimConfig config, std::uint64_t seed, OpponentPolicy policy = OpponentPolicy::Scripted);

  const SimConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  OpponentPolicy policy() const { return policy_; }
  const WorldState& world() const { return world_; }
  const BehaviorBranch& branch(AgentId id) const { return branches_[index(id)]; }
  bool finished() const { return world_.outcome != Outcome::Ongoing; }
  StateView state() const { return snapshot(world_); }

  GraftReport graft(AgentId id, const BranchFragment& fragment);

  /// Scenario setup before the first step. Facing is absolute radians.
  void place(AgentId id, std::optional<int> hp, std::optional<double> facing);

  MatchStep step();

  /// Fresh world and empty branches, same config, seed and policy.
  void reset();

 private:
  SimConfig config_;
  std::uint64_t seed_;
  OpponentPolicy policy_;
  WorldState world_;
  std::array<BehaviorBranch, 2> branches_;
  std::array<bool, 2> commanded_{false, false};
  CatalogEvaluator evaluator_;
};

}  // namespace bbranch
