#pragma once

// Behavior branch: a rooted arborescence of single-use action, condition
// and control nodes, plus the traversal cursor ("current").  The active
// action is derived: the nearest Action on the parent chain of current.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "bbranch/intent.hpp"
#include "bbranch/params.hpp"
#include "bbranch/types.hpp"

namespace bbranch {

class BranchError : public std::runtime_error {
 public:
  enum class Code { MissingNode, StructuralCorruption, WrongNodeType };
  BranchError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

/// Positive iteration count or unbounded. Unbounded orders above every count.
class RepeatCount {
 public:
  static constexpr RepeatCount forever() { return RepeatCount{}; }
  static constexpr RepeatCount times(std::uint32_t n) { return RepeatCount{n}; }

  constexpr bool unbounded() const { return !n_.has_value(); }
  constexpr std::uint32_t value() const { return n_.value_or(UINT32_MAX); }

  // Only meaningful for bounded counts.
  constexpr RepeatCount decremented() const {
    return unbounded() || *n_ == 0 ? *this : RepeatCount{*n_ - 1};
  }
  constexpr bool positive() const { return unbounded() || *n_ > 0; }

  friend constexpr bool operator==(const RepeatCount&, const RepeatCount&) = default;
  friend constexpr std::strong_ordering operator<=>(const RepeatCount& a, const RepeatCount& b) {
    if (a.unbounded() || b.unbounded()) {
      return a.unbounded() == b.unbounded()
                 ? std::strong_ordering::equal
                 : (a.unbounded() ? std::strong_ordering::greater : std::strong_ordering::less);
    }
    return *a.n_ <=> *b.n_;
  }

 private:
  constexpr RepeatCount() = default;
  constexpr explicit RepeatCount(std::uint32_t n) : n_(n) {}
  std::optional<std::uint32_t> n_;
};

/// Scratch state owned by one activation of an action node.
struct ActionProgress {
  std::uint32_t ticks = 0;
  AttackCounters baseline{};
  bool started = false;
  bool done = false;
  friend bool operator==(const ActionProgress&, const ActionProgress&) = default;
};

struct ActionNode {
  std::string kind;
  Params params;
  bool satisfied = false;
  ActionProgress progress;
  friend bool operator==(const ActionNode&, const ActionNode&) = default;
};

struct ConditionNode {
  std::string kind;
  Params params;
  bool fired = false;
  std::optional<NodeId> true_node;
  std::optional<Tick> armed_tick;
  friend bool operator==(const ConditionNode&, const ConditionNode&) = default;
};

/// Control node: repeats the nodes that follow it.  `remaining` is unset
/// until the traversal enters the node.
struct RepeatNode {
  RepeatCount count = RepeatCount::times(1);
  std::optional<RepeatCount> remaining;
  friend bool operator==(const RepeatNode&, const RepeatNode&) = default;
};

/// Control node meaning "after that"; also bounds a repeat body.
struct ThenNode {
  friend bool operator==(const ThenNode&, const ThenNode&) = default;
};

enum class NodeKind { Action, Condition, Repeat, Then };

struct Node {
  std::variant<ActionNode, ConditionNode, RepeatNode, ThenNode> body;
  std::optional<NodeId> next;
  std::optional<NodeId> parent;

  NodeKind kind() const { return static_cast<NodeKind>(body.index()); }
  bool is_action() const { return kind() == NodeKind::Action; }
  bool is_condition() const { return kind() == NodeKind::Condition; }
  bool is_repeat() const { return kind() == NodeKind::Repeat; }
  bool is_then() const { return kind() == NodeKind::Then; }
  bool is_control() const { return is_repeat() || is_then(); }

  template <typename T>
  T& as() {
    return std::get<T>(body);
  }
  template <typename T>
  const T& as() const {
    return std::get<T>(body);
  }

  friend bool operator==(const Node&, const Node&) = default;
};

class BehaviorBranch {
 public:
  BehaviorBranch() = default;

  bool empty() const { return !root_.has_value(); }
  std::size_t size() const { return nodes_.size(); }
  std::optional<NodeId> root() const { return root_; }
  std::optional<NodeId> current() const { return current_; }
  const std::map<NodeId, Node>& nodes() const { return nodes_; }

  bool contains(NodeId id) const { return nodes_.count(id) != 0; }
  const Node& node(NodeId id) const;
  Node& node(NodeId id);

  /// Inserts a detached node (no parent, no children) and returns its id.
  NodeId add(std::variant<ActionNode, ConditionNode, RepeatNode, ThenNode> body);

  /// Sets parent.next := child (child may be absent). The child must be detached.
  void link_next(NodeId parent, std::optional<NodeId> child);
  /// Sets parent.true_node := child; parent must be a Condition.
  void link_true(NodeId parent, std::optional<NodeId> child);
  void set_root(NodeId id);
  void set_current(std::optional<NodeId> id) { current_ = id; }

  /// Unlinks `id` from its parent and erases it with all descendants.
  /// Returns the erased ids in depth-first (next before true) order.
  std::vector<NodeId> erase_subtree(NodeId id);

  /// Ids of `id` and all descendants, depth first.
  std::vector<NodeId> subtree(NodeId id) const;

  /// Copies every node of `other` into this branch under fresh ids, keeping
  /// links between them. Returns the id that `other`'s root maps to.
  NodeId import(const BehaviorBranch& other);

  bool exhausted_reported = false;

  friend bool operator==(const BehaviorBranch&, const BehaviorBranch&) = default;

 private:
  std::map<NodeId, Node> nodes_;
  std::optional<NodeId> root_;
  std::optional<NodeId> current_;
  std::uint32_t next_id_ = 0;
};

inline BehaviorBranch new_branch() { return BehaviorBranch{}; }

/// Arborescence validator. Returns human-readable problems; empty when valid.
std::vector<std::string> check_structure(const BehaviorBranch& branch);

/// Nearest Action node on the parent chain of current (current inclusive).
std::optional<NodeId> active_action(const BehaviorBranch& branch);

/// Non-fired conditions between current (inclusive) and the active action
/// (exclusive), or up to root when there is no active action. Nearest first.
std::vector<NodeId> armed_conditions(const BehaviorBranch& branch);

/// True when `repeat` has been entered and still owes iterations.
bool repeat_active(const BehaviorBranch& branch, NodeId repeat);

/// Active repeat nodes on the parent chain of current, innermost first.
std::vector<NodeId> active_repeats(const BehaviorBranch& branch);

/// Repeat node whose body spine (next links, before any Then) holds `id`.
std::optional<NodeId> spine_owner_repeat(const BehaviorBranch& branch, NodeId id);

/// Clears satisfied/fired flags (and nested repeat counters) of the body
/// that follows `repeat_node`, up to a Then node that bounds it.
void reset_scope(BehaviorBranch& branch, NodeId repeat_node);

/// Moves current onto `id`, initializing a Repeat's counter on entry.
void enter(BehaviorBranch& branch, NodeId id);

struct ActionStep {
  AgentIntent intent = IdleIntent{};
  bool satisfied = false;
};

/// Binds node kinds to behavior. Implemented by the action library; tests
/// substitute scripted evaluators.
class NodeEvaluator {
 public:
  virtual ~NodeEvaluator() = default;
  virtual bool evaluate(const ConditionNode& condition, const PerceptionView& view) = 0;
  virtual ActionStep step(ActionNode& action, const PerceptionView& view, double dt) = 0;
};

struct TraversalEvent {
  enum class Kind { ConditionFired, NodeEntered, RepeatIteration, RepeatFinished, ActionSatisfied, BranchExhausted };
  Kind kind;
  std::optional<NodeId> node;
  friend bool operator==(const TraversalEvent&, const TraversalEvent&) = default;
};

struct TickOutcome {
  AgentIntent intent = IdleIntent{};
  std::vector<TraversalEvent> events;
  friend bool operator==(const TickOutcome&, const TickOutcome&) = default;
};

/// One traversal step: selection, then sequence/repetition, then the
/// active action's intent.
TickOutcome tick(BehaviorBranch& branch, const PerceptionView& view, NodeEvaluator& evaluator,
                 double dt);

}  // namespace bbranch
