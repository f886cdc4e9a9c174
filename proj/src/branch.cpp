#include "bbranch/branch.hpp"

#include <algorithm>
#include <set>

namespace bbranch {

std::string_view to_string(AgentId id) { return id == AgentId::Player ? "player" : "opponent"; }

std::optional<AgentId> agent_from_string(std::string_view name) {
  if (name == "player") return AgentId::Player;
  if (name == "opponent") return AgentId::Opponent;
  return std::nullopt;
}

std::optional<double> number_param(const Params& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) return std::nullopt;
  if (const auto* d = std::get_if<double>(&it->second)) return *d;
  return std::nullopt;
}

std::optional<std::string> string_param(const Params& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) return std::nullopt;
  if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
  return std::nullopt;
}

PerceptionView make_view(Pose self, Pose opponent, int self_hp, int opponent_hp, Tick tick) {
  PerceptionView v;
  v.self = self;
  v.opponent = opponent;
  v.self_hp = self_hp;
  v.opponent_hp = opponent_hp;
  v.distance = distance(self.position, opponent.position);
  v.tick = tick;
  return v;
}

// ---------------------------------------------------------------------------
// BehaviorBranch storage

const Node& BehaviorBranch::node(NodeId id) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) {
    throw BranchError(BranchError::Code::MissingNode, "no node with id " + std::to_string(raw(id)));
  }
  return it->second;
}

Node& BehaviorBranch::node(NodeId id) {
  return const_cast<Node&>(static_cast<const BehaviorBranch&>(*this).node(id));
}

NodeId BehaviorBranch::add(std::variant<ActionNode, ConditionNode, RepeatNode, ThenNode> body) {
  const NodeId id{next_id_++};
  nodes_.emplace(id, Node{std::move(body), std::nullopt, std::nullopt});
  return id;
}

void BehaviorBranch::link_next(NodeId parent, std::optional<NodeId> child) {
  Node& p = node(parent);
  if (p.next) node(*p.next).parent.reset();
  p.next = child;
  if (child) node(*child).parent = parent;
}

void BehaviorBranch::link_true(NodeId parent, std::optional<NodeId> child) {
  Node& p = node(parent);
  if (!p.is_condition()) {
    throw BranchError(BranchError::Code::WrongNodeType, "true link on a non-condition node");
  }
  auto& cond = p.as<ConditionNode>();
  if (cond.true_node) node(*cond.true_node).parent.reset();
  cond.true_node = child;
  if (child) node(*child).parent = parent;
}

void BehaviorBranch::set_root(NodeId id) {
  node(id).parent.reset();
  root_ = id;
}

std::vector<NodeId> BehaviorBranch::subtree(NodeId id) const {
  std::vector<NodeId> out;
  std::vector<NodeId> stack{id};
  while (!stack.empty()) {
    const NodeId cur = stack.back();
    stack.pop_back();
    out.push_back(cur);
    const Node& n = node(cur);
    // Pushed in reverse so `next` is visited before `true`.
    if (n.is_condition() && n.as<ConditionNode>().true_node) {
      stack.push_back(*n.as<ConditionNode>().true_node);
    }
    if (n.next) stack.push_back(*n.next);
  }
  return out;
}

std::vector<NodeId> BehaviorBranch::erase_subtree(NodeId id) {
  std::vector<NodeId> doomed = subtree(id);
  if (auto parent = node(id).parent) {
    Node& p = node(*parent);
    if (p.next == id) {
      p.next.reset();
    } else if (p.is_condition() && p.as<ConditionNode>().true_node == id) {
      p.as<ConditionNode>().true_node.reset();
    }
  }
  if (root_ == id) root_.reset();
  for (NodeId d : doomed) {
    if (current_ == d) current_.reset();
    nodes_.erase(d);
  }
  return doomed;
}

NodeId BehaviorBranch::import(const BehaviorBranch& other) {
  if (!other.root_) {
    throw BranchError(BranchError::Code::MissingNode, "cannot import an empty branch");
  }
  std::map<NodeId, NodeId> remap;
  for (const auto& [old_id, n] : other.nodes_) {
    remap[old_id] = add(n.body);
  }
  auto mapped = [&](std::optional<NodeId> id) -> std::optional<NodeId> {
    if (!id) return std::nullopt;
    return remap.at(*id);
  };
  for (const auto& [old_id, n] : other.nodes_) {
    Node& copy = node(remap[old_id]);
    copy.next = mapped(n.next);
    copy.parent = mapped(n.parent);
    if (copy.is_condition()) {
      auto& c = copy.as<ConditionNode>();
      c.true_node = mapped(c.true_node);
    }
  }
  return remap.at(*other.root_);
}

// ---------------------------------------------------------------------------
// Structural queries

std::vector<std::string> check_structure(const BehaviorBranch& branch) {
  std::vector<std::string> problems;
  const auto& nodes = branch.nodes();
  if (!branch.root()) {
    if (!nodes.empty()) problems.push_back("branch has nodes but no root");
    if (branch.current()) problems.push_back("empty branch has a current node");
    return problems;
  }
  if (!branch.contains(*branch.root())) {
    problems.push_back("root id is not in the node map");
    return problems;
  }

  std::map<NodeId, int> incoming;
  auto note_child = [&](NodeId parent, std::optional<NodeId> child, const char* slot) {
    if (!child) return;
    if (!branch.contains(*child)) {
      problems.push_back("node " + std::to_string(raw(parent)) + " " + slot + " points at a missing node");
      return;
    }
    ++incoming[*child];
    if (branch.node(*child).parent != parent) {
      problems.push_back("node " + std::to_string(raw(*child)) + " has a stale parent link");
    }
  };
  for (const auto& [id, n] : nodes) {
    note_child(id, n.next, "next");
    if (n.is_condition()) note_child(id, n.as<ConditionNode>().true_node, "true");
  }
  for (const auto& [id, n] : nodes) {
    const int count = incoming.count(id) ? incoming[id] : 0;
    if (id == *branch.root()) {
      if (count != 0) problems.push_back("root has a parent slot referencing it");
      if (n.parent) problems.push_back("root has a parent link");
    } else if (count != 1) {
      problems.push_back("node " + std::to_string(raw(id)) + " has " + std::to_string(count) +
                         " parent slots");
    }
  }

  // Reachability from root (also rules out cycles given the parent counts).
  std::set<NodeId> seen;
  std::vector<NodeId> stack{*branch.root()};
  while (!stack.empty() && seen.size() <= nodes.size()) {
    const NodeId cur = stack.back();
    stack.pop_back();
    if (!branch.contains(cur) || !seen.insert(cur).second) continue;
    const Node& n = branch.node(cur);
    if (n.next) stack.push_back(*n.next);
    if (n.is_condition() && n.as<ConditionNode>().true_node) {
      stack.push_back(*n.as<ConditionNode>().true_node);
    }
  }
  if (seen.size() != nodes.size()) {
    problems.push_back(std::to_string(nodes.size() - std::min(nodes.size(), seen.size())) +
                       " node(s) unreachable from root");
  }
  if (branch.current() && !seen.count(*branch.current())) {
    problems.push_back("current node is not reachable from root");
  }
  for (const auto& [id, n] : nodes) {
    if (n.is_repeat()) {
      const auto& r = n.as<RepeatNode>();
      if (!r.count.positive()) problems.push_back("repeat count must be positive");
      if (r.remaining && *r.remaining > r.count) problems.push_back("repeat remaining exceeds count");
    }
  }
  return problems;
}

namespace {

// Walks parents from `id` (inclusive); stops after size() steps so a corrupt
// cycle cannot hang the caller.
template <typename Fn>
void walk_up(const BehaviorBranch& branch, NodeId id, Fn&& fn) {
  std::optional<NodeId> cur = id;
  for (std::size_t steps = 0; cur && steps <= branch.size(); ++steps) {
    if (!fn(*cur)) return;
    cur = branch.node(*cur).parent;
  }
}

bool reaches_root(const BehaviorBranch& branch, NodeId id) {
  if (!branch.contains(id)) return false;
  bool ok = false;
  walk_up(branch, id, [&](NodeId n) {
    if (!branch.contains(n)) return false;
    if (!branch.node(n).parent) ok = (n == branch.root());
    return true;
  });
  return ok;
}

}  // namespace

std::optional<NodeId> active_action(const BehaviorBranch& branch) {
  if (!branch.current()) return std::nullopt;
  std::optional<NodeId> found;
  walk_up(branch, *branch.current(), [&](NodeId n) {
    if (branch.node(n).is_action()) {
      found = n;
      return false;
    }
    return true;
  });
  return found;
}

std::vector<NodeId> armed_conditions(const BehaviorBranch& branch) {
  std::vector<NodeId> out;
  if (!branch.current()) return out;
  walk_up(branch, *branch.current(), [&](NodeId n) {
    const Node& node = branch.node(n);
    if (node.is_action()) return false;
    if (node.is_condition() && !node.as<ConditionNode>().fired) out.push_back(n);
    return true;
  });
  return out;
}

bool repeat_active(const BehaviorBranch& branch, NodeId repeat) {
  const Node& n = branch.node(repeat);
  if (!n.is_repeat()) return false;
  const auto& r = n.as<RepeatNode>();
  return r.remaining.has_value() && r.remaining->positive();
}

std::vector<NodeId> active_repeats(const BehaviorBranch& branch) {
  std::vector<NodeId> out;
  if (!branch.current()) return out;
  walk_up(branch, *branch.current(), [&](NodeId n) {
    if (repeat_active(branch, n)) out.push_back(n);
    return true;
  });
  return out;
}

std::optional<NodeId> spine_owner_repeat(const BehaviorBranch& branch, NodeId id) {
  NodeId child = id;
  std::optional<NodeId> parent = branch.node(id).parent;
  for (std::size_t steps = 0; parent && steps <= branch.size(); ++steps) {
    const Node& p = branch.node(*parent);
    if (p.next != child) return std::nullopt;  // reached through a true link
    if (p.is_repeat()) return parent;
    if (p.is_then()) return std::nullopt;
    child = *parent;
    parent = p.parent;
  }
  return std::nullopt;
}

namespace {

// Nearest Repeat on the parent chain of a Then node; the Then bounds its body.
std::optional<NodeId> then_owner(const BehaviorBranch& branch, NodeId then_node) {
  std::optional<NodeId> owner;
  walk_up(branch, then_node, [&](NodeId n) {
    if (n != then_node && branch.node(n).is_repeat()) {
      owner = n;
      return false;
    }
    return true;
  });
  return owner;
}

}  // namespace

void reset_scope(BehaviorBranch& branch, NodeId repeat_node) {
  Node& r = branch.node(repeat_node);
  if (!r.is_repeat()) {
    throw BranchError(BranchError::Code::WrongNodeType,
                      "reset_scope on node " + std::to_string(raw(repeat_node)) + " which is not a repeat");
  }
  if (!r.next) return;
  // (node, nearest enclosing repeat along the DFS path)
  std::vector<std::pair<NodeId, NodeId>> stack{{*r.next, repeat_node}};
  while (!stack.empty()) {
    auto [id, owner] = stack.back();
    stack.pop_back();
    Node& n = branch.node(id);
    if (n.is_then() && owner == repeat_node) continue;
    NodeId child_owner = owner;
    switch (n.kind()) {
      case NodeKind::Action: {
        auto& a = n.as<ActionNode>();
        a.satisfied = false;
        a.progress = ActionProgress{};
        break;
      }
      case NodeKind::Condition:
        n.as<ConditionNode>().fired = false;
        break;
      case NodeKind::Repeat:
        n.as<RepeatNode>().remaining.reset();
        child_owner = id;
        break;
      case NodeKind::Then:
        break;
    }
    if (n.is_condition() && n.as<ConditionNode>().true_node) {
      stack.emplace_back(*n.as<ConditionNode>().true_node, child_owner);
    }
    if (n.next) stack.emplace_back(*n.next, child_owner);
  }
}

void enter(BehaviorBranch& branch, NodeId id) {
  Node& n = branch.node(id);
  if (n.is_repeat()) {
    auto& r = n.as<RepeatNode>();
    r.remaining = r.count;
  }
  branch.set_current(id);
  branch.exhausted_reported = false;
}

// ---------------------------------------------------------------------------
// Traversal

namespace {

using Ev = TraversalEvent::Kind;

bool gate_open(const BehaviorBranch& branch) {
  const auto aa = active_action(branch);
  return !aa || branch.node(*aa).as<ActionNode>().satisfied;
}

void fire(BehaviorBranch& branch, NodeId cond_id, TickOutcome& out) {
  auto& cond = branch.node(cond_id).as<ConditionNode>();
  cond.fired = true;
  out.events.push_back({Ev::ConditionFired, cond_id});
  if (auto owner = spine_owner_repeat(branch, cond_id); owner && repeat_active(branch, *owner)) {
    branch.node(*owner).as<RepeatNode>().remaining = RepeatCount::times(0);
    out.events.push_back({Ev::RepeatFinished, *owner});
  }
  if (cond.true_node) {
    const NodeId target = *cond.true_node;
    enter(branch, target);
    out.events.push_back({Ev::NodeEntered, target});
  } else {
    branch.set_current(cond_id);
    branch.exhausted_reported = false;
  }
}

bool try_fire(BehaviorBranch& branch, NodeId cond_id, const PerceptionView& view,
              NodeEvaluator& evaluator, TickOutcome& out) {
  auto& cond = branch.node(cond_id).as<ConditionNode>();
  if (!cond.armed_tick) cond.armed_tick = view.tick;
  if (!evaluator.evaluate(cond, view)) return false;
  fire(branch, cond_id, out);
  return true;
}

bool select(BehaviorBranch& branch, const PerceptionView& view, NodeEvaluator& evaluator,
            TickOutcome& out) {
  const auto armed = armed_conditions(branch);
  for (NodeId c : armed) {
    if (try_fire(branch, c, view, evaluator, out)) return true;
  }
  // Conditions on an active loop body are loop-ending conditions: they are
  // evaluated every tick while the loop runs, wherever current is.
  for (NodeId r : active_repeats(branch)) {
    std::optional<NodeId> cur = branch.node(r).next;
    for (std::size_t steps = 0; cur && steps < branch.size(); ++steps) {
      const Node& n = branch.node(*cur);
      if (n.is_then() || n.is_repeat()) break;
      if (n.is_condition() && !n.as<ConditionNode>().fired &&
          std::find(armed.begin(), armed.end(), *cur) == armed.end()) {
        if (try_fire(branch, *cur, view, evaluator, out)) return true;
      }
      cur = n.next;
    }
  }
  return false;
}

// End of a loop body reached with the gate open: either start the next
// iteration or mark the loop finished.
void finish_iteration(BehaviorBranch& branch, NodeId repeat_id, TickOutcome& out) {
  auto& r = branch.node(repeat_id).as<RepeatNode>();
  r.remaining = r.remaining->decremented();
  const auto body = branch.node(repeat_id).next;
  if (!r.remaining->positive() || !body) {
    r.remaining = RepeatCount::times(0);
    out.events.push_back({Ev::RepeatFinished, repeat_id});
    return;
  }
  reset_scope(branch, repeat_id);
  out.events.push_back({Ev::RepeatIteration, repeat_id});
  enter(branch, *body);
  out.events.push_back({Ev::NodeEntered, *body});
}

void advance(BehaviorBranch& branch, TickOutcome& out) {
  std::size_t budget = branch.size();
  while (budget-- > 0) {
    const NodeId cur = *branch.current();
    const Node& n = branch.node(cur);

    if (n.is_then()) {
      if (auto owner = then_owner(branch, cur); owner && repeat_active(branch, *owner)) {
        if (!gate_open(branch)) return;
        finish_iteration(branch, *owner, out);
        continue;
      }
    }

    if (!n.next) {
      const auto loops = active_repeats(branch);
      if (loops.empty() || !gate_open(branch)) return;
      finish_iteration(branch, loops.front(), out);
      continue;
    }

    const NodeId nxt = *n.next;
    if (branch.node(nxt).is_action() && !gate_open(branch)) return;
    enter(branch, nxt);
    out.events.push_back({Ev::NodeEntered, nxt});
  }
}

bool at_dead_end(const BehaviorBranch& branch) {
  const Node& n = branch.node(*branch.current());
  if (n.next) return false;
  return active_repeats(branch).empty();
}

}  // namespace

TickOutcome tick(BehaviorBranch& branch, const PerceptionView& view, NodeEvaluator& evaluator,
                 double dt) {
  TickOutcome out;
  if (branch.empty()) return out;
  if (!branch.current() || !reaches_root(branch, *branch.current())) {
    throw BranchError(BranchError::Code::StructuralCorruption,
                      "current node is not reachable from root");
  }

  if (!select(branch, view, evaluator, out)) advance(branch, out);

  const auto aa = active_action(branch);
  if (!aa) return out;
  auto& action = branch.node(*aa).as<ActionNode>();
  if (action.satisfied) {
    if (at_dead_end(branch) && !branch.exhausted_reported) {
      branch.exhausted_reported = true;
      out.events.push_back({Ev::BranchExhausted, std::nullopt});
    }
    return out;
  }
  ActionStep step = evaluator.step(action, view, dt);
  out.intent = step.intent;
  if (step.satisfied) {
    action.satisfied = true;
    out.events.push_back({Ev::ActionSatisfied, *aa});
  }
  return out;
}

}  // namespace bbranch
