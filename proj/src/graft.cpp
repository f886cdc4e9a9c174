#include "bbranch/graft.hpp"

namespace bbranch {

std::string_view to_string(RootClass cls) {
  switch (cls) {
    case RootClass::Preempt: return "Preempt";
    case RootClass::BareCondition: return "BareCondition";
    case RootClass::ThenAction: return "ThenPrefixed(ActionOrControl)";
    case RootClass::ThenCondition: return "ThenPrefixed(Condition)";
  }
  return "?";
}

std::string_view to_string(GraftRule rule) {
  switch (rule) {
    case GraftRule::PreemptSwitch: return "PreemptSwitch";
    case GraftRule::AppendAsNext: return "AppendAsNext";
    case GraftRule::AppendAsTrueNode: return "AppendAsTrueNode";
    case GraftRule::LoopEndingCondition: return "LoopEndingCondition";
    case GraftRule::AfterRepetition: return "AfterRepetition";
  }
  return "?";
}

std::vector<std::string> check_fragment(const BranchFragment& fragment) {
  const BehaviorBranch& tree = fragment.tree;
  if (tree.empty()) return {"fragment is empty"};
  std::vector<std::string> problems = check_structure(tree);
  for (const auto& [id, n] : tree.nodes()) {
    const std::string where = "node " + std::to_string(raw(id));
    switch (n.kind()) {
      case NodeKind::Action:
        if (n.as<ActionNode>().satisfied) problems.push_back(where + " is already satisfied");
        break;
      case NodeKind::Condition:
        if (n.as<ConditionNode>().fired) problems.push_back(where + " has already fired");
        break;
      case NodeKind::Repeat:
        if (n.as<RepeatNode>().remaining) problems.push_back(where + " repeat was already entered");
        break;
      case NodeKind::Then:
        break;
    }
  }
  return problems;
}

RootClass classify_root(const BranchFragment& fragment) {
  if (fragment.tree.empty()) throw GraftError(GraftError::Code::EmptyFragment, "fragment is empty");
  const Node& root = fragment.tree.node(fragment.root());
  switch (root.kind()) {
    case NodeKind::Action:
    case NodeKind::Repeat:
      return RootClass::Preempt;
    case NodeKind::Condition:
      return RootClass::BareCondition;
    case NodeKind::Then:
      break;
  }
  if (!root.next) {
    throw GraftError(GraftError::Code::DanglingThen, "'then' fragment has nothing after it");
  }
  return fragment.tree.node(*root.next).is_condition() ? RootClass::ThenCondition
                                                       : RootClass::ThenAction;
}

NodeId chain_tail(const BehaviorBranch& branch, NodeId from) {
  NodeId cur = from;
  for (std::size_t steps = 0; steps <= branch.size(); ++steps) {
    const auto nxt = branch.node(cur).next;
    if (!nxt) break;
    cur = *nxt;
  }
  return cur;
}

std::optional<NodeId> spine_tail(const BehaviorBranch& branch) {
  if (!branch.root()) return std::nullopt;
  return chain_tail(branch, *branch.root());
}

bool is_repeating(const BehaviorBranch& branch) { return !active_repeats(branch).empty(); }

namespace {

// Last node of a repeat's body spine before a Then boundary (or the repeat
// itself when the body is empty).
NodeId body_tail(const BehaviorBranch& branch, NodeId repeat) {
  NodeId cur = repeat;
  for (std::size_t steps = 0; steps <= branch.size(); ++steps) {
    const auto nxt = branch.node(cur).next;
    if (!nxt || branch.node(*nxt).is_then()) break;
    cur = *nxt;
  }
  return cur;
}

}  // namespace

GraftReport graft(BehaviorBranch& branch, const BranchFragment& fragment) {
  if (auto problems = check_fragment(fragment); !problems.empty()) {
    throw GraftError(GraftError::Code::InvalidFragment, "invalid fragment: " + problems.front());
  }
  const RootClass cls = classify_root(fragment);

  GraftReport report;
  if (branch.empty()) {
    const NodeId r = branch.import(fragment.tree);
    branch.set_root(r);
    enter(branch, r);
    report.rule = cls == RootClass::Preempt ? GraftRule::PreemptSwitch : GraftRule::AppendAsNext;
    report.fragment_root = r;
    report.current_changed = true;
    return report;
  }
  if (!branch.current()) {
    throw BranchError(BranchError::Code::StructuralCorruption, "non-empty branch without a current node");
  }

  const auto loops = active_repeats(branch);
  const bool repeating = !loops.empty();

  switch (cls) {
    case RootClass::Preempt: {
      const NodeId cur = *branch.current();
      if (const auto old = branch.node(cur).next) report.discarded_subtree = branch.erase_subtree(*old);
      // Command priority: a preempting command also ends any running loop.
      for (NodeId loop : loops) branch.node(loop).as<RepeatNode>().remaining = RepeatCount::times(0);
      const NodeId r = branch.import(fragment.tree);
      branch.link_next(cur, r);
      enter(branch, r);
      report.rule = GraftRule::PreemptSwitch;
      report.attach_point = cur;
      report.fragment_root = r;
      report.current_changed = true;
      return report;
    }

    case RootClass::BareCondition: {
      if (repeating) {
        const NodeId tail = body_tail(branch, loops.front());
        const auto boundary = branch.node(tail).next;  // Then node or absent
        if (boundary) branch.link_next(tail, std::nullopt);
        const NodeId r = branch.import(fragment.tree);
        branch.link_next(tail, r);
        if (boundary) branch.link_next(chain_tail(branch, r), *boundary);
        report.rule = GraftRule::LoopEndingCondition;
        report.attach_point = tail;
        report.fragment_root = r;
        return report;
      }
      const NodeId tail = *spine_tail(branch);
      const NodeId r = branch.import(fragment.tree);
      branch.link_next(tail, r);
      report.rule = GraftRule::AppendAsNext;
      report.attach_point = tail;
      report.fragment_root = r;
      return report;
    }

    case RootClass::ThenAction:
    case RootClass::ThenCondition: {
      if (repeating) {
        const NodeId body_end = body_tail(branch, loops.front());
        const auto boundary = branch.node(body_end).next;
        const NodeId tail = boundary ? chain_tail(branch, *boundary) : body_end;
        const NodeId r = branch.import(fragment.tree);
        branch.link_next(tail, r);
        report.rule = GraftRule::AfterRepetition;
        report.attach_point = tail;
        report.fragment_root = r;
        return report;
      }
      const NodeId tail = *spine_tail(branch);
      const Node& t = branch.node(tail);
      const NodeId r = branch.import(fragment.tree);
      if (!t.is_condition()) {
        branch.link_next(tail, r);
        report.rule = GraftRule::AppendAsNext;
        report.attach_point = tail;
      } else if (const auto first_true = t.as<ConditionNode>().true_node) {
        const NodeId true_tail = chain_tail(branch, *first_true);
        branch.link_next(true_tail, r);
        report.rule = GraftRule::AppendAsTrueNode;
        report.attach_point = true_tail;
      } else {
        branch.link_true(tail, r);
        report.rule = GraftRule::AppendAsTrueNode;
        report.attach_point = tail;
      }
      report.fragment_root = r;
      return report;
    }
  }
  return report;
}

}  // namespace bbranch
