#include "support/graft_matrix.hpp"

#include <map>
#include <optional>

#include "bbranch/graft.hpp"
#include "bbranch/script.hpp"

namespace bbtest {

using namespace bbranch;

namespace {

enum class Host { ActionTail, ConditionTail, LoopActionTail, LoopConditionTail };
enum class Frag { Preempt, BareCondition, ThenAction, ThenCondition };
enum class Link { Next, True };

struct Built {
  BehaviorBranch branch;
  std::map<std::string, NodeId> names;
};

ActionNode action(const char* kind) { return ActionNode{kind, {}, false, {}}; }
ConditionNode condition(const char* kind, double value) {
  return ConditionNode{kind, {{"value", value}}, false, std::nullopt, std::nullopt};
}

// Hosts are assembled node by node so they do not depend on graft().
Built build_host(Host h) {
  Built b;
  auto& br = b.branch;
  switch (h) {
    case Host::ActionTail: {
      const NodeId a = br.add(action("tackle"));
      const NodeId t = br.add(action("thunderbolt"));
      br.set_root(a);
      br.link_next(a, t);
      enter(br, a);
      b.names = {{"a", a}, {"b", t}};
      break;
    }
    case Host::ConditionTail: {
      const NodeId a = br.add(action("tackle"));
      const NodeId c = br.add(condition("distance_below", 2));
      br.set_root(a);
      br.link_next(a, c);
      enter(br, a);
      b.names = {{"a", a}, {"c", c}};
      break;
    }
    case Host::LoopActionTail: {
      const NodeId r = br.add(RepeatNode{RepeatCount::forever(), std::nullopt});
      const NodeId a = br.add(action("thunderbolt"));
      br.set_root(r);
      br.link_next(r, a);
      enter(br, r);
      enter(br, a);
      b.names = {{"r", r}, {"a", a}};
      break;
    }
    case Host::LoopConditionTail: {
      const NodeId r = br.add(RepeatNode{RepeatCount::forever(), std::nullopt});
      const NodeId a = br.add(action("thunderbolt"));
      const NodeId c = br.add(condition("opponent_hp_below", 50));
      br.set_root(r);
      br.link_next(r, a);
      br.link_next(a, c);
      enter(br, r);
      enter(br, a);
      b.names = {{"r", r}, {"a", a}, {"c", c}};
      break;
    }
  }
  return b;
}

const char* fragment_text(Frag f) {
  switch (f) {
    case Frag::Preempt: return R"([{"node":"action","kind":"iron_tail"}])";
    case Frag::BareCondition: return R"([{"node":"condition","kind":"opponent_hp_below","params":{"value":50}}])";
    case Frag::ThenAction: return R"([{"node":"then"},{"node":"action","kind":"tackle"}])";
    case Frag::ThenCondition:
      return R"([{"node":"then"},{"node":"condition","kind":"distance_below","params":{"value":2},"true":[{"node":"action","kind":"iron_tail"}]}])";
  }
  return "";
}

struct Row {
  Host host;
  Frag frag;
  GraftRule rule;
  std::string attach;                  // host node the fragment hangs from
  Link link;
  bool current_moves;                  // current becomes the fragment root
  std::vector<std::string> discarded;  // host nodes dropped
  bool loop_ends;                      // the host repeat is exhausted by the graft
};

const std::vector<Row>& rows() {
  using R = GraftRule;
  static const std::vector<Row> table = {
      {Host::ActionTail, Frag::Preempt, R::PreemptSwitch, "a", Link::Next, true, {"b"}, false},
      {Host::ConditionTail, Frag::Preempt, R::PreemptSwitch, "a", Link::Next, true, {"c"}, false},
      {Host::LoopActionTail, Frag::Preempt, R::PreemptSwitch, "a", Link::Next, true, {}, true},
      {Host::LoopConditionTail, Frag::Preempt, R::PreemptSwitch, "a", Link::Next, true, {"c"}, true},

      {Host::ActionTail, Frag::BareCondition, R::AppendAsNext, "b", Link::Next, false, {}, false},
      {Host::ConditionTail, Frag::BareCondition, R::AppendAsNext, "c", Link::Next, false, {}, false},
      {Host::LoopActionTail, Frag::BareCondition, R::LoopEndingCondition, "a", Link::Next, false, {}, false},
      {Host::LoopConditionTail, Frag::BareCondition, R::LoopEndingCondition, "c", Link::Next, false, {}, false},

      {Host::ActionTail, Frag::ThenAction, R::AppendAsNext, "b", Link::Next, false, {}, false},
      {Host::ConditionTail, Frag::ThenAction, R::AppendAsTrueNode, "c", Link::True, false, {}, false},
      {Host::LoopActionTail, Frag::ThenAction, R::AfterRepetition, "a", Link::Next, false, {}, false},
      {Host::LoopConditionTail, Frag::ThenAction, R::AfterRepetition, "c", Link::Next, false, {}, false},

      {Host::ActionTail, Frag::ThenCondition, R::AppendAsNext, "b", Link::Next, false, {}, false},
      {Host::ConditionTail, Frag::ThenCondition, R::AppendAsTrueNode, "c", Link::True, false, {}, false},
      {Host::LoopActionTail, Frag::ThenCondition, R::AfterRepetition, "a", Link::Next, false, {}, false},
      {Host::LoopConditionTail, Frag::ThenCondition, R::AfterRepetition, "c", Link::Next, false, {}, false},
  };
  return table;
}

const char* name(Host h) {
  switch (h) {
    case Host::ActionTail: return "action tail";
    case Host::ConditionTail: return "condition tail";
    case Host::LoopActionTail: return "action tail, repeating";
    case Host::LoopConditionTail: return "condition tail, repeating";
  }
  return "?";
}

const char* name(Frag f) {
  switch (f) {
    case Frag::Preempt: return "action root";
    case Frag::BareCondition: return "condition root";
    case Frag::ThenAction: return "then+action root";
    case Frag::ThenCondition: return "then+condition root";
  }
  return "?";
}

std::string check_row(const Row& row) {
  Built host = build_host(row.host);
  auto& br = host.branch;
  const auto before_size = br.size();
  const auto before_current = br.current();
  const BehaviorBranch before = br;

  const CompileResult compiled = compile_text(fragment_text(row.frag));
  if (!compiled.ok()) return "fragment did not compile: " + describe(compiled.diagnostics);
  const BranchFragment& frag = *compiled.fragment;

  GraftReport report;
  try {
    report = graft(br, frag);
  } catch (const std::exception& e) {
    return std::string("graft threw: ") + e.what();
  }

  if (report.rule != row.rule) {
    return "rule " + std::string(to_string(report.rule)) + ", expected " + std::string(to_string(row.rule));
  }
  const NodeId attach = host.names.at(row.attach);
  if (report.attach_point != attach) return "attach point differs from node " + row.attach;
  const Node& at = br.node(attach);
  const std::optional<NodeId> linked =
      row.link == Link::Next ? at.next : at.as<ConditionNode>().true_node;
  if (linked != report.fragment_root) return "fragment root is not linked under node " + row.attach;
  if (br.node(report.fragment_root).kind() != frag.tree.node(frag.root()).kind()) return "fragment root kind changed";

  if (row.current_moves) {
    if (br.current() != report.fragment_root) return "current did not move to the fragment root";
    if (!report.current_changed) return "report says current unchanged";
  } else {
    if (br.current() != before_current) return "current moved";
    if (report.current_changed) return "report says current changed";
  }

  std::vector<NodeId> expected_discard;
  for (const auto& n : row.discarded) expected_discard.push_back(host.names.at(n));
  if (report.discarded_subtree != expected_discard) return "discarded subtree differs";
  for (NodeId d : expected_discard) {
    if (br.contains(d)) return "discarded node still present";
  }
  if (br.size() != before_size + frag.tree.size() - expected_discard.size()) return "node count mismatch";

  // Nothing else in the host changed: surviving host nodes keep their bodies.
  for (const auto& [id, n] : before.nodes()) {
    if (!br.contains(id)) continue;
    const Node& now = br.node(id);
    if (n.is_repeat()) {
      const auto& rep = now.as<RepeatNode>();
      const bool exhausted = rep.remaining && !rep.remaining->positive();
      if (exhausted != row.loop_ends) return row.loop_ends ? "loop still active" : "loop was ended";
      continue;
    }
    Node expected = n;
    if (id == attach && row.link == Link::True) expected.as<ConditionNode>().true_node = report.fragment_root;
    if (now.body != expected.body) return "host node " + std::to_string(raw(id)) + " body changed";
  }

  if (auto problems = check_structure(br); !problems.empty()) return "invalid after graft: " + problems.front();
  return {};
}

}  // namespace

std::vector<MatrixOutcome> run_graft_matrix() {
  std::vector<MatrixOutcome> out;
  for (const Row& row : rows()) {
    MatrixOutcome o;
    o.label = std::string(name(row.frag)) + " onto " + name(row.host);
    o.detail = check_row(row);
    o.passed = o.detail.empty();
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace bbtest
