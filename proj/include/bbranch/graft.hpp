#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bbranch/branch.hpp"

namespace bbranch {

/// A freshly compiled branch waiting to be attached. Its tree has a root,
/// no current node, and every runtime flag cleared.
struct BranchFragment {
  BehaviorBranch tree;
  NodeId root() const { return *tree.root(); }
};

class GraftError : public std::runtime_error {
 public:
  enum class Code { EmptyFragment, DanglingThen, InvalidFragment };
  GraftError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

enum class RootClass {
  Preempt,        // Action or Repeat root
  BareCondition,  // Condition root
  ThenAction,     // Then root followed by an Action or control node
  ThenCondition,  // Then root followed by a Condition
};

std::string_view to_string(RootClass cls);

enum class GraftRule { PreemptSwitch, AppendAsNext, AppendAsTrueNode, LoopEndingCondition, AfterRepetition };

std::string_view to_string(GraftRule rule);

struct GraftReport {
  GraftRule rule = GraftRule::AppendAsNext;
  std::optional<NodeId> attach_point;  // absent: fragment became the root
  NodeId fragment_root{};              // id of the fragment root inside the host
  std::vector<NodeId> discarded_subtree;
  bool current_changed = false;
};

/// Problems that make a fragment unusable (structure or dirty runtime state).
std::vector<std::string> check_fragment(const BranchFragment& fragment);

RootClass classify_root(const BranchFragment& fragment);

/// Tail of the `next` chain starting at root; true branches are never entered.
std::optional<NodeId> spine_tail(const BehaviorBranch& branch);

/// Tail of the `next` chain starting at `from`.
NodeId chain_tail(const BehaviorBranch& branch, NodeId from);

/// True iff an entered repeat with iterations left encloses current.
bool is_repeating(const BehaviorBranch& branch);

/// Attaches `fragment` to `branch` according to its root class.
GraftReport graft(BehaviorBranch& branch, const BranchFragment& fragment);

}  // namespace bbranch
