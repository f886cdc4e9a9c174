#pragma once

// Branch scripts: the JSON list document a translator emits, and the
// parse / validate / compile / serialize pipeline that turns it into a
// BranchFragment.
//
//   [{"node":"action","kind":"thunderbolt"},
//    {"node":"condition","kind":"distance_below","params":{"value":2},
//     "true":[{"node":"action","kind":"iron_tail"}]},
//    {"node":"repeat","count":"forever"},
//    {"node":"then"}]

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bbranch/actions.hpp"
#include "bbranch/graft.hpp"

namespace bbranch {

inline constexpr int kMaxScriptDepth = 16;

struct ScriptNode;

struct ActionSpec {
  std::string kind;
  Params params;
  friend bool operator==(const ActionSpec&, const ActionSpec&) = default;
};

struct ConditionSpec {
  std::string kind;
  Params params;
  std::vector<ScriptNode> true_branch;
  friend bool operator==(const ConditionSpec&, const ConditionSpec&);
};

/// count absent means "forever". Stored wide so validate() can report
/// out-of-range counts instead of parse() silently clamping them.
struct RepeatSpec {
  std::optional<std::int64_t> count;
  friend bool operator==(const RepeatSpec&, const RepeatSpec&) = default;
};

struct ThenSpec {
  friend bool operator==(const ThenSpec&, const ThenSpec&) = default;
};

struct ScriptNode {
  std::variant<ActionSpec, ConditionSpec, RepeatSpec, ThenSpec> node;
  friend bool operator==(const ScriptNode&, const ScriptNode&) = default;
};

inline bool operator==(const ConditionSpec& a, const ConditionSpec& b) {
  return a.kind == b.kind && a.params == b.params && a.true_branch == b.true_branch;
}

struct Script {
  std::vector<ScriptNode> sequence;
  friend bool operator==(const Script&, const Script&) = default;
};

struct Diagnostic {
  enum class Severity { Error, Warning };
  Severity severity = Severity::Error;
  std::string location;  // e.g. "[1].true[0].params.value"
  std::string message;

  bool is_error() const { return severity == Severity::Error; }
  std::string to_string() const;
  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

bool has_errors(const std::vector<Diagnostic>& diagnostics);
std::string describe(const std::vector<Diagnostic>& diagnostics);

struct ParseResult {
  std::optional<Script> script;
  std::vector<Diagnostic> diagnostics;
  bool ok() const { return script.has_value(); }
};

/// Grammar check only; catalog membership is validate()'s job. Never throws.
ParseResult parse(std::string_view text);

/// Canonical text: fixed key order, sorted params, no whitespace,
/// integral numbers without a fraction.
std::string serialize(const Script& script);

/// All catalog, arity, depth and count diagnostics, not just the first.
std::vector<Diagnostic> validate(const Script& script, const Catalog& catalog = bbranch::catalog());
/// Structural and catalog diagnostics for an already compiled fragment.
std::vector<Diagnostic> validate(const BranchFragment& fragment, const Catalog& catalog = bbranch::catalog());

struct CompileResult {
  std::optional<BranchFragment> fragment;
  std::vector<Diagnostic> diagnostics;  // warnings survive a successful compile
  bool ok() const { return fragment.has_value(); }
};

CompileResult compile(const Script& script, const Catalog& catalog = bbranch::catalog());

/// parse + compile in one go.
CompileResult compile_text(std::string_view text, const Catalog& catalog = bbranch::catalog());

/// Structure of a branch (or fragment) as a script; runtime state is dropped.
Script to_script(const BehaviorBranch& branch);

/// Fresh branch with current at the root, as built from `fragment`.
BehaviorBranch instantiate(const BranchFragment& fragment);

}  // namespace bbranch
