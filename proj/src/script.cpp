#include "bbranch/script.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"

namespace bbranch {

using nlohmann::json;

std::string Diagnostic::to_string() const {
  std::string out = severity == Severity::Error ? "error" : "warning";
  if (!location.empty()) out += " at " + location;
  out += ": " + message;
  return out;
}

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
  for (const auto& d : diagnostics) {
    if (d.is_error()) return true;
  }
  return false;
}

std::string describe(const std::vector<Diagnostic>& diagnostics) {
  std::string out;
  for (const auto& d : diagnostics) {
    if (!out.empty()) out += "; ";
    out += d.to_string();
  }
  return out;
}

namespace {

Diagnostic error(std::string location, std::string message) {
  return {Diagnostic::Severity::Error, std::move(location), std::move(message)};
}

Diagnostic warning(std::string location, std::string message) {
  return {Diagnostic::Severity::Warning, std::move(location), std::move(message)};
}

// Bracket nesting outside string literals. Run before the JSON parser so
// hostile input cannot make it build a pathologically deep document.
std::size_t bracket_depth(std::string_view text) {
  std::size_t depth = 0;
  std::size_t max_depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (char c : text) {
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    switch (c) {
      case '"': in_string = true; break;
      case '[':
      case '{': max_depth = std::max(max_depth, ++depth); break;
      case ']':
      case '}': depth = depth > 0 ? depth - 1 : 0; break;
      default: break;
    }
  }
  return max_depth;
}

// Each script level is a list of objects holding a params object, so one
// script level costs at most two JSON levels (+1 for params).
constexpr std::size_t kMaxJsonDepth = 2 * (kMaxScriptDepth + 1) + 2;

class Parser {
 public:
  std::vector<Diagnostic> diagnostics;

  std::vector<ScriptNode> list(const json& j, const std::string& path, int depth) {
    std::vector<ScriptNode> out;
    if (!j.is_array()) {
      diagnostics.push_back(error(path, "expected a list of node objects"));
      return out;
    }
    if (depth > kMaxScriptDepth) {
      diagnostics.push_back(error(path, "nesting depth exceeds " + std::to_string(kMaxScriptDepth)));
      return out;
    }
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (auto n = node(j[i], path + "[" + std::to_string(i) + "]", depth)) out.push_back(std::move(*n));
    }
    return out;
  }

 private:
  bool check_fields(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    bool ok = true;
    for (const auto& [key, _] : obj.items()) {
      bool known = false;
      for (const char* a : allowed) known = known || key == a;
      if (!known) {
        diagnostics.push_back(error(path + "." + key, "unknown field '" + key + "'"));
        ok = false;
      }
    }
    return ok;
  }

  std::optional<std::string> kind(const json& obj, const std::string& path) {
    auto it = obj.find("kind");
    if (it == obj.end()) {
      diagnostics.push_back(error(path + ".kind", "missing field 'kind'"));
      return std::nullopt;
    }
    if (!it->is_string()) {
      diagnostics.push_back(error(path + ".kind", "'kind' must be a string"));
      return std::nullopt;
    }
    return it->get<std::string>();
  }

  std::optional<Params> params(const json& obj, const std::string& path) {
    Params out;
    auto it = obj.find("params");
    if (it == obj.end()) return out;
    if (!it->is_object()) {
      diagnostics.push_back(error(path + ".params", "'params' must be an object"));
      return std::nullopt;
    }
    bool ok = true;
    for (const auto& [key, value] : it->items()) {
      if (value.is_number()) {
        out[key] = value.get<double>();
      } else if (value.is_string()) {
        out[key] = value.get<std::string>();
      } else {
        diagnostics.push_back(error(path + ".params." + key, "parameter values must be numbers or strings"));
        ok = false;
      }
    }
    if (!ok) return std::nullopt;
    return out;
  }

  std::optional<ScriptNode> node(const json& j, const std::string& path, int depth) {
    if (!j.is_object()) {
      diagnostics.push_back(error(path, "expected a node object"));
      return std::nullopt;
    }
    auto tag = j.find("node");
    if (tag == j.end() || !tag->is_string()) {
      diagnostics.push_back(error(path + ".node", "missing or non-string field 'node'"));
      return std::nullopt;
    }
    const std::string type = tag->get<std::string>();

    if (type == "action") {
      bool ok = check_fields(j, path, {"node", "kind", "params"});
      auto k = kind(j, path);
      auto p = params(j, path);
      if (!ok || !k || !p) return std::nullopt;
      return ScriptNode{ActionSpec{*k, std::move(*p)}};
    }
    if (type == "condition") {
      bool ok = check_fields(j, path, {"node", "kind", "params", "true"});
      auto k = kind(j, path);
      auto p = params(j, path);
      auto t = j.find("true");
      std::vector<ScriptNode> branch;
      if (t != j.end()) {
        const std::size_t before = diagnostics.size();
        branch = list(*t, path + ".true", depth + 1);
        ok = ok && diagnostics.size() == before;
      }
      if (!ok || !k || !p) return std::nullopt;
      return ScriptNode{ConditionSpec{*k, std::move(*p), std::move(branch)}};
    }
    if (type == "repeat") {
      if (!check_fields(j, path, {"node", "count"})) return std::nullopt;
      auto c = j.find("count");
      if (c == j.end()) {
        diagnostics.push_back(error(path + ".count", "missing field 'count'"));
        return std::nullopt;
      }
      if (c->is_string() && c->get<std::string>() == "forever") return ScriptNode{RepeatSpec{std::nullopt}};
      if (c->is_number_integer()) {
        if (c->is_number_unsigned() && c->get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
          diagnostics.push_back(error(path + ".count", "count is too large"));
          return std::nullopt;
        }
        return ScriptNode{RepeatSpec{c->get<std::int64_t>()}};
      }
      diagnostics.push_back(error(path + ".count", "count must be an integer or \"forever\""));
      return std::nullopt;
    }
    if (type == "then") {
      if (!check_fields(j, path, {"node"})) return std::nullopt;
      return ScriptNode{ThenSpec{}};
    }
    diagnostics.push_back(error(path + ".node", "unknown node type '" + type + "'"));
    return std::nullopt;
  }
};

}  // namespace

ParseResult parse(std::string_view text) {
  ParseResult result;
  if (bracket_depth(text) > kMaxJsonDepth) {
    result.diagnostics.push_back(
        error("", "nesting depth exceeds " + std::to_string(kMaxScriptDepth)));
    return result;
  }
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    result.diagnostics.push_back(error("", std::string("syntax error: ") + e.what()));
    return result;
  }
  if (doc.is_array() && doc.empty()) {
    result.diagnostics.push_back(error("", "script is empty"));
    return result;
  }
  Parser parser;
  Script script{parser.list(doc, "", 0)};
  result.diagnostics = std::move(parser.diagnostics);
  if (!has_errors(result.diagnostics)) result.script = std::move(script);
  return result;
}

// ---------------------------------------------------------------------------
// Canonical serialization

namespace {

void put_number(std::string& out, double v) {
  constexpr double kExact = 9007199254740992.0;  // 2^53
  if (std::isfinite(v) && std::trunc(v) == v && std::abs(v) < kExact) {
    out += std::to_string(static_cast<std::int64_t>(v));
  } else {
    out += json(v).dump();
  }
}

void put_string(std::string& out, const std::string& s) { out += json(s).dump(); }

void put_params(std::string& out, const Params& params) {
  if (params.empty()) return;
  out += ",\"params\":{";
  bool first = true;
  for (const auto& [key, value] : params) {
    if (!first) out += ',';
    first = false;
    put_string(out, key);
    out += ':';
    if (const auto* d = std::get_if<double>(&value)) put_number(out, *d);
    else put_string(out, std::get<std::string>(value));
  }
  out += '}';
}

void put_list(std::string& out, const std::vector<ScriptNode>& nodes) {
  out += '[';
  bool first = true;
  for (const auto& n : nodes) {
    if (!first) out += ',';
    first = false;
    std::visit(
        [&](const auto& spec) {
          using T = std::decay_t<decltype(spec)>;
          if constexpr (std::is_same_v<T, ActionSpec>) {
            out += "{\"node\":\"action\",\"kind\":";
            put_string(out, spec.kind);
            put_params(out, spec.params);
            out += '}';
          } else if constexpr (std::is_same_v<T, ConditionSpec>) {
            out += "{\"node\":\"condition\",\"kind\":";
            put_string(out, spec.kind);
            put_params(out, spec.params);
            if (!spec.true_branch.empty()) {
              out += ",\"true\":";
              put_list(out, spec.true_branch);
            }
            out += '}';
          } else if constexpr (std::is_same_v<T, RepeatSpec>) {
            out += "{\"node\":\"repeat\",\"count\":";
            if (spec.count) out += std::to_string(*spec.count);
            else out += "\"forever\"";
            out += '}';
          } else {
            out += "{\"node\":\"then\"}";
          }
        },
        n.node);
  }
  out += ']';
}

}  // namespace

std::string serialize(const Script& script) {
  std::string out;
  put_list(out, script.sequence);
  return out;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

void validate_list(const std::vector<ScriptNode>& nodes, const std::string& path, int depth,
                   const Catalog& catalog, std::vector<Diagnostic>& out) {
  if (depth > kMaxScriptDepth) {
    out.push_back(error(path, "nesting depth exceeds " + std::to_string(kMaxScriptDepth)));
    return;
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string at = path + "[" + std::to_string(i) + "]";
    std::visit(
        [&](const auto& spec) {
          using T = std::decay_t<decltype(spec)>;
          if constexpr (std::is_same_v<T, ActionSpec>) {
            const ActionDescriptor* d = catalog.find_action(spec.kind);
            if (!d) {
              out.push_back(error(at + ".kind", "unknown action kind '" + spec.kind + "'"));
              return;
            }
            for (auto& msg : check_params(d->params, spec.params)) out.push_back(error(at + ".params", msg));
          } else if constexpr (std::is_same_v<T, ConditionSpec>) {
            const ConditionDescriptor* d = catalog.find_condition(spec.kind);
            if (!d) {
              out.push_back(error(at + ".kind", "unknown condition kind '" + spec.kind + "'"));
            } else {
              for (auto& msg : check_params(d->params, spec.params)) out.push_back(error(at + ".params", msg));
            }
            if (spec.true_branch.empty()) {
              out.push_back(warning(at + ".true", "condition has an empty true branch"));
            }
            validate_list(spec.true_branch, at + ".true", depth + 1, catalog, out);
          } else if constexpr (std::is_same_v<T, RepeatSpec>) {
            if (spec.count && (*spec.count < 1 || *spec.count > std::numeric_limits<std::int32_t>::max())) {
              out.push_back(error(at + ".count", "count must be at least 1 or \"forever\""));
            }
          }
        },
        nodes[i].node);
  }
}

}  // namespace

std::vector<Diagnostic> validate(const Script& script, const Catalog& catalog) {
  std::vector<Diagnostic> out;
  if (script.sequence.empty()) out.push_back(error("", "script is empty"));
  validate_list(script.sequence, "", 0, catalog, out);
  return out;
}

std::vector<Diagnostic> validate(const BranchFragment& fragment, const Catalog& catalog) {
  std::vector<Diagnostic> out;
  for (auto& p : check_fragment(fragment)) out.push_back(error("", p));
  if (!has_errors(out)) {
    for (auto& d : validate(to_script(fragment.tree), catalog)) out.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Compilation

namespace {

// Builds the chain for `nodes`; returns its first node.
std::optional<NodeId> build_chain(BehaviorBranch& tree, const std::vector<ScriptNode>& nodes) {
  std::optional<NodeId> first;
  std::optional<NodeId> prev;
  for (const auto& n : nodes) {
    const NodeId id = std::visit(
        [&](const auto& spec) -> NodeId {
          using T = std::decay_t<decltype(spec)>;
          if constexpr (std::is_same_v<T, ActionSpec>) {
            ActionNode a;
            a.kind = spec.kind;
            a.params = spec.params;
            return tree.add(std::move(a));
          } else if constexpr (std::is_same_v<T, ConditionSpec>) {
            ConditionNode cond;
            cond.kind = spec.kind;
            cond.params = spec.params;
            const NodeId c = tree.add(std::move(cond));
            tree.link_true(c, build_chain(tree, spec.true_branch));
            return c;
          } else if constexpr (std::is_same_v<T, RepeatSpec>) {
            RepeatNode r;
            r.count = spec.count ? RepeatCount::times(static_cast<std::uint32_t>(*spec.count))
                                 : RepeatCount::forever();
            return tree.add(r);
          } else {
            return tree.add(ThenNode{});
          }
        },
        n.node);
    if (prev) tree.link_next(*prev, id);
    else first = id;
    prev = id;
  }
  return first;
}

std::vector<ScriptNode> chain_to_script(const BehaviorBranch& tree, std::optional<NodeId> start) {
  std::vector<ScriptNode> out;
  for (std::optional<NodeId> cur = start; cur; cur = tree.node(*cur).next) {
    const Node& n = tree.node(*cur);
    switch (n.kind()) {
      case NodeKind::Action: {
        const auto& a = n.as<ActionNode>();
        out.push_back({ActionSpec{a.kind, a.params}});
        break;
      }
      case NodeKind::Condition: {
        const auto& c = n.as<ConditionNode>();
        out.push_back({ConditionSpec{c.kind, c.params, chain_to_script(tree, c.true_node)}});
        break;
      }
      case NodeKind::Repeat: {
        const auto& r = n.as<RepeatNode>();
        RepeatSpec spec;
        if (!r.count.unbounded()) spec.count = r.count.value();
        out.push_back({spec});
        break;
      }
      case NodeKind::Then:
        out.push_back({ThenSpec{}});
        break;
    }
  }
  return out;
}

}  // namespace

CompileResult compile(const Script& script, const Catalog& catalog) {
  CompileResult result;
  result.diagnostics = validate(script, catalog);
  if (has_errors(result.diagnostics)) return result;
  BranchFragment fragment;
  const auto root = build_chain(fragment.tree, script.sequence);
  fragment.tree.set_root(*root);
  if (auto problems = check_fragment(fragment); !problems.empty()) {
    for (auto& p : problems) result.diagnostics.push_back(error("", p));
    return result;
  }
  result.fragment = std::move(fragment);
  return result;
}

CompileResult compile_text(std::string_view text, const Catalog& catalog) {
  ParseResult parsed = parse(text);
  if (!parsed.ok()) return CompileResult{std::nullopt, std::move(parsed.diagnostics)};
  CompileResult compiled = compile(*parsed.script, catalog);
  compiled.diagnostics.insert(compiled.diagnostics.begin(), parsed.diagnostics.begin(), parsed.diagnostics.end());
  return compiled;
}

Script to_script(const BehaviorBranch& branch) { return Script{chain_to_script(branch, branch.root())}; }

BehaviorBranch instantiate(const BranchFragment& fragment) {
  BehaviorBranch b;
  const NodeId r = b.import(fragment.tree);
  b.set_root(r);
  enter(b, r);
  return b;
}

}  // namespace bbranch
