#include "bbranch/evaluation.hpp"

#include <cmath>
#include <deque>
#include <numbers>

#include "json.hpp"

#include "bbranch/protocol.hpp"

namespace bbranch {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Verdict v) { return v == Verdict::Good ? "good" : "bad"; }

namespace {

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::OpponentHp: return "opponent_hp";
    case Metric::SelfHp: return "self_hp";
    case Metric::Distance: return "distance";
    case Metric::RelativeBearing: return "relative_bearing";
    case Metric::AttackCount: return "attack_count";
  }
  return "?";
}

std::string_view to_string(CheckOp op) {
  switch (op) {
    case CheckOp::Less: return "<";
    case CheckOp::Greater: return ">";
    case CheckOp::Equal: return "==";
    case CheckOp::DeltaNegative: return "delta<0";
    case CheckOp::DeltaPositive: return "delta>0";
  }
  return "?";
}

Scenario parse_scenario(const json& j, const std::string& where) {
  static const char* const known[] = {"spawn_distance", "player_hp",       "opponent_hp", "player_facing_deg",
                                      "opponent_facing_deg", "opponent_policy", "seed",        "pre"};
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw CorpusError(where + ": unknown scenario field '" + key + "'");
  }
  Scenario s;
  if (j.contains("spawn_distance")) s.spawn_distance = j["spawn_distance"].get<double>();
  if (j.contains("player_hp")) s.player_hp = j["player_hp"].get<int>();
  if (j.contains("opponent_hp")) s.opponent_hp = j["opponent_hp"].get<int>();
  if (j.contains("player_facing_deg")) s.player_facing_deg = j["player_facing_deg"].get<double>();
  if (j.contains("opponent_facing_deg")) s.opponent_facing_deg = j["opponent_facing_deg"].get<double>();
  if (j.contains("opponent_policy")) {
    auto p = policy_from_string(j["opponent_policy"].get<std::string>());
    if (!p) throw CorpusError(where + ": unknown opponent_policy");
    s.opponent_policy = *p;
  }
  s.seed = j.value("seed", std::uint64_t{1});
  for (const auto& p : j.value("pre", json::array())) {
    s.pre.push_back({p.at("text").get<std::string>(), p.value("ticks", std::uint32_t{0})});
  }
  return s;
}

Check parse_check(const json& j, const std::string& where) {
  Check c;
  const std::string metric = j.at("metric").get<std::string>();
  if (metric == "opponent_hp") c.metric = Metric::OpponentHp;
  else if (metric == "self_hp") c.metric = Metric::SelfHp;
  else if (metric == "distance") c.metric = Metric::Distance;
  else if (metric == "relative_bearing") c.metric = Metric::RelativeBearing;
  else if (metric == "attack_count") c.metric = Metric::AttackCount;
  else throw CorpusError(where + ": unknown metric '" + metric + "'");
  if (j.contains("kind")) {
    c.attack = attack_from_string(j["kind"].get<std::string>());
    if (!c.attack) throw CorpusError(where + ": unknown attack kind");
  }
  if (j.contains("from")) {
    auto a = agent_from_string(j["from"].get<std::string>());
    if (!a) throw CorpusError(where + ": unknown agent in 'from'");
    c.from = *a;
  }
  const std::string op = j.at("op").get<std::string>();
  if (op == "<") c.op = CheckOp::Less;
  else if (op == ">") c.op = CheckOp::Greater;
  else if (op == "==") c.op = CheckOp::Equal;
  else if (op == "delta<0") c.op = CheckOp::DeltaNegative;
  else if (op == "delta>0") c.op = CheckOp::DeltaPositive;
  else throw CorpusError(where + ": unknown op '" + op + "'");
  if (c.op != CheckOp::DeltaNegative && c.op != CheckOp::DeltaPositive) c.value = j.at("value").get<double>();
  const auto within = j.at("within_ticks").get<std::int64_t>();
  if (within <= 0) throw CorpusError(where + ": within_ticks must be positive");
  c.within_ticks = static_cast<std::uint32_t>(within);
  const std::string mode = j.value("mode", std::string("eventually"));
  if (mode == "final") c.final_only = true;
  else if (mode != "eventually") throw CorpusError(where + ": mode must be eventually or final");
  return c;
}

double metric_value(const Check& c, const StateView& s) {
  const AgentSnapshot& self = s.agent(c.from);
  const AgentSnapshot& opp = s.agent(other(c.from));
  switch (c.metric) {
    case Metric::OpponentHp: return opp.hp;
    case Metric::SelfHp: return self.hp;
    case Metric::Distance: return distance(self.pose.position, opp.pose.position);
    case Metric::RelativeBearing:
      return std::abs(bearing_error(self.pose.position, self.pose.facing, opp.pose.position)) * 180.0 /
             std::numbers::pi;
    case Metric::AttackCount: {
      if (c.attack) return self.attack_counts[index(*c.attack)];
      double total = 0;
      for (auto n : self.attack_counts) total += n;
      return total;
    }
  }
  return 0.0;
}

std::string label(const Check& c) {
  std::string out(to_string(c.metric));
  if (c.attack) out += "(" + std::string(to_string(*c.attack)) + ")";
  if (c.from != AgentId::Player) out += "[from " + std::string(to_string(c.from)) + "]";
  out += " ";
  out += to_string(c.op);
  if (c.op != CheckOp::DeltaNegative && c.op != CheckOp::DeltaPositive) out += " " + json(c.value).dump();
  out += (c.final_only ? " at " : " within ") + std::to_string(c.within_ticks);
  return out;
}

bool holds(const Check& c, double observed, double baseline) {
  switch (c.op) {
    case CheckOp::Less: return observed < c.value;
    case CheckOp::Greater: return observed > c.value;
    case CheckOp::Equal: return observed == c.value;
    case CheckOp::DeltaNegative: return observed - baseline < 0;
    case CheckOp::DeltaPositive: return observed - baseline > 0;
  }
  return false;
}

}  // namespace

Corpus parse_corpus(std::string_view text, const SimConfig& base) {
  Corpus corpus;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t offset = 0;
  while (offset < text.size()) {
    std::size_t nl = text.find('\n', offset);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(offset, nl - offset);
    offset = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = "corpus line " + std::to_string(line_no);
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw CorpusError(where + ": not a JSON object");
    try {
      if (!have_header) {
        if (j.value("version", 0) != 1) throw CorpusError(where + ": expected header {\"version\":1}");
        const json scenarios = j.value("scenarios", json::object());
        for (const auto& [name, s] : scenarios.items()) {
          corpus.scenarios[name] = parse_scenario(s, where + " scenario " + name);
        }
        have_header = true;
        continue;
      }
      CorpusEntry e;
      e.command = j.at("command").get<std::string>();
      const json sc = j.value("scenario", json(nullptr));
      if (sc.is_string()) {
        e.scenario_name = sc.get<std::string>();
        auto it = corpus.scenarios.find(e.scenario_name);
        if (it == corpus.scenarios.end()) throw CorpusError(where + ": unknown scenario '" + e.scenario_name + "'");
        e.scenario = it->second;
      } else if (sc.is_object()) {
        e.scenario = parse_scenario(sc, where);
      }
      for (const auto& c : j.value("checks", json::array())) e.checks.push_back(parse_check(c, where));
      const std::string expected = j.value("expected", std::string("good"));
      if (expected != "good" && expected != "bad") throw CorpusError(where + ": expected must be good or bad");
      e.expected = expected == "good" ? Verdict::Good : Verdict::Bad;
      if (e.scenario.spawn_distance) {
        SimConfig probe = base;
        probe.spawn_distance = *e.scenario.spawn_distance;
        if (auto p = probe.problems(); !p.empty()) throw CorpusError(where + ": " + p.front());
      }
      corpus.entries.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw CorpusError(where + ": " + ex.what());
    }
  }
  if (!have_header) throw CorpusError("corpus has no header record");
  return corpus;
}

EntryResult evaluate_entry(const CorpusEntry& entry, std::size_t index, const Translator& translator,
                           const EvalOptions& options) {
  EntryResult out;
  out.index = index;
  out.command = entry.command;
  out.expected = entry.expected;
  out.checks.resize(entry.checks.size());
  for (std::size_t k = 0; k < entry.checks.size(); ++k) out.checks[k].label = label(entry.checks[k]);

  SimConfig config = options.config;
  if (entry.scenario.spawn_distance) config.spawn_distance = *entry.scenario.spawn_distance;
  Match match(config, entry.scenario.seed, entry.scenario.opponent_policy);
  constexpr double kDeg = std::numbers::pi / 180.0;
  auto facing = [&](AgentId id, const std::optional<double>& deg) -> std::optional<double> {
    if (!deg) return std::nullopt;
    // Relative to facing the opponent, positive counter-clockwise.
    return match.world().agent(id).facing + *deg * kDeg;
  };
  match.place(AgentId::Player, entry.scenario.player_hp, facing(AgentId::Player, entry.scenario.player_facing_deg));
  match.place(AgentId::Opponent, entry.scenario.opponent_hp,
              facing(AgentId::Opponent, entry.scenario.opponent_facing_deg));

  std::deque<std::string> recent;
  auto step = [&] {
    if (match.finished()) return;
    match.step();
    recent.push_back(encode_state(match.state()));
    if (recent.size() > options.excerpt_lines) recent.pop_front();
  };
  auto graft_text = [&](const std::string& text) -> TranslationResult {
    TranslationResult t = translator.translate(text);
    auto compiled = compile(t.script);
    if (!compiled.ok()) throw TranslationError(TranslationError::Code::Configuration, describe(compiled.diagnostics));
    if (!match.finished()) out.rule = std::string(to_string(match.graft(AgentId::Player, *compiled.fragment).rule));
    return t;
  };

  try {
    for (const auto& pre : entry.scenario.pre) {
      graft_text(pre.text);
      for (std::uint32_t i = 0; i < pre.ticks; ++i) step();
    }
    TranslationResult t = graft_text(entry.command);
    out.script = t.canonical;
    out.latency_ms = t.latency_ms;
  } catch (const TranslationError& e) {
    out.error = e.what();
    out.verdict = Verdict::Bad;
    return out;
  }

  const StateView baseline = match.state();
  std::uint32_t horizon = 0;
  for (const auto& c : entry.checks) horizon = std::max(horizon, c.within_ticks);
  for (std::size_t k = 0; k < entry.checks.size(); ++k) {
    out.checks[k].observed = metric_value(entry.checks[k], baseline);
  }
  for (std::uint32_t t = 1; t <= horizon; ++t) {
    step();
    const StateView now = match.state();
    bool open = false;
    for (std::size_t k = 0; k < entry.checks.size(); ++k) {
      const Check& c = entry.checks[k];
      CheckResult& r = out.checks[k];
      if (t > c.within_ticks || (r.passed && !c.final_only)) continue;
      r.observed = metric_value(c, now);
      const bool ok = holds(c, r.observed, metric_value(c, baseline));
      if (c.final_only) {
        if (t == c.within_ticks) {
          r.passed = ok;
          if (ok) r.tick = t;
        } else {
          open = true;
        }
      } else if (ok) {
        r.passed = true;
        r.tick = t;
      } else {
        open = open || t < c.within_ticks;
      }
    }
    if (!open) break;
  }
  bool all = true;
  for (const auto& r : out.checks) all = all && r.passed;
  out.verdict = all ? Verdict::Good : Verdict::Bad;
  if (!all) out.excerpt.assign(recent.begin(), recent.end());
  return out;
}

EvalReport eval_corpus(const Corpus& corpus, const Translator& translator, const EvalOptions& options) {
  EvalReport report;
  report.strategy = std::string(to_string(translator.strategy()));
  for (std::size_t i = 0; i < corpus.entries.size(); ++i) {
    report.entries.push_back(evaluate_entry(corpus.entries[i], i, translator, options));
  }
  return report;
}

std::size_t EvalReport::good() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.verdict == Verdict::Good;
  return n;
}

std::size_t EvalReport::agreeing() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.verdict == e.expected;
  return n;
}

double EvalReport::good_ratio() const {
  return entries.empty() ? 0.0 : 100.0 * static_cast<double>(good()) / static_cast<double>(entries.size());
}

std::string EvalReport::to_json(bool timings) const {
  ordered_json j;
  j["version"] = 1;
  j["strategy"] = strategy;
  j["total"] = entries.size();
  j["good"] = good();
  j["bad"] = entries.size() - good();
  j["good_ratio"] = std::round(good_ratio() * 100.0) / 100.0;
  j["matching_expectation"] = agreeing();
  auto& list = j["entries"] = ordered_json::array();
  for (const auto& e : entries) {
    ordered_json ej;
    ej["index"] = e.index;
    ej["command"] = e.command;
    ej["expected"] = std::string(to_string(e.expected));
    ej["verdict"] = std::string(to_string(e.verdict));
    ej["script"] = e.script ? ordered_json::parse(*e.script) : ordered_json(nullptr);
    if (e.rule) ej["rule"] = *e.rule;
    if (e.error) ej["error"] = *e.error;
    auto& checks = ej["checks"] = ordered_json::array();
    for (const auto& c : e.checks) {
      ordered_json cj;
      cj["check"] = c.label;
      cj["passed"] = c.passed;
      cj["tick"] = c.tick ? ordered_json(*c.tick) : ordered_json(nullptr);
      cj["observed"] = c.observed;
      checks.push_back(std::move(cj));
    }
    if (!e.excerpt.empty()) {
      auto& ex = ej["excerpt"] = ordered_json::array();
      for (const auto& s : e.excerpt) ex.push_back(ordered_json::parse(s));
    }
    if (timings) ej["latency_ms"] = e.latency_ms;
    list.push_back(std::move(ej));
  }
  return j.dump(2);
}

}  // namespace bbranch
