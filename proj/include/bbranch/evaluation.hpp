#pragma once

// Corpus replay harness: each entry is a command, a scenario to run it in,
// and mechanized checks that decide a good/bad verdict.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bbranch/match.hpp"
#include "bbranch/translator.hpp"

namespace bbranch {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PreCommand {
  std::string text;
  std::uint32_t ticks = 0;  // steps to run after grafting it
};

struct Scenario {
  std::optional<double> spawn_distance;
  std::optional<int> player_hp;
  std::optional<int> opponent_hp;
  std::optional<double> player_facing_deg;
  std::optional<double> opponent_facing_deg;
  OpponentPolicy opponent_policy = OpponentPolicy::Scripted;
  std::uint64_t seed = 1;
  std::vector<PreCommand> pre;
};

enum class Metric { OpponentHp, SelfHp, Distance, RelativeBearing, AttackCount };
enum class CheckOp { Less, Greater, Equal, DeltaNegative, DeltaPositive };

struct Check {
  Metric metric = Metric::Distance;
  std::optional<AttackKind> attack;  // AttackCount only; absent counts all kinds
  AgentId from = AgentId::Player;    // perspective for bearing and attack counts
  CheckOp op = CheckOp::Less;
  double value = 0.0;
  std::uint32_t within_ticks = 1;
  bool final_only = false;  // judge at within_ticks instead of at any tick up to it
};

enum class Verdict { Good, Bad };
std::string_view to_string(Verdict v);

struct CorpusEntry {
  std::string command;
  std::string scenario_name;  // empty when inline
  Scenario scenario;
  std::vector<Check> checks;
  Verdict expected = Verdict::Good;
};

struct Corpus {
  std::map<std::string, Scenario> scenarios;
  std::vector<CorpusEntry> entries;
};

/// Header {"version":1,"scenarios":{...}?} then one entry per line.
Corpus parse_corpus(std::string_view text, const SimConfig& base = SimConfig{});

struct CheckResult {
  std::string label;  // e.g. "attack_count(thunderbolt) > 3 within 200"
  bool passed = false;
  std::optional<Tick> tick;  // ticks after the graft when it passed
  double observed = 0.0;     // last observed metric value
};

struct EntryResult {
  std::size_t index = 0;
  std::string command;
  Verdict expected = Verdict::Good;
  Verdict verdict = Verdict::Bad;
  std::optional<std::string> script;  // canonical translation
  std::optional<std::string> error;   // translation or graft failure
  std::optional<std::string> rule;    // graft rule applied
  std::vector<CheckResult> checks;
  std::vector<std::string> excerpt;   // last states, on a bad verdict
  double latency_ms = 0.0;
};

struct EvalReport {
  std::string strategy;
  std::vector<EntryResult> entries;
  std::size_t good() const;
  std::size_t agreeing() const;  // verdict == expected
  double good_ratio() const;     // percent of entries judged good
  /// Deterministic JSON document; latencies only when `timings`.
  std::string to_json(bool timings = false) const;
};

struct EvalOptions {
  SimConfig config;
  std::size_t excerpt_lines = 3;
};

EntryResult evaluate_entry(const CorpusEntry& entry, std::size_t index, const Translator& translator,
                           const EvalOptions& options = {});
EvalReport eval_corpus(const Corpus& corpus, const Translator& translator, const EvalOptions& options = {});

}  // namespace bbranch
