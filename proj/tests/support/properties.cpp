#include "support/properties.hpp"

#include <array>
#include <exception>

#include "bbranch/match.hpp"
#include "bbranch/script.hpp"
#include "bbranch/translator.hpp"
#include "support/generators.hpp"

namespace bbtest {

using namespace bbranch;

namespace {

void fail(PropertyResult& r, std::string why) {
  if (r.failures++ == 0) r.first_failure = std::move(why);
}

}  // namespace

PropertyResult fuzz_parser(std::uint64_t seed, std::size_t cases) {
  PropertyResult r;
  r.name = "parser on arbitrary bytes";
  Rng rng(seed);
  for (std::size_t i = 0; i < cases; ++i) {
    const std::string input = random_bytes(rng, 96);
    ++r.cases;
    try {
      const ParseResult p = parse(input);
      if (!p.ok() && p.diagnostics.empty()) fail(r, "rejected without a diagnostic");
      if (!p.ok()) continue;
      const std::string once = serialize(*p.script);
      const ParseResult again = parse(once);
      if (!again.ok() || serialize(*again.script) != once) fail(r, "accepted input is not a fixed point");
    } catch (const std::exception& e) {
      fail(r, std::string("parse threw: ") + e.what());
    } catch (...) {
      fail(r, "parse threw a non-standard exception");
    }
  }
  return r;
}

PropertyResult script_round_trip(std::uint64_t seed, std::size_t cases) {
  PropertyResult r;
  r.name = "parse/serialize round trip";
  Rng rng(seed);
  for (std::size_t i = 0; i < cases; ++i) {
    const Script s = random_script(rng);
    ++r.cases;
    if (auto d = validate(s); has_errors(d)) {
      fail(r, "generator produced an invalid script: " + describe(d));
      continue;
    }
    const std::string text = serialize(s);
    const ParseResult back = parse(text);
    if (!back.ok() || !(*back.script == s)) {
      fail(r, "round trip changed " + text);
      continue;
    }
    const std::string noisy = noisy_serialize(s, rng);
    const ParseResult loose = parse(noisy);
    if (!loose.ok() || !(*loose.script == s) || serialize(*loose.script) != text) {
      fail(r, "non-canonical spelling parsed differently: " + noisy);
    }
  }
  return r;
}

PropertyResult session_invariants(std::uint64_t seed, std::size_t sessions, std::size_t commands) {
  PropertyResult r;
  r.name = "session invariants";
  static const std::vector<std::string> texts = {
      "Keep doing thunderbolt", "Continue to thunderbolt", "Escape from opponent", "Go behind the opponent",
      "Tackle", "Iron tail", "Approach the opponent", "then tackle", "If the opponent is close then iron tail",
      "Use thunderbolt 3 times", "when hp below 50 then escape", "Stop when the opponent hp is below 40"};
  const SimConfig config;
  Rng rng(seed);
  for (std::size_t s = 0; s < sessions; ++s) {
    Match match(config, seed + s, rng() % 2 ? OpponentPolicy::Scripted : OpponentPolicy::Idle);
    std::array<int, 2> hp{match.world().agents[0].hp, match.world().agents[1].hp};
    ++r.cases;
    const std::string where = "session " + std::to_string(s);
    try {
      for (std::size_t c = 0; c < commands; ++c) {
        if (match.finished()) {
          match.reset();
          hp = {match.world().agents[0].hp, match.world().agents[1].hp};
        }
        std::optional<BranchFragment> fragment;
        if (coin(rng, 0.3)) {
          try {
            const auto t = translate_rule_based(texts[static_cast<std::size_t>(uniform(rng, 0, static_cast<std::int64_t>(texts.size()) - 1))]);
            fragment = compile(t.script).fragment;
          } catch (const TranslationError&) {
          }
        }
        if (!fragment) {
          CompileResult cr = compile(random_fragment_script(rng));
          if (!cr.ok()) {
            fail(r, where + ": generated fragment failed to compile: " + describe(cr.diagnostics));
            break;
          }
          fragment = std::move(cr.fragment);
        }
        const AgentId agent = coin(rng, 0.7) ? AgentId::Player : AgentId::Opponent;
        const std::size_t before = match.branch(agent).size();
        const GraftReport report = match.graft(agent, *fragment);
        const std::size_t after = match.branch(agent).size();
        if (after != before + fragment->tree.size() - report.discarded_subtree.size()) {
          fail(r, where + ": node count changed by more than the recorded discard");
        }
        if (!report.discarded_subtree.empty() && report.rule != GraftRule::PreemptSwitch) {
          fail(r, where + ": discard outside a preemption");
        }
        const auto steps = uniform(rng, 0, 6);
        for (std::int64_t k = 0; k < steps && !match.finished(); ++k) {
          match.step();
          for (std::size_t i = 0; i < 2; ++i) {
            const int now = match.world().agents[i].hp;
            if (now > hp[i] || now < 0) fail(r, where + ": hp went from " + std::to_string(hp[i]) + " to " + std::to_string(now));
            hp[i] = now;
          }
        }
        for (AgentId id : {AgentId::Player, AgentId::Opponent}) {
          if (auto problems = check_structure(match.branch(id)); !problems.empty()) {
            fail(r, where + ": " + problems.front());
          }
        }
      }
    } catch (const std::exception& e) {
      fail(r, where + ": " + e.what());
    }
  }
  return r;
}

}  // namespace bbtest
