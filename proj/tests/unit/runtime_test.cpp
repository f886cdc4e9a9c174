#include "doctest.h"

#include <fstream>
#include <sstream>

#include "bbranch/bench.hpp"
#include "bbranch/eventlog.hpp"
#include "bbranch/evaluation.hpp"
#include "bbranch/protocol.hpp"
#include "json.hpp"

using namespace bbranch;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in, path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

EventLog sample_log() {
  EventLog log;
  log.header.seed = 7;
  log.records = {
      {0, GraftRecord{AgentId::Player, R"([{"node":"repeat","count":"forever"},{"node":"action","kind":"thunderbolt"}])"}},
      {12, GraftRecord{AgentId::Opponent, R"([{"node":"action","kind":"approach_opponent"}])"}},
      {40, GraftRecord{AgentId::Player, R"([{"node":"condition","kind":"opponent_hp_below","params":{"value":80}}])"}},
      {60, ResetRecord{}},
      {30, GraftRecord{AgentId::Player, R"([{"node":"action","kind":"go_behind_opponent"}])"}},
      {90, EndRecord{}},
  };
  return log;
}

}  // namespace

TEST_CASE("client message decoding") {
  auto cmd = decode_client_message(R"({"type":"command","agent":"opponent","text":"Tackle","id":17})");
  REQUIRE(cmd.message);
  const auto& c = std::get<CommandMessage>(*cmd.message);
  CHECK(c.agent == AgentId::Opponent);
  CHECK(c.text == "Tackle");
  CHECK(c.id == "17");

  auto dflt = decode_client_message(R"({"type":"command","text":"Tackle"})");
  REQUIRE(dflt.message);
  CHECK(std::get<CommandMessage>(*dflt.message).agent == AgentId::Player);
  CHECK_FALSE(std::get<CommandMessage>(*dflt.message).id);

  auto sub = decode_client_message(R"({"type":"subscribe","channels":["state","events"],"id":"s1"})");
  REQUIRE(sub.message);
  CHECK(std::get<SubscribeMessage>(*sub.message).channels == Channels{true, false, true});
  CHECK(std::get<SubscribeMessage>(*sub.message).id == "\"s1\"");

  CHECK(decode_client_message(R"({"type":"reset"})").message);
  for (const char* bad : {"not json", "[1]", R"({"text":"x"})", R"({"type":"command"})",
                          R"({"type":"command","text":"x","agent":"ref"})", R"({"type":"dance"})",
                          R"({"type":"subscribe","channels":["gossip"]})"}) {
    INFO(bad);
    const auto d = decode_client_message(bad);
    CHECK_FALSE(d.message);
    CHECK_FALSE(d.error.empty());
  }
}

TEST_CASE("server message encoding") {
  const Match m(SimConfig{}, 1);
  const std::string s = encode_state(m.state());
  CHECK(s.rfind(R"({"type":"state","tick":0,"agents":[{"id":"player","x":-3.0,"y":0.0,"facing":0.0,"hp":100},)", 0) == 0);
  CHECK(s.find(R"("projectiles":[],"outcome":"ongoing"})") != std::string::npos);
  CHECK(encode_ack(std::nullopt) == R"({"type":"ack","id":null})");
  CHECK(encode_ack(std::string("\"a\"")) == R"({"type":"ack","id":"a"})");
  CHECK(encode_error("bad \"x\"") == R"({"type":"error","message":"bad \"x\""})");
  const std::string g = encode_graft(AgentId::Player, GraftRule::PreemptSwitch, R"([{"node":"action","kind":"tackle"}])", 1.5);
  const auto gj = nlohmann::json::parse(g);
  CHECK(gj["type"] == "graft");
  CHECK(gj["rule"] == "PreemptSwitch");
  CHECK(gj["script"][0]["kind"] == "tackle");
  const auto back = decode_client_message(encode_command(CommandMessage{AgentId::Opponent, "Tackle", "5"}));
  REQUIRE(back.message);
  CHECK(std::get<CommandMessage>(*back.message).id == "5");
}

TEST_CASE("event log round trip and errors") {
  const EventLog log = sample_log();
  const std::string text = encode_log(log);
  const EventLog back = parse_log(text);
  CHECK(encode_log(back) == text);
  CHECK(back.header.seed == 7);
  CHECK(back.records.size() == log.records.size());

  // Cut the final line short: the error names where that line starts.
  const std::size_t last_start = text.rfind('\n', text.size() - 2) + 1;
  const std::string cut = text.substr(0, text.size() - 5);
  try {
    parse_log(cut);
    FAIL("expected an error");
  } catch (const LogError& e) {
    CHECK(e.offset() == last_start);
    CHECK(std::string(e.what()).rfind("byte " + std::to_string(last_start), 0) == 0);
  }

  std::string wrong_version = text;
  wrong_version.replace(wrong_version.find("\"version\":1"), 11, "\"version\":9");
  CHECK_THROWS_AS(parse_log(wrong_version), LogError);
  CHECK_THROWS_AS(parse_log(""), LogError);
}

TEST_CASE("replay is deterministic and follows the log") {
  const EventLog log = sample_log();
  const Trace a = replay(log);
  const Trace b = replay(parse_log(encode_log(log)));
  CHECK(a.text() == b.text());
  CHECK(a.digest() == b.digest());
  // Initial state, 60 steps, the reset, then 90 more steps up to the end record.
  CHECK(a.states.size() == 1 + 60 + 1 + 90);
  CHECK(a.states[61].find(R"("tick":0,)") != std::string::npos);

  EventLog backwards = log;
  backwards.records = {{10, GraftRecord{AgentId::Player, R"([{"node":"action","kind":"tackle"}])"}}, {5, EndRecord{}}};
  CHECK_THROWS_AS(replay(backwards), LogError);
  EventLog bad = log;
  bad.records = {{1, GraftRecord{AgentId::Player, R"([{"node":"action","kind":"fly"}])"}}};
  CHECK_THROWS_AS(replay(bad), LogError);
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("bundled corpus evaluates deterministically") {
  const Corpus corpus = parse_corpus(read_file(BBTEST_DATA_DIR "/corpus_test.jsonl"));
  CHECK(corpus.entries.size() >= 36);
  const Translator t;
  const EvalReport a = eval_corpus(corpus, t);
  const EvalReport b = eval_corpus(corpus, t);
  CHECK(a.to_json() == b.to_json());
  CHECK(a.good_ratio() >= 86.11);
  CHECK(a.agreeing() == a.entries.size());
  const auto doc = nlohmann::json::parse(a.to_json());
  CHECK(doc.contains("good_ratio"));
  CHECK(a.to_json().find("latency_ms") == std::string::npos);
  CHECK(a.to_json(true).find("latency_ms") != std::string::npos);
}

TEST_CASE("every script in the corpus run compiles") {
  const Corpus corpus = parse_corpus(read_file(BBTEST_DATA_DIR "/corpus_test.jsonl"));
  const EvalReport r = eval_corpus(corpus, Translator{});
  for (const auto& e : r.entries) {
    if (!e.script) continue;
    INFO(e.command);
    CHECK(compile_text(*e.script).ok());
  }
}

TEST_CASE("corpus judging") {
  const std::string text = std::string(R"({"version":1,"scenarios":{"idle":{"opponent_policy":"idle"}}})") + "\n" +
                           R"({"command":"Tackle","scenario":"idle","checks":[{"metric":"attack_count","kind":"tackle","op":">","value":0,"within_ticks":5}],"expected":"good"})" + "\n" +
                           R"({"command":"Stop","scenario":"idle","checks":[{"metric":"attack_count","op":">","value":0,"within_ticks":30}],"expected":"bad"})" + "\n" +
                           R"({"command":"no idea what this is","scenario":{"spawn_distance":2},"checks":[{"metric":"distance","op":"<","value":100,"within_ticks":1}],"expected":"bad"})" + "\n";
  const Corpus c = parse_corpus(text);
  REQUIRE(c.entries.size() == 3);
  const EvalReport r = eval_corpus(c, Translator{});
  CHECK(r.entries[0].verdict == Verdict::Good);
  REQUIRE(r.entries[0].checks.size() == 1);
  CHECK(r.entries[0].checks[0].tick == 1);
  CHECK(r.entries[1].verdict == Verdict::Bad);
  CHECK(r.entries[2].verdict == Verdict::Bad);
  CHECK(r.entries[2].error);
  CHECK(r.good() == 1);
  CHECK(r.good_ratio() == doctest::Approx(100.0 / 3.0));
  CHECK(r.agreeing() == 3);

  CHECK_THROWS_AS(parse_corpus(R"({"version":2})"), CorpusError);
  CHECK_THROWS_AS(parse_corpus(std::string(R"({"version":1})") + "\n" + R"({"command":"x","scenario":"nowhere","checks":[]})"),
                  CorpusError);
}

TEST_CASE("bench reports every stage") {
  BenchOptions o;
  o.ticks = 300;
  const BenchReport r = bench(o);
  CHECK(r.ticks == 300);
  CHECK(r.commands == 30);
  REQUIRE(r.stages.size() == 4);
  CHECK(r.stages[0].name == "normalize+translate");
  CHECK(r.stages[3].samples == 300);
  CHECK(r.pipeline.samples == 30);
  CHECK(r.pipeline.p99_ms >= r.pipeline.p50_ms);
  CHECK(r.tick_jitter_ms == doctest::Approx(r.stages[3].p99_ms - r.stages[3].p50_ms));
  CHECK(r.to_text().find("Doherty") != std::string::npos);
  CHECK(nlohmann::json::parse(r.to_json()).contains("pipeline"));

  BenchOptions none;
  none.ticks = 0;
  const BenchReport z = bench(none);
  CHECK(z.commands == 0);
  CHECK(z.pipeline.p99_ms == 0.0);
}

TEST_CASE("percentile by nearest rank") {
  CHECK(percentile({}, 50) == 0.0);
  CHECK(percentile({5}, 99) == 5.0);
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  CHECK(percentile(v, 50) == 50.0);
  CHECK(percentile(v, 99) == 99.0);
  CHECK(percentile(v, 100) == 100.0);
}
