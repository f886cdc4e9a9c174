#include "doctest.h"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "bbranch/translator.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace bbranch;

namespace {

using Tokens = std::vector<std::string>;

std::string rule(const std::string& text) { return translate_rule_based(text).canonical; }

TranslationError::Code code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const TranslationError& e) {
    return e.code();
  }
  FAIL("expected a TranslationError");
  return TranslationError::Code::Configuration;
}

// Completion client fed from a fixed list; records every prompt.
class ListClient final : public CompletionClient {
 public:
  explicit ListClient(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(const std::string& prompt) override {
    prompts.push_back(prompt);
    if (next_ >= replies_.size()) throw TranslationError(TranslationError::Code::Network, "no more replies");
    return replies_[next_++];
  }
  std::vector<std::string> prompts;

 private:
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
};

// Local completion endpoint on a free port.
class MockEndpoint {
 public:
  explicit MockEndpoint(std::vector<std::string> replies) : replies_(std::move(replies)) {
    server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      auth.push_back(req.get_header_value("Authorization"));
      bodies.push_back(req.body);
      const std::size_t i = std::min(calls++, replies_.size() - 1);
      nlohmann::json reply = {{"choices", {{{"text", replies_[i]}}}}};
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockEndpoint() {
    server_.stop();
    thread_.join();
  }
  EndpointConfig config() const {
    EndpointConfig c;
    c.url = "http://127.0.0.1:" + std::to_string(port_);
    c.api_key_env = "BBRANCH_TEST_KEY";
    c.timeout_seconds = 5;
    return c;
  }
  std::size_t calls = 0;
  std::vector<std::string> auth;
  std::vector<std::string> bodies;

 private:
  std::vector<std::string> replies_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("normalize") {
  CHECK(normalize("Attack to the enemy!") == Tokens{"attack", "to", "the", "opponent"});
  CHECK(normalize("").empty());
  CHECK(normalize("   ").empty());
  CHECK(normalize("THUNDERBOLT") == Tokens{"thunderbolt"});
  CHECK(normalize("Move LEFT for 2.5 secs.") == Tokens{"move", "left", "for", "2.5", "seconds"});
  CHECK(normalize("Don't stop") == Tokens{"dont", "stop"});
  CHECK(normalize("after that, tackle") == Tokens{"then", "tackle"});
}

TEST_CASE("synonym tables load from data") {
  const auto t = SynonymTable::from_json(R"({"phrases":{"big hit":"tackle"},"words":{"zap":"thunderbolt"}})");
  CHECK(normalize("Zap then BIG hit", t) == Tokens{"thunderbolt", "then", "tackle"});
  CHECK_THROWS_AS(SynonymTable::from_json("not json"), TranslationError);
}

TEST_CASE("rule coverage for the command families") {
  CHECK(rule("Keep doing thunderbolt") == R"([{"node":"repeat","count":"forever"},{"node":"action","kind":"thunderbolt"}])");
  CHECK(rule("Continue to thunderbolt") == rule("Keep doing thunderbolt"));
  CHECK(rule("Escape from opponent") == R"([{"node":"action","kind":"retreat_from_opponent"}])");
  CHECK(rule("Escape") == R"([{"node":"action","kind":"retreat_from_opponent"}])");
  CHECK(rule("Go behind the opponent") == R"([{"node":"action","kind":"go_behind_opponent"}])");
  CHECK(rule("Tackle") == R"([{"node":"action","kind":"tackle"}])");
  CHECK(rule("Iron tail") == R"([{"node":"action","kind":"iron_tail"}])");
  CHECK(rule("Attack to the enemy") ==
        R"([{"node":"action","kind":"face_opponent"},{"node":"action","kind":"thunderbolt"}])");
  CHECK(rule("Use thunderbolt 3 times") == R"([{"node":"repeat","count":3},{"node":"action","kind":"thunderbolt"}])");
  CHECK(rule("Stop") == R"([{"node":"action","kind":"idle"}])");
  CHECK(rule("then tackle") == R"([{"node":"then"},{"node":"action","kind":"tackle"}])");
  CHECK(rule("After that, iron tail") == R"([{"node":"then"},{"node":"action","kind":"iron_tail"}])");
  CHECK(rule("If the distance is below 2 then iron tail") ==
        R"([{"node":"condition","kind":"distance_below","params":{"value":2},"true":[{"node":"action","kind":"iron_tail"}]}])");
  CHECK(rule("when your hp is less than 30, escape") ==
        R"([{"node":"condition","kind":"self_hp_below","params":{"value":30},"true":[{"node":"action","kind":"retreat_from_opponent"}]}])");
}

TEST_CASE("every rule translation validates and compiles") {
  for (const char* text : {"Keep doing thunderbolt", "Escape from opponent", "Go behind the opponent",
                           "Attack to the enemy", "Tackle twice", "thunderbolt then tackle then iron tail",
                           "If the opponent is close then iron tail", "Approach the opponent"}) {
    INFO(text);
    const auto r = translate_rule_based(text);
    CHECK_FALSE(has_errors(validate(r.script)));
    CHECK(compile(r.script).ok());
    CHECK(r.source == TranslationResult::Source::RuleBased);
    CHECK(r.canonical == serialize(r.script));
    CHECK(translate_rule_based(text).canonical == r.canonical);
  }
}

TEST_CASE("unmatched and empty commands") {
  CHECK(code_of([] { translate_rule_based("dance a waltz"); }) == TranslationError::Code::NoMatch);
  CHECK(code_of([] { translate_rule_based("The same action"); }) == TranslationError::Code::NoMatch);
  CHECK(code_of([] { translate_rule_based("   "); }) == TranslationError::Code::EmptyCommand);
}

TEST_CASE("patterns") {
  const auto p = parse_pattern("keep|continue {action} <n> times?");
  REQUIRE(p.size() == 4);
  CHECK(p[0].alternatives == Tokens{"keep", "continue"});
  CHECK(p[1].kind == PatternElement::Kind::Nonterminal);
  CHECK(p[1].category == "action");
  CHECK(p[3].optional);
  CHECK_THROWS_AS(parse_pattern("{unclosed"), TranslationError);
  CHECK_THROWS_AS(parse_pattern(""), TranslationError);
  CHECK_THROWS_AS(parse_pattern("zap <n>? times"), TranslationError);
}

TEST_CASE("custom rule sets") {
  const auto rules = RuleSet::from_json(R"({"start":"command","fillers":["the"],"rules":[
      {"category":"command","pattern":"zap <n> times","script":[{"node":"repeat","count":"$0"},{"node":"action","kind":"thunderbolt"}]},
      {"category":"command","pattern":"zap","script":[{"node":"action","kind":"thunderbolt"}]}]})");
  const auto r = translate_rule_based("zap 4 times", rules);
  CHECK(r.canonical == R"([{"node":"repeat","count":4},{"node":"action","kind":"thunderbolt"}])");
  CHECK(translate_rule_based("zap the", rules).canonical == R"([{"node":"action","kind":"thunderbolt"}])");
  CHECK_THROWS_AS(RuleSet::from_json(R"({"rules":[{"category":"command","pattern":"x"}]})"), TranslationError);
}

TEST_CASE("prompt assembly") {
  const PromptTemplate t("Intro.\n{{exemplars}}Command: {{command}}\nScript:",
                         {{"Tackle", R"([{"node":"action","kind":"tackle"}])"},
                          {"Escape", R"([{ "node":"action", "kind":"retreat_from_opponent" }])"}});
  CHECK(build_prompt("tackle", t) ==
        "Intro.\n"
        "Command: Tackle\nScript: [{\"node\":\"action\",\"kind\":\"tackle\"}]\n\n"
        "Command: Escape\nScript: [{\"node\":\"action\",\"kind\":\"retreat_from_opponent\"}]\n\n"
        "Command: tackle\nScript:");

  const PromptTemplate none("Intro.\n{{exemplars}}> {{command}}", {});
  CHECK(build_prompt("tackle", none) == "Intro.\n> tackle");

  CHECK_THROWS_AS(PromptTemplate("{{exemplars}}{{command}}", {{"Fly", R"([{"node":"action","kind":"fly"}])"}}),
                  TranslationError);
  CHECK_THROWS_AS(PromptTemplate("no markers", {}), TranslationError);
  CHECK_THROWS_AS(PromptTemplate("{{command}} {{exemplars}}", {}), TranslationError);
}

TEST_CASE("bundled prompt matches the golden file") {
  std::ifstream in(BBTEST_GOLDEN_DIR "/prompt_tackle.txt", std::ios::binary);
  REQUIRE(in);
  std::stringstream golden;
  golden << in.rdbuf();
  CHECK(build_prompt("tackle", PromptTemplate::builtin()) == golden.str());
  for (const auto& ex : PromptTemplate::builtin().exemplars()) {
    const auto p = parse(ex.script);
    REQUIRE(p.ok());
    CHECK_FALSE(has_errors(validate(*p.script)));
  }
}

TEST_CASE("script extraction from completions") {
  CHECK(extract_script(R"([{"node":"action","kind":"tackle"}])") == R"([{"node":"action","kind":"tackle"}])");
  CHECK(extract_script("Sure! Here it is:\n```json\n[{\"node\":\"action\",\"kind\":\"tackle\"}]\n```\nHave fun.") ==
        R"([{"node":"action","kind":"tackle"}])");
  CHECK(extract_script("```\n[1, [2]]\n``` and [3]") == "[1, [2]]");
  CHECK(extract_script(R"(The list [{"node":"action","kind":"say","params":{"dir":"]"}}] is it)") ==
        R"([{"node":"action","kind":"say","params":{"dir":"]"}}])");
  CHECK_FALSE(extract_script("no script here"));
  CHECK_FALSE(extract_script("[unterminated"));
}

TEST_CASE("llm translation with a scripted client") {
  SUBCASE("bare array") {
    ListClient c({R"([{"node":"action","kind":"tackle"}])"});
    const auto r = translate_llm("hit it hard", c);
    CHECK(r.canonical == R"([{"node":"action","kind":"tackle"}])");
    CHECK(r.source == TranslationResult::Source::Llm);
    CHECK(r.raw == R"([{"node":"action","kind":"tackle"}])");
    CHECK(c.prompts.size() == 1);
  }
  SUBCASE("repair on the second attempt") {
    ListClient c({R"([{"node":"action","kind":"fly"}])", "```\n[{\"node\":\"action\",\"kind\":\"iron_tail\"}]\n```"});
    const auto r = translate_llm("spin", c);
    CHECK(r.canonical == R"([{"node":"action","kind":"iron_tail"}])");
    REQUIRE(c.prompts.size() == 2);
    CHECK(c.prompts[1].find("fly") != std::string::npos);
    CHECK(c.prompts[1].rfind(c.prompts[0], 0) == 0);
  }
  SUBCASE("garbage twice") {
    ListClient c({"I cannot do that.", "Still no."});
    CHECK(code_of([&] { translate_llm("spin", c); }) == TranslationError::Code::ValidationFailedTwice);
    CHECK(c.prompts.size() == 2);
  }
}

TEST_CASE("http completion client against a local endpoint") {
  ::setenv("BBRANCH_TEST_KEY", "secret-token", 1);
  SUBCASE("success") {
    MockEndpoint ep({R"([{"node":"action","kind":"tackle"}])"});
    HttpCompletionClient client(ep.config());
    const auto r = translate_llm("tackle please", client);
    CHECK(r.canonical == R"([{"node":"action","kind":"tackle"}])");
    REQUIRE(ep.calls == 1);
    CHECK(ep.auth[0] == "Bearer secret-token");
    const auto body = nlohmann::json::parse(ep.bodies[0]);
    CHECK(body["model"] == "code-model");
    CHECK(body["temperature"] == 0);
    CHECK(body["prompt"].get<std::string>().find("tackle please") != std::string::npos);
  }
  SUBCASE("fenced reply") {
    MockEndpoint ep({"Here you go:\n```json\n[{\"node\":\"repeat\",\"count\":\"forever\"},{\"node\":\"action\",\"kind\":\"thunderbolt\"}]\n```"});
    HttpCompletionClient client(ep.config());
    CHECK(translate_llm("bolt forever", client).canonical ==
          R"([{"node":"repeat","count":"forever"},{"node":"action","kind":"thunderbolt"}])");
  }
  SUBCASE("garbage twice") {
    MockEndpoint ep({"nope", "still nope"});
    HttpCompletionClient client(ep.config());
    CHECK(code_of([&] { translate_llm("bolt", client); }) == TranslationError::Code::ValidationFailedTwice);
    CHECK(ep.calls == 2);
  }
  SUBCASE("hybrid uses rules first") {
    MockEndpoint ep({R"([{"node":"action","kind":"iron_tail"}])"});
    Translator t(Strategy::Hybrid, std::make_shared<HttpCompletionClient>(ep.config()));
    const auto a = t.translate("tackle");
    CHECK(a.source == TranslationResult::Source::RuleBased);
    CHECK(ep.calls == 0);
    const auto b = t.translate("do a barrel roll");
    CHECK(b.source == TranslationResult::Source::Llm);
    CHECK(b.canonical == R"([{"node":"action","kind":"iron_tail"}])");
    CHECK(ep.calls == 1);
  }
  SUBCASE("unreachable endpoint") {
    EndpointConfig c;
    c.url = "http://127.0.0.1:1";
    c.api_key_env = "BBRANCH_TEST_KEY";
    c.timeout_seconds = 1;
    HttpCompletionClient client(c);
    CHECK(code_of([&] { client.complete("x"); }) == TranslationError::Code::Network);
  }
}

TEST_CASE("missing api key names the variable") {
  ::unsetenv("BBRANCH_TEST_MISSING_KEY");
  EndpointConfig c;
  c.api_key_env = "BBRANCH_TEST_MISSING_KEY";
  try {
    HttpCompletionClient client(c);
    FAIL("expected an error");
  } catch (const TranslationError& e) {
    CHECK(e.code() == TranslationError::Code::Configuration);
    CHECK(std::string(e.what()).find("BBRANCH_TEST_MISSING_KEY") != std::string::npos);
  }
}

TEST_CASE("strategies") {
  CHECK(strategy_from_string("rule") == Strategy::RuleBased);
  CHECK(strategy_from_string("llm") == Strategy::Llm);
  CHECK(strategy_from_string("hybrid") == Strategy::Hybrid);
  CHECK_FALSE(strategy_from_string("magic"));
  CHECK(code_of([] { Translator t(Strategy::Llm); }) == TranslationError::Code::Configuration);
  Translator rules;
  CHECK(code_of([&] { rules.translate("dance a waltz"); }) == TranslationError::Code::NoMatch);
}
