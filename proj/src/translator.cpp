#include "bbranch/translator.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <map>
#include <tuple>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"
#include "json.hpp"

#include "internal/embedded.hpp"

namespace bbranch {

using nlohmann::json;

std::string_view to_string(TranslationError::Code code) {
  switch (code) {
    case TranslationError::Code::EmptyCommand: return "empty-command";
    case TranslationError::Code::NoMatch: return "no-match";
    case TranslationError::Code::Network: return "network";
    case TranslationError::Code::ExtractionFailed: return "extraction-failed";
    case TranslationError::Code::ValidationFailedTwice: return "validation-failed-twice";
    case TranslationError::Code::Configuration: return "configuration";
  }
  return "unknown";
}

namespace {

TranslationError config_error(const std::string& what) {
  return TranslationError(TranslationError::Code::Configuration, what);
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::optional<double> as_number(const std::string& token) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Normalization

SynonymTable SynonymTable::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error(std::string("synonym table: ") + e.what());
  }
  SynonymTable table;
  const json phrases = doc.value("phrases", json::object());
  const json words = doc.value("words", json::object());
  for (const auto& [from, to] : phrases.items()) {
    if (!to.is_string()) throw config_error("synonym table: phrase '" + from + "' must map to a string");
    table.phrases.emplace_back(split_words(from), split_words(to.get<std::string>()));
  }
  std::stable_sort(table.phrases.begin(), table.phrases.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  for (const auto& [from, to] : words.items()) {
    if (!to.is_string()) throw config_error("synonym table: word '" + from + "' must map to a string");
    table.words[from] = to.get<std::string>();
  }
  return table;
}

const SynonymTable& SynonymTable::builtin() {
  static const SynonymTable table = from_json(embedded::synonyms_json());
  return table;
}

std::vector<std::string> normalize(std::string_view text, const SynonymTable& synonyms) {
  std::string clean;
  clean.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isalnum(c) || c == '_') {
      clean += static_cast<char>(std::tolower(c));
    } else if (c == '.' && i > 0 && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i - 1])) &&
               std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
      clean += '.';
    } else if (c == '\'') {
      // "don't" -> "dont"
    } else {
      clean += ' ';
    }
  }
  std::vector<std::string> words = split_words(clean);

  std::vector<std::string> phrased;
  for (std::size_t i = 0; i < words.size();) {
    bool replaced = false;
    for (const auto& [from, to] : synonyms.phrases) {
      if (from.empty() || i + from.size() > words.size()) continue;
      if (std::equal(from.begin(), from.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) {
        phrased.insert(phrased.end(), to.begin(), to.end());
        i += from.size();
        replaced = true;
        break;
      }
    }
    if (!replaced) phrased.push_back(words[i++]);
  }

  std::vector<std::string> out;
  out.reserve(phrased.size());
  for (auto& w : phrased) {
    auto it = synonyms.words.find(w);
    if (it == synonyms.words.end()) {
      out.push_back(std::move(w));
    } else {
      for (auto& part : split_words(it->second)) out.push_back(std::move(part));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rule engine

std::vector<PatternElement> parse_pattern(std::string_view pattern) {
  std::vector<PatternElement> out;
  for (const std::string& word : split_words(pattern)) {
    PatternElement e;
    if (word == "<n>") {
      e.kind = PatternElement::Kind::Number;
    } else if (word.size() > 2 && word.front() == '{' && word.back() == '}') {
      e.kind = PatternElement::Kind::Nonterminal;
      e.category = word.substr(1, word.size() - 2);
    } else if (word.find_first_of("{}<>") != std::string::npos) {
      throw config_error("pattern '" + std::string(pattern) + "': malformed element '" + word + "'");
    } else {
      std::string body = word;
      if (body.back() == '?') {
        e.optional = true;
        body.pop_back();
      }
      std::size_t start = 0;
      while (start <= body.size()) {
        const std::size_t bar = body.find('|', start);
        const std::string alt = body.substr(start, bar == std::string::npos ? std::string::npos : bar - start);
        if (alt.empty()) throw config_error("pattern '" + std::string(pattern) + "': empty alternative");
        e.alternatives.push_back(alt);
        if (bar == std::string::npos) break;
        start = bar + 1;
      }
    }
    out.push_back(std::move(e));
  }
  if (out.empty()) throw config_error("empty pattern");
  return out;
}

RuleSet RuleSet::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error(std::string("rule set: ") + e.what());
  }
  RuleSet set;
  set.fillers_ = doc.value("fillers", std::vector<std::string>{});
  std::sort(set.fillers_.begin(), set.fillers_.end());
  set.start_ = doc.value("start", std::string("command"));
  const json rules = doc.value("rules", json::array());
  for (std::size_t i = 0; i < rules.size(); ++i) {
    const json& r = rules[i];
    if (!r.contains("category") || !r.contains("pattern") || !r.contains("script")) {
      throw config_error("rule " + std::to_string(i) + ": needs category, pattern and script");
    }
    PatternRule rule;
    rule.category = r["category"].get<std::string>();
    rule.source = r["pattern"].get<std::string>();
    rule.trigger = parse_pattern(rule.source);
    rule.builder = r["script"].dump();
    rule.priority = r.value("priority", 0);
    rule.order = i;
    set.rules_.push_back(std::move(rule));
  }
  return set;
}

const RuleSet& RuleSet::builtin() {
  static const RuleSet set = from_json(embedded::rules_json());
  return set;
}

namespace {

struct Parse {
  json nodes;  // node list
  int priority = 0;
  int literals = 0;
  std::size_t order = 0;

  // Higher priority, then more literal words, then earlier rule.
  bool better_than(const Parse& o) const {
    return std::tie(priority, literals) > std::tie(o.priority, o.literals) ||
           (std::tie(priority, literals) == std::tie(o.priority, o.literals) && order < o.order);
  }
};

// Fills a builder template. Objects {"splice":k} are replaced by the k-th
// nonterminal's nodes, {"splice_true":[c,s]} by condition capture c holding
// capture s as its true branch; strings "$k" or "$k*f" by the k-th number.
struct Filler {
  const std::vector<json>& splices;
  const std::vector<double>& numbers;
  bool ok = true;

  json value(const json& t) {
    if (t.is_string()) {
      const std::string s = t.get<std::string>();
      if (s.size() >= 2 && s[0] == '$' && std::isdigit(static_cast<unsigned char>(s[1]))) {
        std::size_t k = 0;
        auto [p, ec] = std::from_chars(s.data() + 1, s.data() + s.size(), k);
        double factor = 1.0;
        if (p != s.data() + s.size()) {
          if (*p != '*' || !(as_number(std::string(p + 1, s.data() + s.size())))) {
            ok = false;
            return t;
          }
          factor = *as_number(std::string(p + 1, s.data() + s.size()));
        }
        if (ec != std::errc{} || k >= numbers.size()) {
          ok = false;
          return t;
        }
        const double v = numbers[k] * factor;
        if (std::trunc(v) == v && std::abs(v) < 1e15) return json(static_cast<std::int64_t>(v));
        return json(v);
      }
      return t;
    }
    if (t.is_array()) return list(t);
    if (t.is_object()) {
      json out = json::object();
      for (const auto& [k, v] : t.items()) out[k] = value(v);
      return out;
    }
    return t;
  }

  json list(const json& t) {
    json out = json::array();
    for (const auto& item : t) {
      if (item.is_object() && item.size() == 1 && item.contains("splice")) {
        const auto k = item["splice"].get<std::size_t>();
        if (k >= splices.size()) {
          ok = false;
          continue;
        }
        for (const auto& n : splices[k]) out.push_back(n);
      } else if (item.is_object() && item.size() == 1 && item.contains("splice_true")) {
        // [c, s]: the single condition of capture c, with capture s as its true branch
        const auto c = item["splice_true"].at(0).get<std::size_t>();
        const auto b = item["splice_true"].at(1).get<std::size_t>();
        if (c >= splices.size() || b >= splices.size() || splices[c].size() != 1) {
          ok = false;
          continue;
        }
        json cond = splices[c][0];
        cond["true"] = splices[b];
        out.push_back(std::move(cond));
      } else {
        out.push_back(value(item));
      }
    }
    return out;
  }
};

class Matcher {
 public:
  Matcher(const std::vector<PatternRule>& rules, const std::vector<std::string>& tokens)
      : rules_(rules), tokens_(tokens) {}

  std::optional<Parse> parse(const std::string& category, std::size_t i, std::size_t j) {
    const auto key = std::make_tuple(category, i, j);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    memo_[key] = std::nullopt;  // guards left recursion on the same span
    std::optional<Parse> best;
    for (const auto& rule : rules_) {
      if (rule.category != category) continue;
      State st;
      if (!match(rule, 0, i, j, st)) continue;
      Filler filler{st.splices, st.numbers};
      json nodes = filler.list(json::parse(rule.builder));
      if (!filler.ok) continue;
      Parse p{std::move(nodes), rule.priority, st.literals, rule.order};
      if (!best || p.better_than(*best)) best = std::move(p);
    }
    memo_[key] = best;
    return best;
  }

 private:
  struct State {
    std::vector<json> splices;
    std::vector<double> numbers;
    int literals = 0;
  };

  bool match(const PatternRule& rule, std::size_t e, std::size_t pos, std::size_t end, State& st) {
    if (e == rule.trigger.size()) return pos == end;
    const PatternElement& el = rule.trigger[e];
    switch (el.kind) {
      case PatternElement::Kind::Literal: {
        if (pos < end && std::find(el.alternatives.begin(), el.alternatives.end(), tokens_[pos]) != el.alternatives.end()) {
          ++st.literals;
          if (match(rule, e + 1, pos + 1, end, st)) return true;
          --st.literals;
        }
        return el.optional && match(rule, e + 1, pos, end, st);
      }
      case PatternElement::Kind::Number: {
        if (pos >= end) return false;
        auto v = as_number(tokens_[pos]);
        if (!v) return false;
        st.numbers.push_back(*v);
        if (match(rule, e + 1, pos + 1, end, st)) return true;
        st.numbers.pop_back();
        return false;
      }
      case PatternElement::Kind::Nonterminal: {
        for (std::size_t k = pos + 1; k <= end; ++k) {
          auto sub = parse(el.category, pos, k);
          if (!sub) continue;
          st.splices.push_back(sub->nodes);
          st.literals += sub->literals;
          if (match(rule, e + 1, k, end, st)) return true;
          st.literals -= sub->literals;
          st.splices.pop_back();
        }
        return false;
      }
    }
    return false;
  }

  const std::vector<PatternRule>& rules_;
  const std::vector<std::string>& tokens_;
  std::map<std::tuple<std::string, std::size_t, std::size_t>, std::optional<Parse>> memo_;
};

}  // namespace

std::optional<Script> RuleSet::match(const std::vector<std::string>& tokens) const {
  std::vector<std::string> content;
  for (const auto& t : tokens) {
    if (!std::binary_search(fillers_.begin(), fillers_.end(), t)) content.push_back(t);
  }
  if (content.empty()) return std::nullopt;
  Matcher m(rules_, content);
  auto best = m.parse(start_, 0, content.size());
  if (!best) return std::nullopt;
  ParseResult parsed = bbranch::parse(best->nodes.dump());
  if (!parsed.ok()) {
    throw config_error("rule produced a malformed script: " + describe(parsed.diagnostics));
  }
  return std::move(parsed.script);
}

// ---------------------------------------------------------------------------
// Prompting

PromptTemplate::PromptTemplate(std::string_view template_text, std::vector<Exemplar> exemplars,
                               const Catalog& catalog)
    : exemplars_(std::move(exemplars)) {
  const auto ex = template_text.find(kExemplarsMarker);
  if (ex == std::string_view::npos || template_text.find(kExemplarsMarker, ex + 1) != std::string_view::npos) {
    throw config_error("prompt template must contain " + std::string(kExemplarsMarker) + " exactly once");
  }
  preamble_ = std::string(template_text.substr(0, ex));
  suffix_ = std::string(template_text.substr(ex + kExemplarsMarker.size()));
  const auto cmd = suffix_.find(kCommandMarker);
  if (cmd == std::string::npos || suffix_.find(kCommandMarker, cmd + 1) != std::string::npos ||
      preamble_.find(kCommandMarker) != std::string::npos) {
    throw config_error("prompt template must contain " + std::string(kCommandMarker) +
                       " exactly once, after the exemplars");
  }
  for (std::size_t i = 0; i < exemplars_.size(); ++i) {
    auto compiled = compile_text(exemplars_[i].script, catalog);
    if (!compiled.ok()) {
      throw config_error("exemplar " + std::to_string(i) + " (\"" + exemplars_[i].command +
                         "\"): " + describe(compiled.diagnostics));
    }
    exemplars_[i].script = serialize(*parse(exemplars_[i].script).script);
  }
}

std::vector<Exemplar> PromptTemplate::parse_exemplars(std::string_view jsonl) {
  std::vector<Exemplar> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < jsonl.size()) {
    std::size_t nl = jsonl.find('\n', start);
    if (nl == std::string_view::npos) nl = jsonl.size();
    const std::string_view line = jsonl.substr(start, nl - start);
    start = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      json j = json::parse(line);
      std::string text = j.at("script").dump();
      ParseResult parsed = parse(text);
      out.push_back({j.at("command").get<std::string>(), parsed.ok() ? serialize(*parsed.script) : text});
    } catch (const json::exception& e) {
      throw config_error("exemplars line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

const PromptTemplate& PromptTemplate::builtin() {
  static const PromptTemplate t(embedded::prompt_template(), parse_exemplars(embedded::exemplars_jsonl()));
  return t;
}

std::string build_prompt(std::string_view command, const PromptTemplate& prompt) {
  std::string out = prompt.preamble();
  for (const auto& ex : prompt.exemplars()) {
    out += "Command: ";
    out += ex.command;
    out += "\nScript: ";
    out += ex.script;
    out += "\n\n";
  }
  const std::string& suffix = prompt.suffix();
  const auto at = suffix.find(PromptTemplate::kCommandMarker);
  out.append(suffix, 0, at);
  out += command;
  out.append(suffix, at + PromptTemplate::kCommandMarker.size());
  return out;
}

namespace {

// Index one past the bracket that closes the array opening at `open`.
std::optional<std::size_t> balanced_end(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '[') ++depth;
    else if (c == ']' && --depth == 0) return i + 1;
  }
  return std::nullopt;
}

std::optional<std::string> first_array(std::string_view s) {
  for (std::size_t open = s.find('['); open != std::string_view::npos; open = s.find('[', open + 1)) {
    if (auto end = balanced_end(s, open)) return std::string(s.substr(open, *end - open));
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> extract_script(std::string_view completion) {
  const auto fence = completion.find("```");
  if (fence != std::string_view::npos) {
    auto body_start = completion.find('\n', fence);
    if (body_start != std::string_view::npos) {
      ++body_start;
      auto close = completion.find("```", body_start);
      if (close == std::string_view::npos) close = completion.size();
      if (auto arr = first_array(completion.substr(body_start, close - body_start))) return arr;
    }
  }
  return first_array(completion);
}

// ---------------------------------------------------------------------------
// Completion endpoint

HttpCompletionClient::HttpCompletionClient(EndpointConfig config) : config_(std::move(config)) {
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw config_error("environment variable " + config_.api_key_env + " is not set (API key for the LLM endpoint)");
  }
  api_key_ = key;
}

std::string HttpCompletionClient::complete(const std::string& prompt) {
  httplib::Client client(config_.url);
  const auto secs = static_cast<time_t>(config_.timeout_seconds);
  const auto usecs = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  client.set_bearer_token_auth(api_key_);

  json body = {{"model", config_.model},
               {"prompt", prompt},
               {"max_tokens", config_.max_tokens},
               {"temperature", 0}};
  auto res = client.Post(config_.path, body.dump(), "application/json");
  if (!res) {
    throw TranslationError(TranslationError::Code::Network,
                           "completion request failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw TranslationError(TranslationError::Code::Network,
                           "completion endpoint returned HTTP " + std::to_string(res->status));
  }
  try {
    json reply = json::parse(res->body);
    return reply.at("choices").at(0).at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw TranslationError(TranslationError::Code::Network, std::string("unexpected completion body: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Translation

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::RuleBased: return "rule";
    case Strategy::Llm: return "llm";
    case Strategy::Hybrid: return "hybrid";
  }
  return "rule";
}

std::optional<Strategy> strategy_from_string(std::string_view name) {
  if (name == "rule" || name == "rule_based") return Strategy::RuleBased;
  if (name == "llm") return Strategy::Llm;
  if (name == "hybrid") return Strategy::Hybrid;
  return std::nullopt;
}

std::string_view to_string(TranslationResult::Source source) {
  return source == TranslationResult::Source::Llm ? "llm" : "rule_based";
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

bool blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

}  // namespace

TranslationResult translate_rule_based(std::string_view text, const RuleSet& rules, const SynonymTable& synonyms,
                                       const Catalog& catalog) {
  const auto start = Clock::now();
  if (blank(text)) throw TranslationError(TranslationError::Code::EmptyCommand, "empty command");
  auto script = rules.match(normalize(text, synonyms));
  if (!script) {
    throw TranslationError(TranslationError::Code::NoMatch, "no rule matches \"" + std::string(text) + "\"");
  }
  auto diagnostics = validate(*script, catalog);
  if (has_errors(diagnostics)) throw config_error("rule produced an invalid script: " + describe(diagnostics));
  TranslationResult result;
  result.canonical = serialize(*script);
  result.script = std::move(*script);
  result.source = TranslationResult::Source::RuleBased;
  result.latency_ms = ms_since(start);
  return result;
}

TranslationResult translate_llm(std::string_view text, CompletionClient& client, const PromptTemplate& prompt,
                                const Catalog& catalog) {
  const auto start = Clock::now();
  if (blank(text)) throw TranslationError(TranslationError::Code::EmptyCommand, "empty command");
  std::string request = build_prompt(text, prompt);
  std::string problem;
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::string raw = client.complete(request);
    auto extracted = extract_script(raw);
    if (!extracted) {
      problem = "no script document found in the completion";
    } else {
      ParseResult parsed = parse(*extracted);
      std::vector<Diagnostic> diagnostics = parsed.diagnostics;
      if (parsed.ok()) {
        auto more = validate(*parsed.script, catalog);
        diagnostics.insert(diagnostics.end(), more.begin(), more.end());
      }
      if (parsed.ok() && !has_errors(diagnostics)) {
        TranslationResult result;
        result.canonical = serialize(*parsed.script);
        result.script = std::move(*parsed.script);
        result.source = TranslationResult::Source::Llm;
        result.raw = std::move(raw);
        result.latency_ms = ms_since(start);
        return result;
      }
      problem = describe(diagnostics);
    }
    request += raw;
    request += "\n\nThat answer was rejected: " + problem + "\nAnswer again with one corrected script.\nScript: ";
  }
  throw TranslationError(TranslationError::Code::ValidationFailedTwice,
                         "completion rejected twice: " + problem);
}

Translator::Translator(Strategy strategy, std::shared_ptr<CompletionClient> client)
    : strategy_(strategy), client_(std::move(client)) {
  if (strategy_ != Strategy::RuleBased && !client_) {
    throw config_error("strategy '" + std::string(to_string(strategy_)) + "' needs a completion client");
  }
}

TranslationResult Translator::translate(std::string_view text) const {
  switch (strategy_) {
    case Strategy::RuleBased:
      return translate_rule_based(text);
    case Strategy::Llm:
      return translate_llm(text, *client_);
    case Strategy::Hybrid:
      try {
        return translate_rule_based(text);
      } catch (const TranslationError& e) {
        if (e.code() != TranslationError::Code::NoMatch) throw;
      }
      return translate_llm(text, *client_);
  }
  throw config_error("unknown strategy");
}

}  // namespace bbranch
