#pragma once

// Command text -> validated Script. A data-driven rule engine is the
// deterministic default; an HTTP completion endpoint can stand behind it.

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bbranch/script.hpp"

namespace bbranch {

class TranslationError : public std::runtime_error {
 public:
  enum class Code {
    EmptyCommand,
    NoMatch,
    Network,
    ExtractionFailed,
    ValidationFailedTwice,
    Configuration,
  };
  TranslationError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

std::string_view to_string(TranslationError::Code code);

// ---------------------------------------------------------------------------
// Normalization

/// Phrase and word replacement tables applied after case folding.
struct SynonymTable {
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> phrases;  // longest first
  std::map<std::string, std::string> words;

  /// {"phrases":{"after that":"then",...},"words":{"enemy":"opponent",...}}
  static SynonymTable from_json(std::string_view text);
  /// The bundled table.
  static const SynonymTable& builtin();
};

/// Lowercase, punctuation stripped (decimal points kept), whitespace split,
/// synonyms applied.
std::vector<std::string> normalize(std::string_view text, const SynonymTable& synonyms = SynonymTable::builtin());

// ---------------------------------------------------------------------------
// Rule engine

struct PatternElement {
  enum class Kind { Literal, Number, Nonterminal };
  Kind kind = Kind::Literal;
  std::vector<std::string> alternatives;  // Literal
  std::string category;                   // Nonterminal
  bool optional = false;                  // Literal only
};

struct PatternRule {
  std::string category;
  std::string source;  // pattern text as written
  std::vector<PatternElement> trigger;
  std::string builder;  // JSON node-list template
  int priority = 0;
  std::size_t order = 0;
};

/// Parses one pattern: space separated elements, `a|b` alternatives, a
/// trailing `?` for optional literals, `<n>` for a number, `{cat}` for a
/// nonterminal. Throws TranslationError(Configuration).
std::vector<PatternElement> parse_pattern(std::string_view pattern);

class RuleSet {
 public:
  /// {"fillers":[...],"start":"command","rules":[{"category","pattern","priority"?,"script"}...]}
  static RuleSet from_json(std::string_view text);
  static const RuleSet& builtin();

  const std::vector<PatternRule>& rules() const { return rules_; }

  /// Script for a normalized token list, or nullopt when no rule covers the
  /// whole span. The returned script has not been validated.
  std::optional<Script> match(const std::vector<std::string>& tokens) const;

 private:
  std::vector<PatternRule> rules_;
  std::vector<std::string> fillers_;
  std::string start_ = "command";
};

// ---------------------------------------------------------------------------
// Prompting

struct Exemplar {
  std::string command;
  std::string script;  // canonical script text
};

/// Template text holds `{{exemplars}}` once (everything before it is the
/// preamble) and `{{command}}` once, after it, in the suffix.
class PromptTemplate {
 public:
  static constexpr std::string_view kExemplarsMarker = "{{exemplars}}";
  static constexpr std::string_view kCommandMarker = "{{command}}";

  /// Throws TranslationError(Configuration) on a malformed template or an
  /// exemplar whose script does not validate.
  PromptTemplate(std::string_view template_text, std::vector<Exemplar> exemplars,
                 const Catalog& catalog = bbranch::catalog());

  /// Exemplars from JSONL lines {"command":...,"script":[...]}.
  static std::vector<Exemplar> parse_exemplars(std::string_view jsonl);
  static const PromptTemplate& builtin();

  const std::string& preamble() const { return preamble_; }
  const std::string& suffix() const { return suffix_; }
  const std::vector<Exemplar>& exemplars() const { return exemplars_; }

 private:
  std::string preamble_;
  std::string suffix_;
  std::vector<Exemplar> exemplars_;
};

std::string build_prompt(std::string_view command, const PromptTemplate& prompt);

/// First script document in a completion: a fenced block if one exists,
/// else the first balanced top-level JSON array.
std::optional<std::string> extract_script(std::string_view completion);

// ---------------------------------------------------------------------------
// Completion endpoint

struct EndpointConfig {
  std::string url = "http://127.0.0.1:8000";  // scheme://host[:port]
  std::string path = "/v1/completions";
  std::string model = "code-model";
  std::string api_key_env = "BBRANCH_API_KEY";
  double timeout_seconds = 10.0;
  int max_tokens = 512;
};

class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  /// Completion text for `prompt`. Throws TranslationError(Network).
  virtual std::string complete(const std::string& prompt) = 0;
};

/// POSTs {model, prompt, max_tokens, temperature:0} and reads
/// choices[0].text. The API key is read from the environment variable at
/// construction; a missing variable is a Configuration error.
class HttpCompletionClient final : public CompletionClient {
 public:
  explicit HttpCompletionClient(EndpointConfig config);
  std::string complete(const std::string& prompt) override;

 private:
  EndpointConfig config_;
  std::string api_key_;
};

// ---------------------------------------------------------------------------
// Translation

enum class Strategy { RuleBased, Llm, Hybrid };
std::string_view to_string(Strategy strategy);
std::optional<Strategy> strategy_from_string(std::string_view name);

struct TranslationResult {
  enum class Source { RuleBased, Llm };
  Script script;
  std::string canonical;  // serialize(script)
  Source source = Source::RuleBased;
  double latency_ms = 0.0;
  std::optional<std::string> raw;  // last completion text, llm only
};

std::string_view to_string(TranslationResult::Source source);

/// Throws TranslationError(NoMatch) when no rule covers the command, and
/// Configuration when the winning rule builds an invalid script.
TranslationResult translate_rule_based(std::string_view text, const RuleSet& rules = RuleSet::builtin(),
                                       const SynonymTable& synonyms = SynonymTable::builtin(),
                                       const Catalog& catalog = bbranch::catalog());

TranslationResult translate_llm(std::string_view text, CompletionClient& client,
                                const PromptTemplate& prompt = PromptTemplate::builtin(),
                                const Catalog& catalog = bbranch::catalog());

/// Strategy dispatcher. Safe to call from several threads at once when the
/// client is (the HTTP client opens one connection per call).
class Translator {
 public:
  explicit Translator(Strategy strategy = Strategy::RuleBased, std::shared_ptr<CompletionClient> client = nullptr);

  Strategy strategy() const { return strategy_; }
  TranslationResult translate(std::string_view text) const;

 private:
  Strategy strategy_;
  std::shared_ptr<CompletionClient> client_;
};

}  // namespace bbranch
