#include "bbranch/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "json.hpp"

#include "bbranch/match.hpp"
#include "bbranch/script.hpp"
#include "bbranch/translator.hpp"

namespace bbranch {

std::vector<std::string> default_bench_commands() {
  return {"Keep doing thunderbolt",
          "when opponent hp below 50 stop",
          "then tackle",
          "Escape from opponent",
          "Go behind the opponent",
          "Attack to the enemy",
          "iron tail 3 times then thunderbolt",
          "if the enemy is closer than 2 meters use iron tail",
          "move forward for 2 seconds",
          "Continue to thunderbolt"};
}

double percentile(std::vector<double> samples, double p) {
  if (samples.empty()) return 0.0;
  std::sort(samples.begin(), samples.end());
  const double rank = std::ceil(p / 100.0 * static_cast<double>(samples.size()));
  const auto i = static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(samples.size()))) - 1;
  return samples[i];
}

namespace {

using Clock = std::chrono::steady_clock;

double ms(Clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); }

StageStats stats(std::string name, const std::vector<double>& samples) {
  StageStats s;
  s.name = std::move(name);
  s.samples = samples.size();
  s.p50_ms = percentile(samples, 50);
  s.p99_ms = percentile(samples, 99);
  s.max_ms = samples.empty() ? 0.0 : *std::max_element(samples.begin(), samples.end());
  return s;
}

}  // namespace

BenchReport bench(const BenchOptions& options) {
  BenchReport report;
  report.ticks = options.ticks;
  const std::vector<std::string> commands = options.commands.empty() ? default_bench_commands() : options.commands;
  std::vector<double> t_translate, t_compile, t_graft, t_tick, t_pipeline;

  Match match(options.config, options.seed);
  std::size_t next_command = 0;
  for (std::size_t i = 0; i < options.ticks; ++i) {
    if (match.finished() || (options.reset_every > 0 && i > 0 && i % options.reset_every == 0)) match.reset();
    if (options.command_every > 0 && i % options.command_every == 0) {
      const std::string& text = commands[next_command++ % commands.size()];
      const auto a = Clock::now();
      TranslationResult tr = translate_rule_based(text);
      const auto b = Clock::now();
      CompileResult compiled = compile_text(tr.canonical);
      const auto c = Clock::now();
      if (compiled.ok()) match.graft(AgentId::Player, *compiled.fragment);
      const auto d = Clock::now();
      t_translate.push_back(ms(b - a));
      t_compile.push_back(ms(c - b));
      t_graft.push_back(ms(d - c));
      t_pipeline.push_back(ms(d - a));
    }
    const auto a = Clock::now();
    match.step();
    t_tick.push_back(ms(Clock::now() - a));
  }

  report.commands = t_pipeline.size();
  report.stages = {stats("normalize+translate", t_translate), stats("parse+compile+validate", t_compile),
                   stats("graft", t_graft), stats("tick", t_tick)};
  report.pipeline = stats("pipeline", t_pipeline);
  report.tick_jitter_ms = report.stages[3].p99_ms - report.stages[3].p50_ms;
  return report;
}

std::string BenchReport::to_text() const {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "ticks %zu, commands %zu\n", ticks, commands);
  out += line;
  std::snprintf(line, sizeof line, "%-24s %10s %10s %10s\n", "stage", "p50 ms", "p99 ms", "max ms");
  out += line;
  auto row = [&](const StageStats& s) {
    std::snprintf(line, sizeof line, "%-24s %10.4f %10.4f %10.4f\n", s.name.c_str(), s.p50_ms, s.p99_ms, s.max_ms);
    out += line;
  };
  for (const auto& s : stages) row(s);
  row(pipeline);
  std::snprintf(line, sizeof line, "tick jitter (p99-p50)    %10.4f ms\n", tick_jitter_ms);
  out += line;
  std::snprintf(line, sizeof line,
                "0.4 s Doherty threshold: budget %.0f ms, non-LLM pipeline p99 %.4f ms, headroom for LLM "
                "inference %.4f ms\n",
                kDohertyThresholdMs, pipeline.p99_ms, headroom_ms());
  out += line;
  return out;
}

std::string BenchReport::to_json() const {
  nlohmann::ordered_json j;
  j["ticks"] = ticks;
  j["commands"] = commands;
  auto stage = [](const StageStats& s) {
    return nlohmann::ordered_json{{"name", s.name},     {"samples", s.samples}, {"p50_ms", s.p50_ms},
                                  {"p99_ms", s.p99_ms}, {"max_ms", s.max_ms}};
  };
  auto& list = j["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : stages) list.push_back(stage(s));
  j["pipeline"] = stage(pipeline);
  j["tick_jitter_ms"] = tick_jitter_ms;
  j["doherty_threshold_ms"] = kDohertyThresholdMs;
  j["llm_headroom_ms"] = headroom_ms();
  return j.dump(2);
}

}  // namespace bbranch
