#pragma once

// Latency of the non-LLM command pipeline and of the simulation tick.

#include <cstddef>
#include <string>
#include <vector>

#include "bbranch/config.hpp"

namespace bbranch {

inline constexpr double kDohertyThresholdMs = 400.0;

struct StageStats {
  std::string name;
  std::size_t samples = 0;
  double p50_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
};

struct BenchOptions {
  std::size_t ticks = 10000;
  std::size_t command_every = 10;  // a command goes through the pipeline every N ticks
  std::size_t reset_every = 600;   // fresh match every N ticks keeps branches small
  std::uint64_t seed = 1;
  SimConfig config;
  std::vector<std::string> commands;  // empty: built-in mix
};

struct BenchReport {
  std::size_t ticks = 0;
  std::size_t commands = 0;
  std::vector<StageStats> stages;  // translate, compile, graft, tick
  StageStats pipeline;             // translate + compile + graft per command
  double tick_jitter_ms = 0.0;     // p99 - p50 of the tick stage
  double headroom_ms() const { return kDohertyThresholdMs - pipeline.p99_ms; }
  std::string to_text() const;
  std::string to_json() const;
};

std::vector<std::string> default_bench_commands();

/// Percentile by nearest rank; 0 for an empty sample.
double percentile(std::vector<double> samples, double p);

BenchReport bench(const BenchOptions& options);

}  // namespace bbranch
