#pragma once

// Network front door. Clients send commands over newline-delimited JSON on
// TCP or JSON text frames on WebSocket; one simulation thread owns the
// match and applies grafts at tick boundaries.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bbranch/config.hpp"
#include "bbranch/eventlog.hpp"
#include "bbranch/match.hpp"
#include "bbranch/translator.hpp"

namespace bbranch {

struct GatewayConfig {
  std::string host = "127.0.0.1";
  std::uint16_t tcp_port = 7777;                // 0 picks a free port
  std::optional<std::uint16_t> ws_port;         // absent: no WebSocket listener
  double tick_rate = 20.0;                      // Hz, wall clock
  bool manual_clock = false;                    // ticks only via Gateway::advance
  std::uint64_t seed = 1;
  OpponentPolicy opponent_policy = OpponentPolicy::Scripted;
  SimConfig sim;
  std::size_t state_queue = 64;                 // per-session, oldest state dropped
  std::size_t translation_threads = 2;
  std::size_t max_line_bytes = 64 * 1024;
  std::optional<std::string> log_path;          // event log written on stop

  std::vector<std::string> problems() const;
  void validate() const;  // throws ConfigError
};

/// {"host","port","ws_port","tick_rate","seed","opponent_policy","state_queue",
///  "translation_threads","sim":{...}}; unknown keys are rejected.
GatewayConfig gateway_config_from_json(std::string_view text, GatewayConfig base = {});

class Gateway {
 public:
  Gateway(GatewayConfig config, std::shared_ptr<const Translator> translator);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// Binds the listeners and starts the network, translation and (unless
  /// manual) simulation threads. Throws std::system_error on bind failure.
  void start();
  /// Closes every session, joins all threads and writes the log. Idempotent.
  void stop();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();

  std::uint16_t tcp_port() const;
  std::optional<std::uint16_t> ws_port() const;

  /// Manual clock: applies pending inbox items, then runs `ticks` steps,
  /// each preceded by a boundary. advance(0) only applies the inbox.
  void advance(std::size_t ticks);
  /// Waits until every accepted command has finished translating.
  void wait_translations();

  Tick tick() const;
  std::size_t session_count() const;
  /// Header plus records so far (the end record is added by stop()).
  EventLog event_log() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace bbranch
