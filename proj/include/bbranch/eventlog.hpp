#pragma once

// Session event log (JSONL) and headless replay.
//
//   {"version":1,"seed":7,"config":{...},"opponent_policy":"scripted"}
//   {"tick":12,"type":"graft","agent":"player","script":[...]}
//   {"tick":40,"type":"reset"}
//   {"tick":55,"type":"end"}
//
// A record's tick is the world tick at the boundary where it was applied,
// i.e. before that tick was stepped.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "bbranch/config.hpp"
#include "bbranch/match.hpp"

namespace bbranch {

inline constexpr int kLogVersion = 1;

class LogError : public std::runtime_error {
 public:
  LogError(std::size_t offset, const std::string& what)
      : std::runtime_error("byte " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

struct LogHeader {
  std::uint64_t seed = 0;
  SimConfig config;
  OpponentPolicy policy = OpponentPolicy::Scripted;
};

struct GraftRecord {
  AgentId agent = AgentId::Player;
  std::string script;  // canonical
};
struct ResetRecord {};
struct EndRecord {};

struct LogRecord {
  Tick tick = 0;
  std::variant<GraftRecord, ResetRecord, EndRecord> body;
};

struct EventLog {
  LogHeader header;
  std::vector<LogRecord> records;
};

std::string encode_header(const LogHeader& header);
std::string encode_record(const LogRecord& record);
/// Header plus records, one per line, each newline terminated.
std::string encode_log(const EventLog& log);

/// Throws LogError naming the byte offset of the offending line, including
/// a final line cut short before its newline.
EventLog parse_log(std::string_view text);

struct Trace {
  std::vector<std::string> states;  // encode_state lines, initial state first
  std::string text() const;         // lines joined with '\n', newline terminated
  std::uint64_t digest() const;     // FNV-1a 64 of text()
};

std::uint64_t fnv1a64(std::string_view bytes);

/// Re-runs the log headlessly. Throws LogError on records that cannot be
/// applied (bad script, ticks going backwards).
Trace replay(const EventLog& log);

}  // namespace bbranch
