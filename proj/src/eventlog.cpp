#include "bbranch/eventlog.hpp"

#include "json.hpp"

#include "bbranch/protocol.hpp"
#include "bbranch/script.hpp"

namespace bbranch {

using nlohmann::json;
using nlohmann::ordered_json;

std::string encode_header(const LogHeader& header) {
  json config = header.config;
  ordered_json j;
  j["version"] = kLogVersion;
  j["seed"] = header.seed;
  j["config"] = ordered_json::parse(config.dump());
  j["opponent_policy"] = std::string(to_string(header.policy));
  return j.dump();
}

std::string encode_record(const LogRecord& record) {
  std::string out = R"({"tick":)" + std::to_string(record.tick);
  std::visit(
      [&](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, GraftRecord>) {
          out += R"(,"type":"graft","agent":")" + std::string(to_string(body.agent)) + R"(","script":)";
          out += body.script;
        } else if constexpr (std::is_same_v<T, ResetRecord>) {
          out += R"(,"type":"reset")";
        } else {
          out += R"(,"type":"end")";
        }
      },
      record.body);
  out += '}';
  return out;
}

std::string encode_log(const EventLog& log) {
  std::string out = encode_header(log.header) + '\n';
  for (const auto& r : log.records) out += encode_record(r) + '\n';
  return out;
}

EventLog parse_log(std::string_view text) {
  EventLog log;
  bool have_header = false;
  std::size_t offset = 0;
  while (offset < text.size()) {
    const std::size_t nl = text.find('\n', offset);
    if (nl == std::string_view::npos) throw LogError(offset, "truncated record (no terminating newline)");
    const std::string_view line = text.substr(offset, nl - offset);
    const std::size_t at = offset;
    offset = nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw LogError(at, "record is not a JSON object");
    try {
      if (!have_header) {
        const int version = j.at("version").get<int>();
        if (version != kLogVersion) {
          throw LogError(at, "log version " + std::to_string(version) + " is not supported (expected " +
                                 std::to_string(kLogVersion) + ")");
        }
        log.header.seed = j.at("seed").get<std::uint64_t>();
        log.header.config = j.value("config", json::object()).get<SimConfig>();
        auto policy = policy_from_string(j.value("opponent_policy", std::string("scripted")));
        if (!policy) throw LogError(at, "unknown opponent policy");
        log.header.policy = *policy;
        have_header = true;
        continue;
      }
      LogRecord r;
      r.tick = j.at("tick").get<Tick>();
      const std::string type = j.at("type").get<std::string>();
      if (type == "graft") {
        auto agent = agent_from_string(j.at("agent").get<std::string>());
        if (!agent) throw LogError(at, "unknown agent");
        // Scripts are kept in canonical form so a parsed log re-encodes byte for byte.
        std::string script = j.at("script").dump();
        if (auto parsed = parse(script); parsed.ok()) script = serialize(*parsed.script);
        r.body = GraftRecord{*agent, std::move(script)};
      } else if (type == "reset") {
        r.body = ResetRecord{};
      } else if (type == "end") {
        r.body = EndRecord{};
      } else {
        throw LogError(at, "unknown record type '" + type + "'");
      }
      log.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw LogError(at, e.what());
    } catch (const ConfigError& e) {
      throw LogError(at, e.what());
    }
  }
  if (!have_header) throw LogError(offset, "missing header record");
  return log;
}

std::string Trace::text() const {
  std::string out;
  for (const auto& s : states) {
    out += s;
    out += '\n';
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t Trace::digest() const { return fnv1a64(text()); }

Trace replay(const EventLog& log) {
  log.header.config.validate();
  Match match(log.header.config, log.header.seed, log.header.policy);
  Trace trace;
  trace.states.push_back(encode_state(match.state()));
  auto run_to = [&](Tick tick, std::size_t index) {
    if (tick < match.world().tick) throw LogError(0, "record " + std::to_string(index) + " goes back in time");
    while (match.world().tick < tick && !match.finished()) {
      match.step();
      trace.states.push_back(encode_state(match.state()));
    }
  };
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const LogRecord& r = log.records[i];
    run_to(r.tick, i);
    if (const auto* g = std::get_if<GraftRecord>(&r.body)) {
      auto compiled = compile_text(g->script);
      if (!compiled.ok()) throw LogError(0, "record " + std::to_string(i) + ": " + describe(compiled.diagnostics));
      if (!match.finished()) match.graft(g->agent, *compiled.fragment);
    } else if (std::holds_alternative<ResetRecord>(r.body)) {
      match.reset();
      trace.states.push_back(encode_state(match.state()));
    } else {
      break;
    }
  }
  return trace;
}

}  // namespace bbranch
