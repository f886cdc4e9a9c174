#include "bbranch/protocol.hpp"

#include "json.hpp"

namespace bbranch {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::optional<std::string> id_of(const json& doc) {
  auto it = doc.find("id");
  if (it == doc.end()) return std::nullopt;
  return it->dump();
}

}  // namespace

DecodeResult decode_client_message(std::string_view line) {
  json doc = json::parse(line, nullptr, false);
  if (doc.is_discarded()) return {std::nullopt, "malformed message: not valid JSON"};
  if (!doc.is_object()) return {std::nullopt, "malformed message: expected a JSON object"};
  auto type = doc.find("type");
  if (type == doc.end() || !type->is_string()) return {std::nullopt, "malformed message: missing string field 'type'"};
  const std::string t = type->get<std::string>();

  if (t == "command") {
    CommandMessage m;
    m.id = id_of(doc);
    if (auto a = doc.find("agent"); a != doc.end()) {
      auto agent = a->is_string() ? agent_from_string(a->get<std::string>()) : std::nullopt;
      if (!agent) return {std::nullopt, "unknown agent " + a->dump()};
      m.agent = *agent;
    }
    auto text = doc.find("text");
    if (text == doc.end() || !text->is_string()) return {std::nullopt, "command needs a string field 'text'"};
    m.text = text->get<std::string>();
    return {ClientMessage{std::move(m)}, {}};
  }
  if (t == "reset") return {ClientMessage{ResetMessage{id_of(doc)}}, {}};
  if (t == "subscribe") {
    SubscribeMessage m;
    m.id = id_of(doc);
    auto ch = doc.find("channels");
    if (ch == doc.end() || !ch->is_array()) return {std::nullopt, "subscribe needs a list field 'channels'"};
    for (const auto& c : *ch) {
      const std::string name = c.is_string() ? c.get<std::string>() : c.dump();
      if (name == "state") m.channels.state = true;
      else if (name == "branch") m.channels.branch = true;
      else if (name == "events") m.channels.events = true;
      else return {std::nullopt, "unknown channel '" + name + "'"};
    }
    return {ClientMessage{m}, {}};
  }
  return {std::nullopt, "unknown message type '" + t + "'"};
}

std::string encode_state(const StateView& state) {
  ordered_json j;
  j["type"] = "state";
  j["tick"] = state.tick;
  auto& agents = j["agents"] = ordered_json::array();
  for (const auto& a : state.agents) {
    ordered_json aj;
    aj["id"] = std::string(to_string(a.id));
    aj["x"] = a.pose.position.x;
    aj["y"] = a.pose.position.y;
    aj["facing"] = a.pose.facing;
    aj["hp"] = a.hp;
    agents.push_back(std::move(aj));
  }
  auto& projectiles = j["projectiles"] = ordered_json::array();
  for (const auto& p : state.projectiles) projectiles.push_back({{"x", p.x}, {"y", p.y}});
  j["outcome"] = std::string(to_string(state.outcome));
  return j.dump();
}

std::string encode_graft(AgentId agent, GraftRule rule, const std::string& canonical_script, double latency_ms) {
  // The script is already canonical JSON; splice it in verbatim.
  std::string out = R"({"type":"graft","agent":)";
  out += json(std::string(to_string(agent))).dump();
  out += R"(,"rule":)";
  out += json(std::string(to_string(rule))).dump();
  out += R"(,"script":)";
  out += canonical_script;
  out += R"(,"latency_ms":)";
  out += json(latency_ms).dump();
  out += '}';
  return out;
}

std::string encode_error(std::string_view message) {
  ordered_json j;
  j["type"] = "error";
  j["message"] = std::string(message);
  return j.dump();
}

std::string encode_ack(const std::optional<std::string>& id) {
  return R"({"type":"ack","id":)" + id.value_or("null") + "}";
}

std::string encode_command(const CommandMessage& m) {
  ordered_json j;
  j["type"] = "command";
  j["agent"] = std::string(to_string(m.agent));
  j["text"] = m.text;
  std::string out = j.dump();
  if (m.id) {
    out.pop_back();
    out += R"(,"id":)" + *m.id + "}";
  }
  return out;
}

std::string encode_reset() { return R"({"type":"reset"})"; }

std::string encode_subscribe(const Channels& channels) {
  ordered_json j;
  j["type"] = "subscribe";
  auto& list = j["channels"] = ordered_json::array();
  if (channels.state) list.push_back("state");
  if (channels.branch) list.push_back("branch");
  if (channels.events) list.push_back("events");
  return j.dump();
}

}  // namespace bbranch
