#pragma once

// Gateway wire messages. One UTF-8 JSON object per line on TCP, one per
// text frame on WebSocket.

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "bbranch/graft.hpp"
#include "bbranch/sim.hpp"

namespace bbranch {

struct Channels {
  bool state = false;
  bool branch = false;
  bool events = false;
  friend bool operator==(const Channels&, const Channels&) = default;
};

/// `id` is the raw JSON text of the client's id field, echoed in the ack.
struct CommandMessage {
  AgentId agent = AgentId::Player;
  std::string text;
  std::optional<std::string> id;
};

struct ResetMessage {
  std::optional<std::string> id;
};

struct SubscribeMessage {
  Channels channels;
  std::optional<std::string> id;
};

using ClientMessage = std::variant<CommandMessage, ResetMessage, SubscribeMessage>;

struct DecodeResult {
  std::optional<ClientMessage> message;
  std::string error;  // set when message is absent
};

/// Never throws; malformed input comes back as an error text.
DecodeResult decode_client_message(std::string_view line);

std::string encode_state(const StateView& state);
std::string encode_graft(AgentId agent, GraftRule rule, const std::string& canonical_script, double latency_ms);
std::string encode_error(std::string_view message);
std::string encode_ack(const std::optional<std::string>& id);

std::string encode_command(const CommandMessage& m);
std::string encode_reset();
std::string encode_subscribe(const Channels& channels);

}  // namespace bbranch
