#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string_view>

namespace bbranch {

using Tick = std::uint64_t;

/// Identifier of a node inside one BehaviorBranch. Never reused.
enum class NodeId : std::uint32_t {};

constexpr std::uint32_t raw(NodeId id) { return static_cast<std::uint32_t>(id); }

enum class AgentId : std::uint8_t { Player = 0, Opponent = 1 };

constexpr std::size_t index(AgentId id) { return static_cast<std::size_t>(id); }
constexpr AgentId other(AgentId id) {
  return id == AgentId::Player ? AgentId::Opponent : AgentId::Player;
}

std::string_view to_string(AgentId id);
std::optional<AgentId> agent_from_string(std::string_view name);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  double length() const { return std::hypot(x, y); }
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline Vec2 from_angle(double radians) { return {std::cos(radians), std::sin(radians)}; }

inline double distance(Vec2 a, Vec2 b) { return (a - b).length(); }

/// Maps any angle onto [0, 2*pi).
inline double normalize_angle(double radians) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(radians, two_pi);
  if (a < 0.0) a += two_pi;
  if (a >= two_pi) a = 0.0;
  return a;
}

/// Maps any angle onto (-pi, pi].
inline double wrap_pi(double radians) {
  double a = normalize_angle(radians);
  if (a > std::numbers::pi) a -= 2.0 * std::numbers::pi;
  return a;
}

/// Signed angle the agent at `from` facing `facing` must turn to look at `to`.
inline double bearing_error(Vec2 from, double facing, Vec2 to) {
  const Vec2 d = to - from;
  if (d.x == 0.0 && d.y == 0.0) return 0.0;
  return wrap_pi(std::atan2(d.y, d.x) - facing);
}

}  // namespace bbranch
