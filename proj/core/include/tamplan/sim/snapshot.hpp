#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tamplan/sim/world.hpp"

namespace tamplan::sim {

enum class FactKind : std::uint8_t { kState, kRelation };
enum class StateKind : std::uint8_t { kOpen, kClosed, kOn, kOff, kClean, kDirty, kHeld };

/// One entry of the canonical graph: either `STATE(subject)` or `REL(subject,target)`.
struct Fact {
  FactKind kind{};
  ObjectId subject{};
  std::uint8_t predicate = 0;  // StateKind or RelationKind
  ObjectId target{};           // relations only

  static Fact state(ObjectId subject, StateKind s);
  static Fact relation(const RelationFact& r);

  std::string to_string() const;
  static std::optional<Fact> parse(std::string_view text);

  auto operator<=>(const Fact&) const = default;
};

/// Sorted, duplicate-free.
using FactSet = std::vector<Fact>;

/// Object-state and relation facts of a state; agent pose is excluded.
FactSet graph_snapshot(const EnvironmentState& state);

}  // namespace tamplan::sim
