#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tamplan/sim/world.hpp"

namespace tamplan::sim {

struct Goal {
  std::size_t id = 0;
  std::string text;

  bool operator==(const Goal&) const = default;
};

inline constexpr std::size_t kGoalCount = 8;

enum class GoalId : std::size_t {
  kSetUpTable,
  kMakeCoffee,
  kWatchTv,
  kWriteEmail,
  kWashPlate,
  kStoreGroceries,
  kReadBook,
  kCleanKitchen,
};

const std::vector<Goal>& goal_vocabulary();
/// Throws ContractError for ids outside the vocabulary.
const Goal& goal(std::size_t id);
std::optional<Goal> parse_goal(std::string_view text);

/// Whether `state` already fulfils the goal.
bool goal_satisfied(std::size_t goal_id, const EnvironmentState& state);

/// Expert action macro for a goal, planned against a simulated copy of
/// `state` so steps that are already true (e.g. a WALK into the current room)
/// are left out. nullopt when the apartment lacks a required object.
std::optional<std::vector<Action>> expert_plan(std::size_t goal_id, const EnvironmentState& state);

}  // namespace tamplan::sim
