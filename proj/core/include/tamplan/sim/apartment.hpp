#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "tamplan/sim/world.hpp"

namespace tamplan::sim {

struct SimConfig {
  std::size_t min_rooms = 4;
  std::size_t max_rooms = 6;
  /// Classes instantiated when their placement rule can be met.
  std::vector<ObjectClass> object_classes{all_object_classes().begin(), all_object_classes().end()};
  double p_container_open = 0.3;
  double p_switch_on = 0.2;
  double p_dirty = 0.4;
  double noise_sigma = 0.05;

  /// Throws ConfigError when infeasible.
  void validate() const;
};

void to_json(nlohmann::json& j, const SimConfig& c);
void from_json(const nlohmann::json& j, SimConfig& c);

/// Rooms every apartment keeps first; also the designated spawn rooms.
const std::vector<Room>& spawn_rooms();

/// Deterministic function of (seed, config). Agent starts in the kitchen.
EnvironmentState generate_apartment(std::uint64_t seed, const SimConfig& config);

}  // namespace tamplan::sim
