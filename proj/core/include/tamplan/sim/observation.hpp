#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "tamplan/sim/world.hpp"

namespace tamplan::sim {

/// Fixed layout of the multi-hot frame vector:
///   [room one-hot | visible classes | visible states | placements | inventory]
/// Placement bits are (grabbable, relation, anchor) triples the traits allow.
class FeatureLayout {
 public:
  static const FeatureLayout& instance();

  std::size_t size() const { return size_; }
  std::size_t room(Room r) const;
  std::size_t visible(ObjectClass c) const;
  /// Bit for a boolean state of a visible object; `positive` picks open/on/clean
  /// over closed/off/dirty.
  std::size_t open_state(ObjectClass c, bool positive) const;
  std::size_t switch_state(ObjectClass c, bool positive) const;
  std::size_t clean_state(ObjectClass c, bool positive) const;
  std::size_t placement(const RelationFact& fact) const;
  std::size_t inventory(ObjectClass c) const;

 private:
  FeatureLayout();

  std::size_t size_ = 0;
  std::size_t room_base_ = 0, visible_base_ = 0, inventory_base_ = 0;
  std::vector<std::ptrdiff_t> open_, switch_, clean_;  // per class, -1 when absent
  std::vector<RelationFact> placements_;               // sorted
  std::size_t placement_base_ = 0;
};

/// Object visible from the agent's position: held, or in the agent's room
/// and not shut inside a closed container.
bool is_visible(const EnvironmentState& state, ObjectId id);
std::vector<ObjectId> visible_objects(const EnvironmentState& state);

/// Noiseless multi-hot frame; a deterministic function of the state.
std::vector<double> encode_frame(const EnvironmentState& state);
/// Frame plus i.i.d. N(0, sigma^2) noise.
std::vector<double> render_frame(const EnvironmentState& state, double sigma, std::mt19937_64& rng);

/// Partial egocentric view of one action: stacked start/end frames.
struct Observation {
  std::vector<double> start_features;
  std::vector<double> end_features;
  std::vector<ObjectId> visible_objects;  // debugging only; never fed to networks
};

Observation render_observation(const EnvironmentState& before, const EnvironmentState& after, double sigma,
                               std::mt19937_64& rng);

}  // namespace tamplan::sim
