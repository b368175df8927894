#include "tamplan/sim/observation.hpp"

#include <algorithm>

#include "tamplan/common/errors.hpp"

namespace tamplan::sim {

FeatureLayout::FeatureLayout()
    : open_(kObjectClassCount, -1), switch_(kObjectClassCount, -1), clean_(kObjectClassCount, -1) {
  std::size_t next = 0;
  room_base_ = next;
  next += kRoomCount;
  visible_base_ = next;
  next += kObjectClassCount;
  for (auto c : all_object_classes()) {
    const auto& t = traits(c);
    const auto i = static_cast<std::size_t>(c);
    if (t.openable) {
      open_[i] = static_cast<std::ptrdiff_t>(next);
      next += 2;
    }
    if (t.switchable) {
      switch_[i] = static_cast<std::ptrdiff_t>(next);
      next += 2;
    }
    if (t.cleanable) {
      clean_[i] = static_cast<std::ptrdiff_t>(next);
      next += 2;
    }
  }
  for (auto g : all_object_classes()) {
    if (!traits(g).grabbable) continue;
    for (auto a : all_object_classes()) {
      const auto& t = traits(a);
      if (t.surface) placements_.push_back({g, RelationKind::kOn, a});
      if (t.container) placements_.push_back({g, RelationKind::kInside, a});
      if (t.near_anchor) placements_.push_back({g, RelationKind::kNear, a});
    }
  }
  std::sort(placements_.begin(), placements_.end());
  placement_base_ = next;
  next += placements_.size();
  inventory_base_ = next;
  next += kObjectClassCount;
  size_ = next;
}

const FeatureLayout& FeatureLayout::instance() {
  static const FeatureLayout layout;
  return layout;
}

std::size_t FeatureLayout::room(Room r) const { return room_base_ + static_cast<std::size_t>(r); }

std::size_t FeatureLayout::visible(ObjectClass c) const { return visible_base_ + static_cast<std::size_t>(c); }

namespace {
std::size_t state_bit(const std::vector<std::ptrdiff_t>& table, ObjectClass c, bool positive, const char* what) {
  const auto base = table[static_cast<std::size_t>(c)];
  if (base < 0) throw ContractError(std::string("feature layout: class has no ") + what + " state");
  return static_cast<std::size_t>(base) + (positive ? 0 : 1);
}
}  // namespace

std::size_t FeatureLayout::open_state(ObjectClass c, bool positive) const {
  return state_bit(open_, c, positive, "open/closed");
}
std::size_t FeatureLayout::switch_state(ObjectClass c, bool positive) const {
  return state_bit(switch_, c, positive, "on/off");
}
std::size_t FeatureLayout::clean_state(ObjectClass c, bool positive) const {
  return state_bit(clean_, c, positive, "clean/dirty");
}

std::size_t FeatureLayout::placement(const RelationFact& fact) const {
  auto it = std::lower_bound(placements_.begin(), placements_.end(), fact);
  if (it == placements_.end() || *it != fact) throw ContractError("feature layout: placement not representable");
  return placement_base_ + static_cast<std::size_t>(it - placements_.begin());
}

std::size_t FeatureLayout::inventory(ObjectClass c) const { return inventory_base_ + static_cast<std::size_t>(c); }

bool is_visible(const EnvironmentState& state, ObjectId id) {
  const auto& info = state.object(id);
  if (info.held) return true;
  if (info.room != state.agent.room) return false;
  for (const auto& r : state.relations) {
    if (r.subject == id && r.relation == RelationKind::kInside) {
      const auto& container = state.object(r.target);
      if (traits(container.cls).openable && !container.open) return false;
    }
  }
  return true;
}

std::vector<ObjectId> visible_objects(const EnvironmentState& state) {
  std::vector<ObjectId> out;
  for (const auto& [id, info] : state.objects) {
    if (is_visible(state, id)) out.push_back(id);
  }
  return out;
}

std::vector<double> encode_frame(const EnvironmentState& state) {
  const auto& L = FeatureLayout::instance();
  std::vector<double> f(L.size(), 0.0);
  f[L.room(state.agent.room)] = 1.0;
  for (const auto& [id, info] : state.objects) {
    if (!is_visible(state, id)) continue;
    f[L.visible(id)] = 1.0;
    const auto& t = traits(id);
    if (t.openable) f[L.open_state(id, info.open)] = 1.0;
    if (t.switchable) f[L.switch_state(id, info.on)] = 1.0;
    if (t.cleanable) f[L.clean_state(id, info.clean)] = 1.0;
  }
  for (const auto& r : state.relations) {
    if (is_visible(state, r.subject)) f[L.placement(r)] = 1.0;
  }
  for (auto id : state.agent.inventory) f[L.inventory(id)] = 1.0;
  return f;
}

std::vector<double> render_frame(const EnvironmentState& state, double sigma, std::mt19937_64& rng) {
  auto f = encode_frame(state);
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (auto& v : f) v += noise(rng);
  }
  return f;
}

Observation render_observation(const EnvironmentState& before, const EnvironmentState& after, double sigma,
                               std::mt19937_64& rng) {
  Observation obs;
  obs.start_features = render_frame(before, sigma, rng);
  obs.end_features = render_frame(after, sigma, rng);
  obs.visible_objects = visible_objects(after);
  return obs;
}

}  // namespace tamplan::sim
