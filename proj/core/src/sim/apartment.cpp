#include "tamplan/sim/apartment.hpp"

#include <algorithm>

#include "tamplan/common/errors.hpp"
#include "tamplan/common/rng.hpp"

namespace tamplan::sim {

void SimConfig::validate() const {
  if (min_rooms == 0) throw ConfigError("sim config: apartments need at least one room");
  if (min_rooms > max_rooms) throw ConfigError("sim config: min_rooms > max_rooms");
  if (max_rooms > kRoomCount) throw ConfigError("sim config: max_rooms exceeds room vocabulary (" +
                                                std::to_string(kRoomCount) + ")");
  for (double p : {p_container_open, p_switch_on, p_dirty}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("sim config: probabilities must lie in [0,1]");
  }
  if (!(noise_sigma >= 0.0)) throw ConfigError("sim config: noise_sigma must be non-negative");
}

void to_json(nlohmann::json& j, const SimConfig& c) {
  std::vector<std::string> classes;
  for (auto oc : c.object_classes) classes.emplace_back(name(oc));
  j = nlohmann::json{{"min_rooms", c.min_rooms},
                     {"max_rooms", c.max_rooms},
                     {"object_classes", classes},
                     {"p_container_open", c.p_container_open},
                     {"p_switch_on", c.p_switch_on},
                     {"p_dirty", c.p_dirty},
                     {"noise_sigma", c.noise_sigma}};
}

void from_json(const nlohmann::json& j, SimConfig& c) {
  SimConfig d;
  c.min_rooms = j.value("min_rooms", d.min_rooms);
  c.max_rooms = j.value("max_rooms", d.max_rooms);
  c.p_container_open = j.value("p_container_open", d.p_container_open);
  c.p_switch_on = j.value("p_switch_on", d.p_switch_on);
  c.p_dirty = j.value("p_dirty", d.p_dirty);
  c.noise_sigma = j.value("noise_sigma", d.noise_sigma);
  if (j.contains("object_classes")) {
    c.object_classes.clear();
    for (const auto& s : j.at("object_classes")) {
      auto oc = parse_object(s.get<std::string>());
      if (!oc) throw ConfigError("sim config: unknown object class '" + s.get<std::string>() + "'");
      c.object_classes.push_back(*oc);
    }
  } else {
    c.object_classes = d.object_classes;
  }
}

const std::vector<Room>& spawn_rooms() {
  static const std::vector<Room> rooms{Room::kKitchen, Room::kLivingRoom, Room::kBedroom, Room::kBathroom};
  return rooms;
}

namespace {

using R = Room;
using O = ObjectClass;

struct Anchor {
  RelationKind relation;
  ObjectClass target;
};

std::vector<Room> candidate_rooms(ObjectClass c) {
  switch (c) {
    case O::kTable:
      return {R::kDiningRoom, R::kKitchen, R::kLivingRoom};
    case O::kCabinet:
    case O::kFridge:
    case O::kSink:
    case O::kFaucet:
    case O::kCoffeeMaker:
      return {R::kKitchen};
    case O::kTv:
      return {R::kLivingRoom, R::kBedroom};
    case O::kSofa:
      return {R::kLivingRoom};
    case O::kBed:
      return {R::kBedroom};
    case O::kBathtub:
      return {R::kBathroom};
    case O::kComputer:
      return {R::kOffice, R::kBedroom, R::kLivingRoom};
    case O::kLamp:
      return {R::kLivingRoom, R::kBedroom, R::kOffice};
    case O::kBookshelf:
      return {R::kLivingRoom, R::kOffice, R::kBedroom};
    default:
      return {};
  }
}

std::vector<Anchor> candidate_anchors(ObjectClass c) {
  using K = RelationKind;
  switch (c) {
    case O::kPlate:
      return {{K::kInside, O::kCabinet}, {K::kOn, O::kTable}, {K::kInside, O::kSink}};
    case O::kCup:
      return {{K::kInside, O::kCabinet}, {K::kOn, O::kTable}, {K::kOn, O::kDesk}};
    case O::kRemote:
      return {{K::kOn, O::kSofa}, {K::kOn, O::kTable}, {K::kOn, O::kBed}};
    case O::kBook:
      return {{K::kOn, O::kBookshelf}, {K::kOn, O::kBed}, {K::kOn, O::kDesk}, {K::kOn, O::kSofa}};
    case O::kGroceries:
      return {{K::kNear, O::kFridge}, {K::kOn, O::kTable}};
    case O::kTowel:
      return {{K::kNear, O::kBathtub}, {K::kOn, O::kBed}};
    default:
      return {};
  }
}

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& options) {
  return options[uniform_index(rng, options.size())];
}

}  // namespace

EnvironmentState generate_apartment(std::uint64_t seed, const SimConfig& config) {
  config.validate();
  auto rng = make_rng(seed, {0xA9A87ULL});
  EnvironmentState s;

  const std::size_t n_rooms = config.min_rooms + uniform_index(rng, config.max_rooms - config.min_rooms + 1);
  const auto& core = spawn_rooms();
  s.rooms.assign(core.begin(), core.begin() + static_cast<std::ptrdiff_t>(std::min(n_rooms, core.size())));
  std::vector<Room> extra{R::kDiningRoom, R::kOffice};
  while (s.rooms.size() < n_rooms) {
    const auto i = uniform_index(rng, extra.size());
    s.rooms.push_back(extra[i]);
    extra.erase(extra.begin() + static_cast<std::ptrdiff_t>(i));
  }
  std::sort(s.rooms.begin(), s.rooms.end());
  s.agent.room = s.rooms.front();

  const auto wanted = [&](ObjectClass c) {
    return std::find(config.object_classes.begin(), config.object_classes.end(), c) != config.object_classes.end();
  };
  auto place = [&](ObjectClass c, std::vector<Room> options) {
    std::erase_if(options, [&](Room r) { return !s.has_room(r); });
    if (!wanted(c) || options.empty()) return;
    ObjectInfo info;
    info.cls = c;
    info.room = pick(rng, options);
    s.objects[c] = info;
  };

  // Furniture in a fixed order; the desk follows the computer and a lamp
  // only goes to the office when there is a desk to sit at.
  for (auto c : {O::kTable, O::kCabinet, O::kFridge, O::kSink, O::kFaucet, O::kCoffeeMaker, O::kTv, O::kSofa,
                 O::kBed, O::kBathtub, O::kComputer}) {
    place(c, candidate_rooms(c));
  }
  if (s.has_object(O::kComputer) && wanted(O::kDesk)) {
    s.objects[O::kDesk] = ObjectInfo{O::kDesk, s.object(O::kComputer).room};
  }
  {
    auto lamp_rooms = candidate_rooms(O::kLamp);
    if (!(s.has_object(O::kDesk) && s.object(O::kDesk).room == R::kOffice)) std::erase(lamp_rooms, R::kOffice);
    place(O::kLamp, lamp_rooms);
  }
  place(O::kBookshelf, candidate_rooms(O::kBookshelf));

  for (auto c : {O::kPlate, O::kCup, O::kRemote, O::kBook, O::kGroceries, O::kTowel}) {
    auto anchors = candidate_anchors(c);
    std::erase_if(anchors, [&](const Anchor& a) { return !s.has_object(a.target); });
    if (!wanted(c) || anchors.empty()) continue;
    const auto a = pick(rng, anchors);
    ObjectInfo info;
    info.cls = c;
    info.room = s.object(a.target).room;
    s.objects[c] = info;
    s.relations.insert({c, a.relation, a.target});
  }

  for (auto& [id, info] : s.objects) {
    const auto& t = traits(id);
    if (t.openable) info.open = bernoulli(rng, config.p_container_open);
    if (t.switchable) info.on = id != O::kFaucet && bernoulli(rng, config.p_switch_on);
    if (t.cleanable) info.clean = !bernoulli(rng, config.p_dirty);
  }
  s.validate();
  return s;
}

}  // namespace tamplan::sim
