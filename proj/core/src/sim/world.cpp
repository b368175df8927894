#include "tamplan/sim/world.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "tamplan/common/errors.hpp"

namespace tamplan::sim {

namespace {

constexpr std::array<std::string_view, kRoomCount> kRoomNames{"kitchen",  "living_room", "bedroom",
                                                              "bathroom", "dining_room", "office"};

constexpr std::array<std::string_view, kObjectClassCount> kObjectNames{
    "table", "cabinet", "fridge",   "sink", "faucet",  "coffee_maker", "tv",        "sofa",  "computer", "desk",
    "lamp",  "bookshelf", "bed", "bathtub", "plate", "cup",          "remote", "book", "groceries", "towel"};

constexpr std::array<std::string_view, kVerbCount> kVerbNames{"WALK",     "GRAB",      "PUTBACK", "OPEN", "CLOSE",
                                                              "SWITCHON", "SWITCHOFF", "PUTIN",   "STOP"};

std::array<ClassTraits, kObjectClassCount> make_traits() {
  std::array<ClassTraits, kObjectClassCount> t{};
  auto at = [&t](ObjectClass c) -> ClassTraits& { return t[static_cast<std::size_t>(c)]; };
  at(ObjectClass::kTable).surface = true;
  at(ObjectClass::kDesk).surface = true;
  at(ObjectClass::kSofa).surface = true;
  at(ObjectClass::kBed).surface = true;
  at(ObjectClass::kBookshelf).surface = true;
  at(ObjectClass::kCoffeeMaker).surface = true;
  at(ObjectClass::kCoffeeMaker).switchable = true;
  at(ObjectClass::kCabinet).container = true;
  at(ObjectClass::kCabinet).openable = true;
  at(ObjectClass::kFridge).container = true;
  at(ObjectClass::kFridge).openable = true;
  at(ObjectClass::kFridge).near_anchor = true;
  at(ObjectClass::kSink).container = true;
  at(ObjectClass::kBathtub).near_anchor = true;
  for (auto c : {ObjectClass::kFaucet, ObjectClass::kTv, ObjectClass::kComputer, ObjectClass::kLamp}) {
    at(c).switchable = true;
  }
  for (auto c : {ObjectClass::kPlate, ObjectClass::kCup, ObjectClass::kRemote, ObjectClass::kBook,
                 ObjectClass::kGroceries, ObjectClass::kTowel}) {
    at(c).grabbable = true;
  }
  at(ObjectClass::kPlate).cleanable = true;
  at(ObjectClass::kCup).cleanable = true;
  return t;
}

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

}  // namespace

const ClassTraits& traits(ObjectClass c) {
  static const auto table = make_traits();
  return table[static_cast<std::size_t>(c)];
}

std::string_view name(Room r) { return kRoomNames[static_cast<std::size_t>(r)]; }
std::string_view name(ObjectClass c) { return kObjectNames[static_cast<std::size_t>(c)]; }
std::string_view name(Verb v) { return kVerbNames[static_cast<std::size_t>(v)]; }

std::string_view name(RelationKind r) {
  switch (r) {
    case RelationKind::kOn:
      return "ON";
    case RelationKind::kInside:
      return "INSIDE";
    case RelationKind::kNear:
      return "NEAR";
  }
  return "?";
}

std::optional<Room> parse_room(std::string_view s) { return lookup<Room>(kRoomNames, s); }
std::optional<ObjectClass> parse_object(std::string_view s) { return lookup<ObjectClass>(kObjectNames, s); }
std::optional<Verb> parse_verb(std::string_view s) { return lookup<Verb>(kVerbNames, s); }

const std::array<Room, kRoomCount>& all_rooms() {
  static const auto rooms = [] {
    std::array<Room, kRoomCount> r{};
    for (std::size_t i = 0; i < kRoomCount; ++i) r[i] = static_cast<Room>(i);
    return r;
  }();
  return rooms;
}

const std::array<ObjectClass, kObjectClassCount>& all_object_classes() {
  static const auto classes = [] {
    std::array<ObjectClass, kObjectClassCount> c{};
    for (std::size_t i = 0; i < kObjectClassCount; ++i) c[i] = static_cast<ObjectClass>(i);
    return c;
  }();
  return classes;
}

bool EnvironmentState::has_room(Room r) const { return std::binary_search(rooms.begin(), rooms.end(), r); }

const ObjectInfo& EnvironmentState::object(ObjectId id) const {
  auto it = objects.find(id);
  if (it == objects.end()) throw ContractError("state: no object " + std::string(name(id)));
  return it->second;
}

ObjectInfo& EnvironmentState::object(ObjectId id) {
  auto it = objects.find(id);
  if (it == objects.end()) throw ContractError("state: no object " + std::string(name(id)));
  return it->second;
}

bool EnvironmentState::holding(ObjectId id) const {
  return std::find(agent.inventory.begin(), agent.inventory.end(), id) != agent.inventory.end();
}

std::optional<RelationFact> EnvironmentState::placement(ObjectId id) const {
  for (const auto& r : relations) {
    if (r.subject == id) return r;
  }
  return std::nullopt;
}

void EnvironmentState::validate() const {
  const auto fail = [](const std::string& what) { throw ContractError("state invariant violated: " + what); };
  if (rooms.empty()) fail("no rooms");
  if (!std::is_sorted(rooms.begin(), rooms.end()) ||
      std::adjacent_find(rooms.begin(), rooms.end()) != rooms.end()) {
    fail("rooms not sorted/unique");
  }
  if (!has_room(agent.room)) fail("agent in unknown room");
  if (agent.inventory.size() > kInventoryCapacity) fail("inventory exceeds two hands");
  for (const auto& [id, info] : objects) {
    if (info.cls != id) fail("object id/class mismatch");
    const bool in_inventory = holding(id);
    if (info.held != in_inventory) fail(std::string(name(id)) + " held flag disagrees with inventory");
    if (info.held == info.room.has_value()) fail(std::string(name(id)) + " must be in exactly one room or inventory");
    if (info.room && !has_room(*info.room)) fail(std::string(name(id)) + " in unknown room");
  }
  for (auto id : agent.inventory) {
    if (!has_object(id)) fail("inventory references missing object");
  }
  for (const auto& r : relations) {
    if (!has_object(r.subject) || !has_object(r.target)) fail("relation endpoint missing");
    if (object(r.subject).held) fail("held object has a placement");
    if (object(r.subject).room != object(r.target).room) fail("relation spans rooms");
  }
}

Action Action::walk(Room r) {
  Action a;
  a.verb = Verb::kWalk;
  a.room = r;
  return a;
}

namespace {
Action object_action(Verb v, ObjectId o, ObjectId t = ObjectId{}) {
  Action a;
  a.verb = v;
  a.object = o;
  a.target = t;
  return a;
}
}  // namespace

Action Action::grab(ObjectId o) { return object_action(Verb::kGrab, o); }
Action Action::put_back(ObjectId o, ObjectId s) { return object_action(Verb::kPutBack, o, s); }
Action Action::put_in(ObjectId o, ObjectId c) { return object_action(Verb::kPutIn, o, c); }
Action Action::open(ObjectId o) { return object_action(Verb::kOpen, o); }
Action Action::close(ObjectId o) { return object_action(Verb::kClose, o); }
Action Action::switch_on(ObjectId o) { return object_action(Verb::kSwitchOn, o); }
Action Action::switch_off(ObjectId o) { return object_action(Verb::kSwitchOff, o); }
Action Action::stop() { return Action{}; }

std::size_t Action::arity() const {
  switch (verb) {
    case Verb::kStop:
      return 0;
    case Verb::kPutBack:
    case Verb::kPutIn:
      return 2;
    default:
      return 1;
  }
}

bool Action::well_formed() const {
  const auto& o = traits(object);
  switch (verb) {
    case Verb::kStop:
    case Verb::kWalk:
      return true;
    case Verb::kGrab:
      return o.grabbable;
    case Verb::kPutBack:
      return o.grabbable && traits(target).surface;
    case Verb::kPutIn:
      return o.grabbable && traits(target).container;
    case Verb::kOpen:
    case Verb::kClose:
      return o.openable;
    case Verb::kSwitchOn:
    case Verb::kSwitchOff:
      return o.switchable;
  }
  return false;
}

std::string Action::to_string() const {
  std::string s = "[" + std::string(name(verb)) + "]";
  switch (arity()) {
    case 0:
      break;
    case 1:
      s += " <" + std::string(verb == Verb::kWalk ? name(room) : name(object)) + ">";
      break;
    default:
      s += " <" + std::string(name(object)) + "> <" + std::string(name(target)) + ">";
  }
  return s;
}

std::optional<Action> Action::parse(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    if (ch == '[' || ch == ']' || ch == '<' || ch == '>' || std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  if (tokens.empty()) return std::nullopt;
  const auto verb = parse_verb(tokens[0]);
  if (!verb) return std::nullopt;
  Action a;
  a.verb = *verb;
  if (tokens.size() != 1 + a.arity()) return std::nullopt;
  if (a.verb == Verb::kWalk) {
    const auto r = parse_room(tokens[1]);
    if (!r) return std::nullopt;
    return walk(*r);
  }
  if (a.arity() >= 1) {
    const auto o = parse_object(tokens[1]);
    if (!o) return std::nullopt;
    a.object = *o;
  }
  if (a.arity() == 2) {
    const auto t = parse_object(tokens[2]);
    if (!t) return std::nullopt;
    a.target = *t;
  }
  if (!a.well_formed()) return std::nullopt;
  return a;
}

}  // namespace tamplan::sim
