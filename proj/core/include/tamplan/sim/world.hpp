#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace tamplan::sim {

enum class Room : std::uint8_t { kKitchen, kLivingRoom, kBedroom, kBathroom, kDiningRoom, kOffice };
inline constexpr std::size_t kRoomCount = 6;

enum class ObjectClass : std::uint8_t {
  kTable,
  kCabinet,
  kFridge,
  kSink,
  kFaucet,
  kCoffeeMaker,
  kTv,
  kSofa,
  kComputer,
  kDesk,
  kLamp,
  kBookshelf,
  kBed,
  kBathtub,
  kPlate,
  kCup,
  kRemote,
  kBook,
  kGroceries,
  kTowel,
};
inline constexpr std::size_t kObjectClassCount = 20;

enum class Verb : std::uint8_t { kWalk, kGrab, kPutBack, kOpen, kClose, kSwitchOn, kSwitchOff, kPutIn, kStop };
inline constexpr std::size_t kVerbCount = 9;

enum class RelationKind : std::uint8_t { kOn, kInside, kNear };

/// What an object class affords. One instance of each class per apartment,
/// so the class doubles as the object id.
struct ClassTraits {
  bool grabbable = false;
  bool surface = false;      // PUTBACK target
  bool container = false;    // PUTIN target
  bool openable = false;
  bool switchable = false;
  bool cleanable = false;
  bool near_anchor = false;  // small objects may rest "near" it
};

const ClassTraits& traits(ObjectClass c);

std::string_view name(Room r);
std::string_view name(ObjectClass c);
std::string_view name(Verb v);
std::string_view name(RelationKind r);
std::optional<Room> parse_room(std::string_view s);
std::optional<ObjectClass> parse_object(std::string_view s);
std::optional<Verb> parse_verb(std::string_view s);

const std::array<Room, kRoomCount>& all_rooms();
const std::array<ObjectClass, kObjectClassCount>& all_object_classes();

using ObjectId = ObjectClass;

struct ObjectInfo {
  ObjectClass cls{};
  std::optional<Room> room;  // empty while held
  bool open = false;
  bool on = false;
  bool clean = true;
  bool held = false;

  bool operator==(const ObjectInfo&) const = default;
};

struct RelationFact {
  ObjectId subject{};
  RelationKind relation{};
  ObjectId target{};

  auto operator<=>(const RelationFact&) const = default;
};

struct Agent {
  Room room = Room::kKitchen;
  std::vector<ObjectId> inventory;  // at most kInventoryCapacity

  bool operator==(const Agent&) const = default;
};

inline constexpr std::size_t kInventoryCapacity = 2;

/// Ground-truth scene graph.
struct EnvironmentState {
  std::vector<Room> rooms;  // sorted
  std::map<ObjectId, ObjectInfo> objects;
  std::set<RelationFact> relations;
  Agent agent;

  bool operator==(const EnvironmentState&) const = default;

  bool has_room(Room r) const;
  bool has_object(ObjectId id) const { return objects.count(id) != 0; }
  const ObjectInfo& object(ObjectId id) const;
  ObjectInfo& object(ObjectId id);
  bool holding(ObjectId id) const;
  /// The on/inside/near fact placing `id`, if any.
  std::optional<RelationFact> placement(ObjectId id) const;

  /// Throws ContractError naming the first violated invariant.
  void validate() const;
};

struct Action {
  Verb verb = Verb::kStop;
  Room room{};
  ObjectId object{};
  ObjectId target{};

  static Action walk(Room r);
  static Action grab(ObjectId o);
  static Action put_back(ObjectId o, ObjectId surface);
  static Action put_in(ObjectId o, ObjectId container);
  static Action open(ObjectId o);
  static Action close(ObjectId o);
  static Action switch_on(ObjectId o);
  static Action switch_off(ObjectId o);
  static Action stop();

  /// Number of arguments the verb takes (0 for STOP).
  std::size_t arity() const;
  /// Argument types agree with the verb (e.g. PUTIN targets a container).
  bool well_formed() const;

  std::string to_string() const;
  static std::optional<Action> parse(std::string_view text);

  auto operator<=>(const Action&) const = default;
};

}  // namespace tamplan::sim
