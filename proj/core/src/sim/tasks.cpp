#include "tamplan/sim/tasks.hpp"

#include <algorithm>

#include "tamplan/common/errors.hpp"
#include "tamplan/sim/dynamics.hpp"

namespace tamplan::sim {

using O = ObjectClass;
using K = RelationKind;

const std::vector<Goal>& goal_vocabulary() {
  static const std::vector<Goal> goals{
      {0, "set up table"},   {1, "make coffee"},     {2, "watch tv"},  {3, "write email"},
      {4, "wash plate"},     {5, "store groceries"}, {6, "read book"}, {7, "clean kitchen"},
  };
  return goals;
}

const Goal& goal(std::size_t id) {
  if (id >= kGoalCount) throw ContractError("goal id " + std::to_string(id) + " outside vocabulary");
  return goal_vocabulary()[id];
}

std::optional<Goal> parse_goal(std::string_view text) {
  for (const auto& g : goal_vocabulary()) {
    if (g.text == text) return g;
  }
  return std::nullopt;
}

namespace {

bool has_fact(const EnvironmentState& s, ObjectId a, RelationKind r, ObjectId b) {
  return s.relations.count({a, r, b}) != 0;
}

bool all_present(const EnvironmentState& s, std::initializer_list<ObjectId> ids) {
  return std::all_of(ids.begin(), ids.end(), [&](ObjectId id) { return s.has_object(id); });
}

/// Where to sit in a room, if anywhere.
std::optional<ObjectId> seat_in(const EnvironmentState& s, Room room) {
  for (auto c : {O::kSofa, O::kBed, O::kDesk}) {
    if (s.has_object(c) && s.object(c).room == room) return c;
  }
  return std::nullopt;
}

bool resting_on_seat(const EnvironmentState& s, ObjectId item, Room room) {
  const auto seat = seat_in(s, room);
  return seat && has_fact(s, item, K::kOn, *seat);
}

/// Records actions while applying them to a private copy.
class Planner {
 public:
  explicit Planner(EnvironmentState s) : state_(std::move(s)) {}

  const EnvironmentState& state() const { return state_; }
  std::vector<Action> take() { return std::move(plan_); }

  void run(const Action& a) {
    if (auto fail = apply(state_, a)) {
      throw ContractError("expert step " + a.to_string() + " failed: " + std::string(to_string(*fail)));
    }
    plan_.push_back(a);
  }

  void go(Room r) {
    if (state_.agent.room != r) run(Action::walk(r));
  }

  /// Grabs each item not yet held; opens a closed container it is shut in and
  /// closes it again once nothing else is needed from inside.
  void fetch(std::initializer_list<ObjectId> items) {
    std::vector<ObjectId> todo;
    for (auto i : items) {
      if (!state_.object(i).held) todo.push_back(i);
    }
    for (std::size_t k = 0; k < todo.size(); ++k) {
      const auto item = todo[k];
      go(*state_.object(item).room);
      const auto where = state_.placement(item);
      std::optional<ObjectId> opened;
      if (where && where->relation == K::kInside && traits(where->target).openable &&
          !state_.object(where->target).open) {
        run(Action::open(where->target));
        opened = where->target;
      }
      run(Action::grab(item));
      if (opened) {
        const bool more_inside = std::any_of(todo.begin() + static_cast<std::ptrdiff_t>(k) + 1, todo.end(),
                                             [&](ObjectId o) { return has_fact(state_, o, K::kInside, *opened); });
        if (!more_inside) run(Action::close(*opened));
      }
    }
  }

  void switch_on(ObjectId o) {
    if (!state_.object(o).on) run(Action::switch_on(o));
  }

 private:
  EnvironmentState state_;
  std::vector<Action> plan_;
};

bool in_sink_clean(const EnvironmentState& s, ObjectId o) {
  return has_fact(s, o, K::kInside, O::kSink) && s.object(o).clean;
}

}  // namespace

bool goal_satisfied(std::size_t goal_id, const EnvironmentState& s) {
  switch (static_cast<GoalId>(goal(goal_id).id)) {
    case GoalId::kSetUpTable:
      return all_present(s, {O::kPlate, O::kCup, O::kTable}) && has_fact(s, O::kPlate, K::kOn, O::kTable) &&
             has_fact(s, O::kCup, K::kOn, O::kTable);
    case GoalId::kMakeCoffee:
      return all_present(s, {O::kCup, O::kCoffeeMaker}) && has_fact(s, O::kCup, K::kOn, O::kCoffeeMaker) &&
             s.object(O::kCoffeeMaker).on;
    case GoalId::kWatchTv:
      return all_present(s, {O::kTv, O::kRemote}) && s.object(O::kTv).on &&
             resting_on_seat(s, O::kRemote, *s.object(O::kTv).room);
    case GoalId::kWriteEmail:
      return all_present(s, {O::kBook, O::kDesk, O::kComputer}) && has_fact(s, O::kBook, K::kOn, O::kDesk) &&
             s.object(O::kComputer).on;
    case GoalId::kWashPlate:
      return all_present(s, {O::kPlate, O::kSink, O::kFaucet}) && in_sink_clean(s, O::kPlate) &&
             !s.object(O::kFaucet).on;
    case GoalId::kStoreGroceries:
      return all_present(s, {O::kGroceries, O::kFridge}) && has_fact(s, O::kGroceries, K::kInside, O::kFridge) &&
             !s.object(O::kFridge).open;
    case GoalId::kReadBook:
      return all_present(s, {O::kLamp, O::kBook}) && s.object(O::kLamp).on &&
             resting_on_seat(s, O::kBook, *s.object(O::kLamp).room);
    case GoalId::kCleanKitchen:
      return all_present(s, {O::kPlate, O::kCup, O::kSink, O::kFaucet}) && in_sink_clean(s, O::kPlate) &&
             in_sink_clean(s, O::kCup) && !s.object(O::kFaucet).on;
  }
  return false;
}

std::optional<std::vector<Action>> expert_plan(std::size_t goal_id, const EnvironmentState& state) {
  Planner p(state);
  const auto& s = p.state();
  const auto room_of = [&](ObjectId o) { return *s.object(o).room; };

  switch (static_cast<GoalId>(goal(goal_id).id)) {
    case GoalId::kSetUpTable: {
      if (!all_present(s, {O::kPlate, O::kCup, O::kTable})) return std::nullopt;
      std::vector<ObjectId> need;
      for (auto o : {O::kPlate, O::kCup}) {
        if (!has_fact(s, o, K::kOn, O::kTable)) need.push_back(o);
      }
      if (need.size() == 2) p.fetch({O::kPlate, O::kCup});
      if (need.size() == 1) p.fetch({need[0]});
      p.go(room_of(O::kTable));
      for (auto o : need) p.run(Action::put_back(o, O::kTable));
      break;
    }
    case GoalId::kMakeCoffee: {
      if (!all_present(s, {O::kCup, O::kCoffeeMaker})) return std::nullopt;
      if (!has_fact(s, O::kCup, K::kOn, O::kCoffeeMaker)) {
        p.fetch({O::kCup});
        p.go(room_of(O::kCoffeeMaker));
        p.run(Action::put_back(O::kCup, O::kCoffeeMaker));
      }
      p.go(room_of(O::kCoffeeMaker));
      p.switch_on(O::kCoffeeMaker);
      break;
    }
    case GoalId::kWatchTv: {
      if (!all_present(s, {O::kTv, O::kRemote})) return std::nullopt;
      const Room tv_room = room_of(O::kTv);
      const auto seat = seat_in(s, tv_room);
      if (!seat) return std::nullopt;
      const bool placed = resting_on_seat(s, O::kRemote, tv_room);
      if (!placed) p.fetch({O::kRemote});
      p.go(tv_room);
      p.switch_on(O::kTv);
      if (!placed) p.run(Action::put_back(O::kRemote, *seat));
      break;
    }
    case GoalId::kWriteEmail: {
      if (!all_present(s, {O::kBook, O::kDesk, O::kComputer})) return std::nullopt;
      const Room office = room_of(O::kComputer);
      if (!has_fact(s, O::kBook, K::kOn, O::kDesk)) {
        p.fetch({O::kBook});
        p.go(office);
        p.run(Action::put_back(O::kBook, O::kDesk));
      }
      p.go(office);
      p.switch_on(O::kComputer);
      if (s.has_object(O::kLamp) && room_of(O::kLamp) == office) p.switch_on(O::kLamp);
      break;
    }
    case GoalId::kWashPlate: {
      if (!all_present(s, {O::kPlate, O::kSink, O::kFaucet})) return std::nullopt;
      if (!has_fact(s, O::kPlate, K::kInside, O::kSink)) {
        p.fetch({O::kPlate});
        p.go(room_of(O::kSink));
        p.run(Action::put_in(O::kPlate, O::kSink));
      }
      p.go(room_of(O::kFaucet));
      p.run(Action::switch_on(O::kFaucet));
      p.run(Action::switch_off(O::kFaucet));
      break;
    }
    case GoalId::kStoreGroceries: {
      if (!all_present(s, {O::kGroceries, O::kFridge})) return std::nullopt;
      p.fetch({O::kGroceries});
      p.go(room_of(O::kFridge));
      if (!s.object(O::kFridge).open) p.run(Action::open(O::kFridge));
      p.run(Action::put_in(O::kGroceries, O::kFridge));
      p.run(Action::close(O::kFridge));
      break;
    }
    case GoalId::kReadBook: {
      if (!all_present(s, {O::kLamp, O::kBook})) return std::nullopt;
      const Room lamp_room = room_of(O::kLamp);
      const auto seat = seat_in(s, lamp_room);
      if (!seat) return std::nullopt;
      const bool placed = resting_on_seat(s, O::kBook, lamp_room);
      if (!placed) p.fetch({O::kBook});
      p.go(lamp_room);
      p.switch_on(O::kLamp);
      if (!placed) p.run(Action::put_back(O::kBook, *seat));
      break;
    }
    case GoalId::kCleanKitchen: {
      if (!all_present(s, {O::kPlate, O::kCup, O::kSink, O::kFaucet})) return std::nullopt;
      std::vector<ObjectId> need;
      for (auto o : {O::kPlate, O::kCup}) {
        if (!has_fact(s, o, K::kInside, O::kSink)) need.push_back(o);
      }
      if (need.size() == 2) p.fetch({O::kPlate, O::kCup});
      if (need.size() == 1) p.fetch({need[0]});
      p.go(room_of(O::kSink));
      for (auto o : need) p.run(Action::put_in(o, O::kSink));
      p.run(Action::switch_on(O::kFaucet));
      p.run(Action::switch_off(O::kFaucet));
      break;
    }
  }
  if (!goal_satisfied(goal_id, s)) throw ContractError("expert plan for '" + goal(goal_id).text + "' misses its goal");
  return p.take();
}

}  // namespace tamplan::sim
