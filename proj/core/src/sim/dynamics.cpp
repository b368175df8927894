#include "tamplan/sim/dynamics.hpp"

#include <algorithm>

namespace tamplan::sim {

std::string_view to_string(FailReason reason) {
  switch (reason) {
    case FailReason::kInvalidAction:
      return "invalid_action";
    case FailReason::kNoSuchRoom:
      return "no_such_room";
    case FailReason::kNoSuchObject:
      return "no_such_object";
    case FailReason::kNotVisible:
      return "not_visible";
    case FailReason::kHandsFull:
      return "hands_full";
    case FailReason::kAlreadyHeld:
      return "already_held";
    case FailReason::kNotHeld:
      return "not_held";
    case FailReason::kContainerClosed:
      return "container_closed";
    case FailReason::kWrongState:
      return "wrong_state";
  }
  return "unknown";
}

std::optional<FailReason> check_preconditions(const EnvironmentState& state, const Action& action) {
  if (action.verb == Verb::kStop || !action.well_formed()) return FailReason::kInvalidAction;
  if (action.verb == Verb::kWalk) {
    if (!state.has_room(action.room)) return FailReason::kNoSuchRoom;
    return std::nullopt;
  }
  if (!state.has_object(action.object)) return FailReason::kNoSuchObject;
  if (action.arity() == 2 && !state.has_object(action.target)) return FailReason::kNoSuchObject;
  const auto& obj = state.object(action.object);
  switch (action.verb) {
    case Verb::kGrab:
      if (obj.held) return FailReason::kAlreadyHeld;
      if (!is_visible(state, action.object)) return FailReason::kNotVisible;
      if (state.agent.inventory.size() >= kInventoryCapacity) return FailReason::kHandsFull;
      return std::nullopt;
    case Verb::kPutBack:
    case Verb::kPutIn: {
      if (!obj.held) return FailReason::kNotHeld;
      if (!is_visible(state, action.target)) return FailReason::kNotVisible;
      const auto& tgt = state.object(action.target);
      if (action.verb == Verb::kPutIn && traits(tgt.cls).openable && !tgt.open) return FailReason::kContainerClosed;
      return std::nullopt;
    }
    case Verb::kOpen:
    case Verb::kClose:
      if (!is_visible(state, action.object)) return FailReason::kNotVisible;
      if (obj.open == (action.verb == Verb::kOpen)) return FailReason::kWrongState;
      return std::nullopt;
    case Verb::kSwitchOn:
    case Verb::kSwitchOff:
      if (!is_visible(state, action.object)) return FailReason::kNotVisible;
      if (obj.on == (action.verb == Verb::kSwitchOn)) return FailReason::kWrongState;
      return std::nullopt;
    default:
      return FailReason::kInvalidAction;
  }
}

namespace {

void release(EnvironmentState& state, ObjectId id, RelationKind relation, ObjectId target) {
  auto& obj = state.object(id);
  obj.held = false;
  obj.room = state.object(target).room;
  auto& inv = state.agent.inventory;
  inv.erase(std::find(inv.begin(), inv.end(), id));
  state.relations.insert({id, relation, target});
}

}  // namespace

std::optional<FailReason> apply(EnvironmentState& state, const Action& action) {
  if (auto fail = check_preconditions(state, action)) return fail;
  switch (action.verb) {
    case Verb::kWalk:
      state.agent.room = action.room;
      break;
    case Verb::kGrab: {
      auto& obj = state.object(action.object);
      obj.held = true;
      obj.room.reset();
      std::erase_if(state.relations, [&](const RelationFact& r) { return r.subject == action.object; });
      state.agent.inventory.push_back(action.object);
      break;
    }
    case Verb::kPutBack:
      release(state, action.object, RelationKind::kOn, action.target);
      break;
    case Verb::kPutIn:
      release(state, action.object, RelationKind::kInside, action.target);
      break;
    case Verb::kOpen:
    case Verb::kClose:
      state.object(action.object).open = action.verb == Verb::kOpen;
      break;
    case Verb::kSwitchOn:
    case Verb::kSwitchOff:
      state.object(action.object).on = action.verb == Verb::kSwitchOn;
      // Running water cleans whatever sits in the sink.
      if (action.object == ObjectClass::kFaucet && action.verb == Verb::kSwitchOn) {
        for (const auto& r : state.relations) {
          if (r.relation == RelationKind::kInside && r.target == ObjectClass::kSink && traits(r.subject).cleanable) {
            state.object(r.subject).clean = true;
          }
        }
      }
      break;
    case Verb::kStop:
      break;
  }
  return std::nullopt;
}

std::vector<Action> executable_actions(const EnvironmentState& state) {
  std::vector<Action> out;
  for (auto r : state.rooms) out.push_back(Action::walk(r));
  for (const auto& [id, info] : state.objects) {
    const auto& t = traits(id);
    std::vector<Action> candidates;
    if (t.grabbable) {
      candidates.push_back(Action::grab(id));
      for (const auto& [tid, tinfo] : state.objects) {
        if (traits(tid).surface) candidates.push_back(Action::put_back(id, tid));
        if (traits(tid).container) candidates.push_back(Action::put_in(id, tid));
      }
    }
    if (t.openable) {
      candidates.push_back(Action::open(id));
      candidates.push_back(Action::close(id));
    }
    if (t.switchable) {
      candidates.push_back(Action::switch_on(id));
      candidates.push_back(Action::switch_off(id));
    }
    for (const auto& a : candidates) {
      if (!check_preconditions(state, a)) out.push_back(a);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

StepResult execute(const EnvironmentState& state, const Action& action, double sigma, std::mt19937_64& rng) {
  EnvironmentState next = state;
  if (auto fail = apply(next, action)) return NotExecutable{*fail};
  Observation obs = render_observation(state, next, sigma, rng);
  return Transition{std::move(next), std::move(obs)};
}

}  // namespace tamplan::sim
