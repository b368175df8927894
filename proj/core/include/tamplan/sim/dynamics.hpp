#pragma once

#include <optional>
#include <random>
#include <string_view>
#include <variant>
#include <vector>

#include "tamplan/sim/observation.hpp"
#include "tamplan/sim/world.hpp"

namespace tamplan::sim {

enum class FailReason {
  kInvalidAction,    // STOP or ill-typed arguments
  kNoSuchRoom,
  kNoSuchObject,
  kNotVisible,
  kHandsFull,
  kAlreadyHeld,
  kNotHeld,
  kContainerClosed,
  kWrongState,       // e.g. OPEN on an open cabinet
};

std::string_view to_string(FailReason reason);

struct NotExecutable {
  FailReason reason;
};

struct Transition {
  EnvironmentState state;
  Observation observation;
};

using StepResult = std::variant<Transition, NotExecutable>;

/// First failing precondition, or nullopt when the action can run.
///
/// Preconditions:
///   WALK(r)          r exists (walking to the current room is a no-op success)
///   GRAB(o)          o not held, visible, a free hand
///   PUTBACK(o, s)    o held, s visible
///   PUTIN(o, c)      o held, c visible, c open if openable
///   OPEN/CLOSE(o)    o visible, currently closed/open
///   SWITCHON/OFF(o)  o visible, currently off/on
std::optional<FailReason> check_preconditions(const EnvironmentState& state, const Action& action);

/// Applies effects in place; returns the failure and leaves `state` untouched
/// when a precondition fails.
std::optional<FailReason> apply(EnvironmentState& state, const Action& action);

/// Exactly the actions that `execute` accepts, in canonical (sorted) order.
std::vector<Action> executable_actions(const EnvironmentState& state);

/// Runs `action`; the observation carries the pre-action frame as start and
/// the post-action frame as end.
StepResult execute(const EnvironmentState& state, const Action& action, double sigma, std::mt19937_64& rng);

}  // namespace tamplan::sim
