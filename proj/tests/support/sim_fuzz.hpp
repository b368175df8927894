#pragma once

#include <random>
#include <vector>

#include "tamplan/sim/apartment.hpp"
#include "tamplan/sim/dynamics.hpp"

namespace tamplan::testing {

/// Every verb/argument combination, typed or not, plus STOP.
inline std::vector<sim::Action> every_action() {
  using namespace sim;
  std::vector<Action> out{Action::stop()};
  for (auto r : all_rooms()) out.push_back(Action::walk(r));
  for (auto v : {Verb::kGrab, Verb::kOpen, Verb::kClose, Verb::kSwitchOn, Verb::kSwitchOff}) {
    for (auto o : all_object_classes()) {
      Action a;
      a.verb = v;
      a.object = o;
      out.push_back(a);
    }
  }
  for (auto v : {Verb::kPutBack, Verb::kPutIn}) {
    for (auto o : all_object_classes()) {
      for (auto t : all_object_classes()) {
        Action a;
        a.verb = v;
        a.object = o;
        a.target = t;
        out.push_back(a);
      }
    }
  }
  return out;
}

/// Random reachable state: a random apartment followed by a random walk
/// biased towards executable actions.
inline sim::EnvironmentState random_state(std::mt19937_64& rng, const sim::SimConfig& config = {}) {
  auto s = sim::generate_apartment(rng(), config);
  std::uniform_int_distribution<int> len(0, 25);
  const int n = len(rng);
  for (int i = 0; i < n; ++i) {
    const auto options = sim::executable_actions(s);
    std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
    sim::apply(s, options[pick(rng)]);
  }
  return s;
}

}  // namespace tamplan::testing
