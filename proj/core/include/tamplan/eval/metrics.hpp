#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tamplan/sim/snapshot.hpp"
#include "tamplan/sim/world.hpp"

namespace tamplan::eval {

std::size_t lcs_length(std::span<const std::size_t> a, std::span<const std::size_t> b);

/// LCS / max(|pred|, |gt|); 1 when both are empty.
double lcs_normalized(std::span<const std::size_t> pred, std::span<const std::size_t> gt);

/// Fraction of steps that succeed when played in order; failed steps leave
/// the state untouched. An empty sequence counts as fully executable.
double executability(std::span<const sim::Action> pred, const sim::EnvironmentState& initial);

struct GraphF1 {
  double f1 = 0.0;
  double f1_state = 0.0;
  double f1_relation = 0.0;
};

/// Set F1; an empty pair of (restricted) sets scores 1.
double set_f1(const sim::FactSet& pred, const sim::FactSet& gt);
GraphF1 graph_f1(const sim::FactSet& pred, const sim::FactSet& gt);

}  // namespace tamplan::eval
