#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>

#include "tamplan/grad/tape.hpp"

namespace tamplan::grad {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  double tolerance = 0.0;

  bool passed() const { return max_relative_error < tolerance; }
};

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  // Denominator floor: |a - n| / max(|a|, |n|, floor).
  double floor = 1e-5;
  // 0 checks every entry; otherwise a deterministic stride sample per parameter.
  std::size_t max_entries_per_parameter = 0;
};

/// Builds a scalar loss on a fresh tape; must bind the checked parameters
/// through Tape::parameter.
using LossBuilder = std::function<Var(Tape&)>;

/// Compares reverse-mode gradients against central finite differences.
GradCheckReport grad_check(std::span<Parameter* const> params, const LossBuilder& build,
                           const GradCheckOptions& options = {});

}  // namespace tamplan::grad
