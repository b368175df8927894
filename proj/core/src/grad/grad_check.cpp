#include "tamplan/grad/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace tamplan::grad {

GradCheckReport grad_check(std::span<Parameter* const> params, const LossBuilder& build,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  report.tolerance = options.tolerance;

  for (auto* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(build(tape));
  }
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.push_back(p->grad);
  for (auto* p : params) p->zero_grad();

  const auto eval = [&build] {
    Tape tape;
    tape.set_grad_enabled(false);
    return build(tape).value().item();
  };

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto* p = params[k];
    auto vals = p->value.values();
    const std::size_t n = vals.size();
    std::size_t stride = 1;
    if (options.max_entries_per_parameter > 0 && n > options.max_entries_per_parameter) {
      stride = (n + options.max_entries_per_parameter - 1) / options.max_entries_per_parameter;
    }
    for (std::size_t i = 0; i < n; i += stride) {
      const double orig = vals[i];
      vals[i] = orig + options.epsilon;
      const double up = eval();
      vals[i] = orig - options.epsilon;
      const double down = eval();
      vals[i] = orig;
      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = p->name;
        report.worst_index = i;
      }
    }
  }
  return report;
}

}  // namespace tamplan::grad
