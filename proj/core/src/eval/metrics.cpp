#include "tamplan/eval/metrics.hpp"

#include <algorithm>

#include "tamplan/sim/dynamics.hpp"

namespace tamplan::eval {

std::size_t lcs_length(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double lcs_normalized(std::span<const std::size_t> pred, std::span<const std::size_t> gt) {
  const auto denom = std::max(pred.size(), gt.size());
  if (denom == 0) return 1.0;
  return static_cast<double>(lcs_length(pred, gt)) / static_cast<double>(denom);
}

double executability(std::span<const sim::Action> pred, const sim::EnvironmentState& initial) {
  if (pred.empty()) return 1.0;
  auto state = initial;
  std::size_t ok = 0;
  for (const auto& a : pred) ok += !sim::apply(state, a).has_value();
  return static_cast<double>(ok) / static_cast<double>(pred.size());
}

double set_f1(const sim::FactSet& pred, const sim::FactSet& gt) {
  if (pred.empty() && gt.empty()) return 1.0;
  sim::FactSet common;
  std::set_intersection(pred.begin(), pred.end(), gt.begin(), gt.end(), std::back_inserter(common));
  if (common.empty()) return 0.0;
  const double p = static_cast<double>(common.size()) / static_cast<double>(pred.size());
  const double r = static_cast<double>(common.size()) / static_cast<double>(gt.size());
  return 2.0 * p * r / (p + r);
}

namespace {

sim::FactSet restrict(const sim::FactSet& s, sim::FactKind kind) {
  sim::FactSet out;
  std::copy_if(s.begin(), s.end(), std::back_inserter(out), [&](const sim::Fact& f) { return f.kind == kind; });
  return out;
}

sim::FactSet canonical(sim::FactSet s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

}  // namespace

GraphF1 graph_f1(const sim::FactSet& pred_in, const sim::FactSet& gt_in) {
  const auto pred = canonical(pred_in);
  const auto gt = canonical(gt_in);
  return {set_f1(pred, gt), set_f1(restrict(pred, sim::FactKind::kState), restrict(gt, sim::FactKind::kState)),
          set_f1(restrict(pred, sim::FactKind::kRelation), restrict(gt, sim::FactKind::kRelation))};
}

}  // namespace tamplan::eval
