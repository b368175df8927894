#include "tamplan/grad/optimizer.hpp"

#include <cmath>

#include "tamplan/common/errors.hpp"

namespace tamplan::grad {

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  if (!(config_.learning_rate > 0.0)) throw ConfigError("optimizer: learning rate must be positive");
  state_.learning_rate = config_.learning_rate;
}

void Optimizer::step(std::span<Parameter* const> params) {
  for (const auto* p : params) {
    if (!p->has_grad) throw ContractError("optimizer_step: parameter '" + p->name + "' has no gradient");
  }
  if (config_.kind == OptimizerKind::kAdam && state_.first_moment.empty()) {
    for (const auto* p : params) {
      state_.first_moment.emplace_back(p->value.numel(), 0.0);
      state_.second_moment.emplace_back(p->value.numel(), 0.0);
    }
  }
  if (config_.kind == OptimizerKind::kAdam && state_.first_moment.size() != params.size()) {
    throw ContractError("optimizer_step: parameter group changed between steps");
  }

  double clip = 1.0;
  if (config_.max_grad_norm > 0.0) {
    double sq = 0.0;
    for (const auto* p : params)
      for (double g : p->grad.values()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > config_.max_grad_norm) clip = config_.max_grad_norm / norm;
  }

  ++state_.step_count;
  const double lr = state_.learning_rate;
  if (config_.kind == OptimizerKind::kSgd) {
    for (auto* p : params) {
      auto v = p->value.values();
      auto g = p->grad.values();
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * clip * g[i];
    }
  } else {
    const double t = static_cast<double>(state_.step_count);
    const double c1 = 1.0 - std::pow(config_.beta1, t);
    const double c2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto* p = params[k];
      auto& m = state_.first_moment[k];
      auto& s = state_.second_moment[k];
      if (m.size() != p->value.numel()) throw ContractError("optimizer_step: moment buffer shape mismatch");
      auto v = p->value.values();
      auto g = p->grad.values();
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double gi = g[i] * clip;
        m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gi;
        s[i] = config_.beta2 * s[i] + (1.0 - config_.beta2) * gi * gi;
        v[i] -= lr * (m[i] / c1) / (std::sqrt(s[i] / c2) + config_.epsilon);
      }
    }
  }
  for (auto* p : params) p->zero_grad();
}

void Optimizer::step(ParameterStore& store) {
  std::vector<Parameter*> ps;
  for (auto& p : store.params()) ps.push_back(&p);
  step(ps);
}

std::vector<Parameter*> parameter_group(std::initializer_list<ParameterStore*> stores) {
  std::vector<Parameter*> out;
  for (auto* s : stores)
    for (auto& p : s->params()) out.push_back(&p);
  return out;
}

}  // namespace tamplan::grad
