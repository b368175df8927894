#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tamplan/grad/parameter.hpp"

namespace tamplan::grad {

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double max_grad_norm = 0.0;  // global-norm clipping, 0 disables
};

struct OptimizerState {
  double learning_rate = 0.0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step_count = 0;
};

/// SGD or Adam over a fixed, ordered parameter group. Gradients are zeroed
/// after every step; a parameter without a populated gradient is a contract error.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  void step(std::span<Parameter* const> params);
  void step(ParameterStore& store);

  const OptimizerState& state() const { return state_; }
  const OptimizerConfig& config() const { return config_; }
  void set_learning_rate(double lr) { state_.learning_rate = lr; }

 private:
  OptimizerConfig config_;
  OptimizerState state_;
};

std::vector<Parameter*> parameter_group(std::initializer_list<ParameterStore*> stores);

}  // namespace tamplan::grad
