#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "tamplan/tam/memory.hpp"

namespace tamplan::tam {

struct ReplanConfig {
  double step_size = 0.05;   // alpha
  double threshold = 0.5;    // T
  std::size_t max_trials = 10;  // K
  double clip_low = -3.0;
  double clip_high = 3.0;
  /// Weight of lambda * ||x - x0||^2 added to the loss; 0 disables it.
  double regularizer = 0.0;

  /// Throws ConfigError for ill-ordered bounds or out-of-range values.
  void validate() const;
};

void to_json(nlohmann::json& j, const ReplanConfig& c);
void from_json(const nlohmann::json& j, ReplanConfig& c);

using ScoreFn = std::function<double(std::span<const double>)>;
/// Gradient of the loss being minimised at x.
using LossGradFn = std::function<std::vector<double>(std::span<const double>)>;

struct EmbeddingReplan {
  std::vector<double> embedding;
  std::size_t trials = 0;
  bool success = false;
};

/// x_{k+1} = clip(x_k - alpha * sign(grad)) until score(x) >= T or K trials.
EmbeddingReplan replan_embedding(std::vector<double> x0, const ScoreFn& score, const LossGradFn& grad,
                                 const ReplanConfig& config);

struct ReplanResult {
  std::size_t node = 0;
  std::size_t trials = 0;
};
struct ReplanFailed {
  std::size_t trials = 0;
};
using ReplanOutcome = std::variant<ReplanResult, ReplanFailed>;

/// Goal-consistency repair of a localized node. Scores with
/// P_sigma(v_t, v_prev, goal); when below T, walks v_t down the gradient of
/// `loss` (default: BCE towards 1) until the nearest stored node in value
/// space passes the check, and returns that node. A non-empty `pool`
/// restricts the snap to those nodes.
ReplanOutcome replan(std::size_t node_t, std::size_t node_prev, std::size_t goal, const TamGraph& graph,
                     const GoalAssociator& assoc, const ReplanConfig& config, const LossGradFn& loss = {},
                     std::span<const std::size_t> pool = {});

/// Gradient of -log P_sigma(x, v_prev, goal) with respect to x.
std::vector<double> association_loss_grad(const GoalAssociator& assoc, std::span<const double> x,
                                          std::span<const double> v_prev, std::size_t goal);

/// Nearest node by Euclidean distance in value space; ties go to the lowest index.
std::size_t nearest_value_node(const TamGraph& graph, std::span<const double> v);
/// Nearest among `pool` (the whole graph when empty); ties go to the earliest entry.
std::size_t nearest_value_node(const TamGraph& graph, std::span<const double> v, std::span<const std::size_t> pool);

}  // namespace tamplan::tam
