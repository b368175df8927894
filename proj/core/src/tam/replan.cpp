#include "tamplan/tam/replan.hpp"

#include <algorithm>

#include "tamplan/common/errors.hpp"
#include "tamplan/grad/ops.hpp"

namespace tamplan::tam {

using namespace grad;

void ReplanConfig::validate() const {
  if (!(clip_low < clip_high)) throw ConfigError("replan: clip bounds must satisfy low < high");
  if (!(step_size > 0.0)) throw ConfigError("replan: step size must be positive");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("replan: threshold must lie in (0, 1)");
  if (regularizer < 0.0) throw ConfigError("replan: regularizer must be non-negative");
}

void to_json(nlohmann::json& j, const ReplanConfig& c) {
  j = {{"step_size", c.step_size}, {"threshold", c.threshold}, {"max_trials", c.max_trials},
       {"clip_low", c.clip_low},   {"clip_high", c.clip_high}, {"regularizer", c.regularizer}};
}

void from_json(const nlohmann::json& j, ReplanConfig& c) {
  ReplanConfig d;
  c.step_size = j.value("step_size", d.step_size);
  c.threshold = j.value("threshold", d.threshold);
  c.max_trials = j.value("max_trials", d.max_trials);
  c.clip_low = j.value("clip_low", d.clip_low);
  c.clip_high = j.value("clip_high", d.clip_high);
  c.regularizer = j.value("regularizer", d.regularizer);
}

EmbeddingReplan replan_embedding(std::vector<double> x0, const ScoreFn& score, const LossGradFn& grad,
                                 const ReplanConfig& config) {
  config.validate();
  EmbeddingReplan out;
  out.embedding = x0;
  if (score(out.embedding) >= config.threshold) {
    out.success = true;
    return out;
  }
  auto& x = out.embedding;
  for (std::size_t k = 1; k <= config.max_trials; ++k) {
    auto g = grad(x);
    if (g.size() != x.size()) throw DimensionError("replan: gradient size mismatch");
    for (std::size_t d = 0; d < x.size(); ++d) {
      const double gd = g[d] + 2.0 * config.regularizer * (x[d] - x0[d]);
      const double sign = (gd > 0.0) - (gd < 0.0);
      x[d] = std::clamp(x[d] - config.step_size * sign, config.clip_low, config.clip_high);
    }
    out.trials = k;
    if (score(x) >= config.threshold) {
      out.success = true;
      return out;
    }
  }
  return out;
}

std::vector<double> association_loss_grad(const GoalAssociator& assoc, std::span<const double> x,
                                          std::span<const double> v_prev, std::size_t goal) {
  const std::size_t d = x.size();
  Tape tape;
  ParamScope scope(tape, const_cast<ParameterStore&>(assoc.store));
  Var xv = tape.variable(Tensor({1, d}, {x.begin(), x.end()}));
  const std::size_t goals[] = {goal};
  Var logit = assoc.logits(scope, xv, tape.constant(Tensor({1, d}, {v_prev.begin(), v_prev.end()})), goals);
  const double target[] = {1.0};
  tape.backward(bce_with_logits(logit, target));
  return xv.grad().storage();
}

std::size_t nearest_value_node(const TamGraph& graph, std::span<const double> v, std::span<const std::size_t> pool) {
  if (graph.empty()) throw ContractError("replan: empty memory");
  const std::size_t n = pool.empty() ? graph.size() : pool.size();
  std::size_t best = 0;
  double best_d = 1e300;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t id = pool.empty() ? i : pool[i];
    const auto& nv = graph.node(id).v;
    double dist = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double diff = nv[k] - v[k];
      dist += diff * diff;
    }
    if (dist < best_d) {
      best_d = dist;
      best = id;
    }
  }
  return best;
}

std::size_t nearest_value_node(const TamGraph& graph, std::span<const double> v) {
  return nearest_value_node(graph, v, {});
}

ReplanOutcome replan(std::size_t node_t, std::size_t node_prev, std::size_t goal, const TamGraph& graph,
                     const GoalAssociator& assoc, const ReplanConfig& config, const LossGradFn& loss,
                     std::span<const std::size_t> pool) {
  const auto& prev = graph.node(node_prev).v;
  // Success is judged on the stored node the embedding snaps to.
  const ScoreFn score = [&](std::span<const double> x) {
    return assoc.score(graph.node(nearest_value_node(graph, x, pool)).v, prev, goal);
  };
  const LossGradFn grad = loss ? loss : LossGradFn([&](std::span<const double> x) {
    return association_loss_grad(assoc, x, prev, goal);
  });
  if (assoc.score(graph.node(node_t).v, prev, goal) >= config.threshold) return ReplanResult{node_t, 0};
  auto r = replan_embedding(graph.node(node_t).v, score, grad, config);
  if (!r.success) return ReplanFailed{r.trials};
  return ReplanResult{nearest_value_node(graph, r.embedding, pool), r.trials};
}

}  // namespace tamplan::tam
