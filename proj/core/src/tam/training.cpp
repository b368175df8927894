#include "tamplan/tam/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "tamplan/common/errors.hpp"
#include "tamplan/common/rng.hpp"
#include "tamplan/grad/ops.hpp"
#include "tamplan/grad/optimizer.hpp"
#include "tamplan/sim/vocabulary.hpp"
#include "tamplan/tam/losses.hpp"

namespace tamplan::tam {

using namespace grad;

StepTable StepTable::build(std::span<const sim::Demonstration> demos) {
  StepTable t;
  std::vector<double> stacked, ends, starts;
  std::size_t f = 0;
  const auto& vocab = sim::ActionVocabulary::instance();
  for (std::size_t e = 0; e < demos.size(); ++e) {
    const auto& d = demos[e];
    t.episode_begin.push_back(t.action.size());
    t.episode_length.push_back(d.steps.size());
    t.episode_goal.push_back(d.goal_id);
    for (std::size_t s = 0; s < d.steps.size(); ++s) {
      const auto& o = d.steps[s].observation;
      if (f == 0) f = o.start_features.size();
      if (o.start_features.size() != f || o.end_features.size() != f) {
        throw DimensionError("step table: inconsistent feature sizes");
      }
      stacked.insert(stacked.end(), o.start_features.begin(), o.start_features.end());
      stacked.insert(stacked.end(), o.end_features.begin(), o.end_features.end());
      starts.insert(starts.end(), o.start_features.begin(), o.start_features.end());
      ends.insert(ends.end(), o.end_features.begin(), o.end_features.end());
      t.action.push_back(vocab.encode(d.steps[s].action));
      t.goal.push_back(d.goal_id);
      t.episode.push_back(e);
      t.step.push_back(s);
    }
  }
  const std::size_t n = t.action.size();
  if (n > 0) {
    t.stacked = Tensor({n, 2 * f}, std::move(stacked));
    t.ends = Tensor({n, f}, std::move(ends));
    t.starts = Tensor({n, f}, std::move(starts));
  }
  return t;
}

bool is_held_out(const sim::Demonstration& d) { return mix64(d.episode_id ^ 0x5EEDULL) % 10 == 0; }

Split split_demonstrations(std::span<const sim::Demonstration> demos) {
  Split s;
  for (const auto& d : demos) (is_held_out(d) ? s.held_out : s.train).push_back(d);
  return s;
}

void to_json(nlohmann::json& j, const AffordanceTrainConfig& c) {
  j = {{"steps", c.steps}, {"classes_per_batch", c.classes_per_batch}, {"per_class", c.per_class},
       {"learning_rate", c.learning_rate}, {"seed", c.seed}};
}
void from_json(const nlohmann::json& j, AffordanceTrainConfig& c) {
  AffordanceTrainConfig d;
  c.steps = j.value("steps", d.steps);
  c.classes_per_batch = j.value("classes_per_batch", d.classes_per_batch);
  c.per_class = j.value("per_class", d.per_class);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.seed = j.value("seed", d.seed);
}
void to_json(nlohmann::json& j, const AssocTrainConfig& c) {
  j = {{"steps", c.steps}, {"batch", c.batch}, {"learning_rate", c.learning_rate}, {"seed", c.seed}};
}
void from_json(const nlohmann::json& j, AssocTrainConfig& c) {
  AssocTrainConfig d;
  c.steps = j.value("steps", d.steps);
  c.batch = j.value("batch", d.batch);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.seed = j.value("seed", d.seed);
}
void to_json(nlohmann::json& j, const LocalizationTrainConfig& c) {
  j = {{"steps", c.steps}, {"batch", c.batch}, {"learning_rate", c.learning_rate},
       {"min_separation", c.min_separation}, {"seed", c.seed}};
}
void from_json(const nlohmann::json& j, LocalizationTrainConfig& c) {
  LocalizationTrainConfig d;
  c.steps = j.value("steps", d.steps);
  c.batch = j.value("batch", d.batch);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.min_separation = j.value("min_separation", d.min_separation);
  c.seed = j.value("seed", d.seed);
}

namespace {

Tensor gather_rows(const Tensor& m, std::span<const std::size_t> rows) {
  const std::size_t c = m.cols();
  std::vector<double> out;
  out.reserve(rows.size() * c);
  for (auto r : rows) {
    const auto row = m.row(r);
    out.insert(out.end(), row.begin(), row.end());
  }
  return Tensor({rows.size(), c}, std::move(out));
}

double dot_span(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TrainReport train_affordance(AffordanceNet& net, const StepTable& train, const StepTable& held_out,
                             const AffordanceTrainConfig& config) {
  if (train.size() == 0) throw ConfigError("train_affordance: empty dataset");
  std::map<std::size_t, std::vector<std::size_t>> by_action;
  for (std::size_t i = 0; i < train.size(); ++i) by_action[train.action[i]].push_back(i);
  std::vector<const std::vector<std::size_t>*> usable;
  for (const auto& [a, rows] : by_action) {
    if (rows.size() >= 2) usable.push_back(&rows);
  }
  if (usable.size() < 2) throw ConfigError("train_affordance: need two action classes with two observations each");

  auto rng = make_rng(config.seed, {0xAFF});
  OptimizerConfig oc;
  oc.learning_rate = config.learning_rate;
  Optimizer opt(oc);
  TrainReport report;
  const std::size_t per_class = std::max<std::size_t>(2, config.per_class);
  for (std::size_t step = 0; step < config.steps; ++step) {
    // Distinct classes by partial Fisher-Yates.
    std::vector<std::size_t> order(usable.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t n_classes = std::min(config.classes_per_batch, usable.size());
    std::vector<std::size_t> rows, labels;
    for (std::size_t k = 0; k < n_classes; ++k) {
      std::swap(order[k], order[k + uniform_index(rng, order.size() - k)]);
      const auto& pool = *usable[order[k]];
      for (std::size_t m = 0; m < per_class; ++m) {
        rows.push_back(pool[uniform_index(rng, pool.size())]);
        labels.push_back(train.action[rows.back()]);
      }
    }
    Tape tape;
    ParamScope scope(tape, net.store);
    auto out = net.forward(scope, tape.constant(gather_rows(train.stacked, rows)));
    auto nce = info_nce(out.z, labels, net.config.temperature);
    report.skipped_anchors += nce.skipped;
    Var loss = scale(nce.loss_sum, 1.0 / static_cast<double>(nce.anchors));
    tape.backward(loss);
    opt.step(net.store);
    report.loss_curve.push_back(loss.value().item());
  }
  report.held_out_metric = held_out.size() ? nearest_centroid_accuracy(net, train, held_out) : 0.0;
  return report;
}

double nearest_centroid_accuracy(const AffordanceNet& net, const StepTable& train, const StepTable& held_out) {
  if (held_out.size() == 0) return 0.0;
  const auto zt = net.embed(train.stacked).second;
  const auto zh = net.embed(held_out.stacked).second;
  const std::size_t d = zt.cols();
  std::map<std::size_t, std::vector<double>> centroid;
  for (std::size_t i = 0; i < train.size(); ++i) {
    auto& c = centroid[train.action[i]];
    c.resize(d, 0.0);
    const auto row = zt.row(i);
    for (std::size_t k = 0; k < d; ++k) c[k] += row[k];
  }
  for (auto& [a, c] : centroid) {
    const double norm = std::sqrt(dot_span(c, c));
    if (norm > 0.0) {
      for (auto& x : c) x /= norm;
    }
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < held_out.size(); ++i) {
    double best = -1e300;
    std::size_t best_label = 0;
    for (const auto& [a, c] : centroid) {
      const double s = dot_span(zh.row(i), c);
      if (s > best) {
        best = s;
        best_label = a;
      }
    }
    correct += best_label == held_out.action[i];
  }
  return static_cast<double>(correct) / static_cast<double>(held_out.size());
}

CosineSeparation cosine_separation(const AffordanceNet& net, const StepTable& table) {
  const auto z = net.embed(table.stacked).second;
  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    for (std::size_t j = i + 1; j < table.size(); ++j) {
      const double s = dot_span(z.row(i), z.row(j));
      if (table.action[i] == table.action[j]) {
        intra += s;
        ++n_intra;
      } else {
        inter += s;
        ++n_inter;
      }
    }
  }
  return {n_intra ? intra / static_cast<double>(n_intra) : 0.0, n_inter ? inter / static_cast<double>(n_inter) : 0.0};
}

std::vector<AssocPair> sample_assoc_pairs(const StepTable& table, std::size_t count, std::mt19937_64& rng) {
  std::vector<std::vector<std::size_t>> by_goal;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table.goal[i] >= by_goal.size()) by_goal.resize(table.goal[i] + 1);
    by_goal[table.goal[i]].push_back(i);
  }
  std::vector<std::size_t> goals;
  for (std::size_t g = 0; g < by_goal.size(); ++g) {
    if (!by_goal[g].empty()) goals.push_back(g);
  }
  if (goals.size() < 2) throw ConfigError("goal association needs at least two goals to form negatives");
  const auto draw = [&](std::size_t g) { return by_goal[g][uniform_index(rng, by_goal[g].size())]; };
  const auto other = [&](std::size_t g) {
    std::size_t o;
    do {
      o = goals[uniform_index(rng, goals.size())];
    } while (o == g);
    return o;
  };
  std::vector<AssocPair> pairs;
  pairs.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t g = goals[uniform_index(rng, goals.size())];
    AssocPair p;
    if (k % 2 == 0) {
      p = {draw(g), draw(g), g, 1.0};
    } else if (k % 4 == 1) {
      const std::size_t o = other(g);
      p = {draw(o), draw(o), g, 0.0};
    } else {
      const std::size_t o = other(g);
      p = {draw(o), draw(g), g, 0.0};
      if (bernoulli(rng, 0.5)) std::swap(p.i, p.j);
    }
    pairs.push_back(p);
  }
  return pairs;
}

double goal_association_accuracy(const GoalAssociator& net, const Tensor& embeddings, std::span<const AssocPair> pairs) {
  if (pairs.empty()) return 0.0;
  std::vector<std::size_t> is, js, gs;
  for (const auto& p : pairs) {
    is.push_back(p.i);
    js.push_back(p.j);
    gs.push_back(p.goal);
  }
  Tape tape;
  tape.set_grad_enabled(false);
  ParamScope scope(tape, const_cast<ParameterStore&>(net.store));
  const auto logits = net.logits(scope, tape.constant(gather_rows(embeddings, is)),
                                 tape.constant(gather_rows(embeddings, js)), gs)
                          .value();
  std::size_t correct = 0;
  for (std::size_t k = 0; k < pairs.size(); ++k) correct += (logits[k] > 0.0) == (pairs[k].label > 0.5);
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

TrainReport train_goal_association(GoalAssociator& net, const AffordanceNet& encoder, const StepTable& train,
                                   const StepTable& held_out, const AssocTrainConfig& config) {
  if (train.size() == 0) throw ConfigError("train_goal_association: empty dataset");
  const Tensor v_train = encoder.embed(train.stacked).first;
  auto rng = make_rng(config.seed, {0xA550C});
  sample_assoc_pairs(train, 1, rng);  // validates goal count up front
  OptimizerConfig oc;
  oc.learning_rate = config.learning_rate;
  Optimizer opt(oc);
  TrainReport report;
  for (std::size_t step = 0; step < config.steps; ++step) {
    const auto pairs = sample_assoc_pairs(train, config.batch, rng);
    std::vector<std::size_t> is, js, gs;
    std::vector<double> labels;
    for (const auto& p : pairs) {
      is.push_back(p.i);
      js.push_back(p.j);
      gs.push_back(p.goal);
      labels.push_back(p.label);
    }
    Tape tape;
    ParamScope scope(tape, net.store);
    Var logits = net.logits(scope, tape.constant(gather_rows(v_train, is)), tape.constant(gather_rows(v_train, js)), gs);
    Var loss = bce_with_logits(logits, labels);
    tape.backward(loss);
    opt.step(net.store);
    report.loss_curve.push_back(loss.value().item());
  }
  if (held_out.size() > 0) {
    const Tensor v_held = encoder.embed(held_out.stacked).first;
    auto eval_rng = make_rng(config.seed, {0xE7A1});
    const auto pairs = sample_assoc_pairs(held_out, 4000, eval_rng);
    report.held_out_metric = goal_association_accuracy(net, v_held, pairs);
  }
  return report;
}

std::vector<FramePair> sample_frame_pairs(const StepTable& table, std::size_t count, std::size_t min_separation,
                                          std::mt19937_64& rng) {
  const std::size_t n_eps = table.episode_begin.size();
  std::vector<std::size_t> adjacent, wide;  // episodes usable for positives / within-episode negatives
  for (std::size_t e = 0; e < n_eps; ++e) {
    if (table.episode_length[e] >= 2) adjacent.push_back(e);
    if (table.episode_length[e] >= min_separation) wide.push_back(e);
  }
  if (adjacent.empty()) throw ConfigError("localization: need episodes with at least two steps");
  if (wide.empty() && n_eps < 2) {
    throw ConfigError("localization: separation " + std::to_string(min_separation) +
                      " exceeds every episode length and there is no second episode");
  }
  // Frame at time t of an episode: start_t, or end_{t-1} at the final time.
  const auto frame = [&](std::size_t e, std::size_t t) {
    const std::size_t len = table.episode_length[e];
    const std::size_t base = table.episode_begin[e];
    std::span<const double> row;
    if (t == len || (t > 0 && bernoulli(rng, 0.5))) {
      row = table.ends.row(base + t - 1);
    } else {
      row = table.starts.row(base + t);
    }
    return std::vector<double>(row.begin(), row.end());
  };
  std::vector<FramePair> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    FramePair p;
    if (k % 2 == 0) {
      const std::size_t e = adjacent[uniform_index(rng, adjacent.size())];
      const std::size_t t = 1 + uniform_index(rng, table.episode_length[e] - 1);
      const auto end_row = table.ends.row(table.episode_begin[e] + t - 1);
      const auto start_row = table.starts.row(table.episode_begin[e] + t);
      p.a.assign(end_row.begin(), end_row.end());
      p.b.assign(start_row.begin(), start_row.end());
      p.label = 1.0;
    } else if ((k % 4 == 1 && !wide.empty()) || n_eps < 2) {
      const std::size_t e = wide[uniform_index(rng, wide.size())];
      const std::size_t len = table.episode_length[e];
      std::size_t t1, t2;
      do {
        t1 = uniform_index(rng, len + 1);
        t2 = uniform_index(rng, len + 1);
      } while ((t1 > t2 ? t1 - t2 : t2 - t1) < min_separation);
      p.a = frame(e, t1);
      p.b = frame(e, t2);
    } else {
      const std::size_t e1 = uniform_index(rng, n_eps);
      std::size_t e2;
      do {
        e2 = uniform_index(rng, n_eps);
      } while (e2 == e1);
      p.a = frame(e1, uniform_index(rng, table.episode_length[e1] + 1));
      p.b = frame(e2, uniform_index(rng, table.episode_length[e2] + 1));
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<double> localization_scores(const LocalizationNet& net, std::span<const FramePair> pairs) {
  if (pairs.empty()) return {};
  std::vector<std::vector<double>> a, b;
  for (const auto& p : pairs) {
    a.push_back(p.a);
    b.push_back(p.b);
  }
  const Tensor ea = net.embed(stack_rows(a));
  const Tensor eb = net.embed(stack_rows(b));
  const auto head = net.head();
  std::vector<double> out;
  for (std::size_t k = 0; k < pairs.size(); ++k) out.push_back(1.0 / (1.0 + std::exp(-head.logit(ea.row(k), eb.row(k)))));
  return out;
}

double roc_auc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw DimensionError("roc_auc: size mismatch");
  double pos = 0, neg = 0, wins = 0;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return scores[x] < scores[y]; });
  // Rank-sum with midranks for ties.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] > 0.5) rank_sum += mid;
    }
    i = j;
  }
  for (double l : labels) (l > 0.5 ? pos : neg) += 1.0;
  if (pos == 0 || neg == 0) throw ContractError("roc_auc: need both classes");
  wins = rank_sum - pos * (pos + 1) / 2.0;
  return wins / (pos * neg);
}

TrainReport train_localization(LocalizationNet& net, const StepTable& train, const StepTable& held_out,
                               const LocalizationTrainConfig& config) {
  if (train.size() == 0) throw ConfigError("train_localization: empty dataset");
  const std::size_t longest = *std::max_element(train.episode_length.begin(), train.episode_length.end());
  if (config.min_separation > longest) {
    throw ConfigError("localization: separation " + std::to_string(config.min_separation) +
                      " exceeds every episode length (longest " + std::to_string(longest) + ")");
  }
  auto rng = make_rng(config.seed, {0x10C});
  OptimizerConfig oc;
  oc.learning_rate = config.learning_rate;
  Optimizer opt(oc);
  TrainReport report;
  for (std::size_t step = 0; step < config.steps; ++step) {
    const auto pairs = sample_frame_pairs(train, config.batch, config.min_separation, rng);
    std::vector<std::vector<double>> a, b;
    std::vector<double> labels;
    for (const auto& p : pairs) {
      a.push_back(p.a);
      b.push_back(p.b);
      labels.push_back(p.label);
    }
    Tape tape;
    ParamScope scope(tape, net.store);
    Var ea = net.branch(scope, tape.constant(stack_rows(a)));
    Var eb = net.branch(scope, tape.constant(stack_rows(b)));
    Var loss = bce_with_logits(net.pair_logits(scope, ea, eb), labels);
    tape.backward(loss);
    opt.step(net.store);
    report.loss_curve.push_back(loss.value().item());
  }
  if (held_out.size() > 0) {
    auto eval_rng = make_rng(config.seed, {0xE7A2});
    const auto pairs = sample_frame_pairs(held_out, 4000, config.min_separation, eval_rng);
    std::vector<double> labels;
    for (const auto& p : pairs) labels.push_back(p.label);
    report.held_out_metric = roc_auc(localization_scores(net, pairs), labels);
  }
  return report;
}

}  // namespace tamplan::tam
