#include "tamplan/plan/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tamplan/common/errors.hpp"
#include "tamplan/common/rng.hpp"
#include "tamplan/grad/ops.hpp"
#include "tamplan/grad/optimizer.hpp"
#include "tamplan/sim/vocabulary.hpp"

namespace tamplan::plan {

using namespace grad;

std::vector<MemorySlot> slots_from_nodes(const tam::TamGraph& graph, std::span<const std::size_t> nodes) {
  std::vector<MemorySlot> out;
  out.reserve(nodes.size());
  for (auto i : nodes) {
    const auto& n = graph.node(i);
    MemorySlot s;
    s.value = n.z;
    s.value.insert(s.value.end(), n.v.begin(), n.v.end());
    s.next_action = n.next_action;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<MemorySlot> empty_slots(std::size_t k, std::size_t value_dim) {
  MemorySlot s;
  s.value.assign(value_dim, 0.0);
  s.next_action = sim::ActionVocabulary::instance().pad();
  return std::vector<MemorySlot>(k, s);
}

std::vector<TeacherSequence> build_teacher_sequences(std::span<const sim::Demonstration> demos,
                                                     const tam::MemoryIndex* index, std::size_t k,
                                                     std::size_t value_dim, bool leave_one_out) {
  if (index) {
    RetrievalOptions plain;
    plain.k = k;
    plain.replan = false;
    MemoryReader reader(*index, nullptr, plain);
    return build_teacher_sequences(demos, reader, value_dim, leave_one_out);
  }
  const auto& vocab = sim::ActionVocabulary::instance();
  std::vector<TeacherSequence> out;
  out.reserve(demos.size());
  for (const auto& d : demos) {
    TeacherSequence s;
    s.goal = d.goal_id;
    s.episode_id = d.episode_id;
    for (const auto& step : d.steps) s.targets.push_back(vocab.encode(step.action));
    s.targets.push_back(vocab.stop());
    s.memory.assign(s.targets.size(), empty_slots(k, value_dim));
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TeacherSequence> build_teacher_sequences(std::span<const sim::Demonstration> demos, MemoryReader& reader,
                                                     std::size_t value_dim, bool leave_one_out) {
  const auto& vocab = sim::ActionVocabulary::instance();
  const std::size_t k = reader.options().k;
  std::vector<TeacherSequence> out;
  out.reserve(demos.size());
  for (const auto& d : demos) {
    TeacherSequence s;
    s.goal = d.goal_id;
    s.episode_id = d.episode_id;
    for (const auto& step : d.steps) s.targets.push_back(vocab.encode(step.action));
    s.targets.push_back(vocab.stop());
    reader.begin();
    for (std::size_t t = 0; t <= d.steps.size(); ++t) {
      const auto& frame = t == 0 ? d.initial_frame : d.steps[t - 1].observation.end_features;
      StepDecision unused;
      auto slots = reader.read(d.goal_id, frame, unused, leave_one_out ? std::optional(d.episode_id) : std::nullopt);
      while (slots.size() < k) slots.push_back(empty_slots(1, value_dim).front());
      s.memory.push_back(std::move(slots));
    }
    out.push_back(std::move(s));
  }
  return out;
}

void to_json(nlohmann::json& j, const DecoderTrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"batch", c.batch},
       {"learning_rate", c.learning_rate},
       {"max_grad_norm", c.max_grad_norm},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, DecoderTrainConfig& c) {
  DecoderTrainConfig d;
  c.epochs = j.value("epochs", d.epochs);
  c.batch = j.value("batch", d.batch);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.max_grad_norm = j.value("max_grad_norm", d.max_grad_norm);
  c.seed = j.value("seed", d.seed);
}

namespace {

DecoderInput input_of(const TeacherSequence& s) { return {s.goal, s.history(), s.memory}; }

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  return order;
}

}  // namespace

DecoderTrainReport train_decoder(ActionDecoder& decoder, std::span<const TeacherSequence> train,
                                 std::span<const TeacherSequence> held_out, const DecoderTrainConfig& config) {
  if (train.empty()) throw ConfigError("train_decoder: no training sequences");
  const auto& vocab = sim::ActionVocabulary::instance();
  if (decoder.config.output_size != vocab.output_size() || decoder.config.vocab_size != vocab.size()) {
    throw ProvenanceError("train_decoder: decoder vocabulary does not match the action vocabulary");
  }
  auto rng = make_rng(config.seed, {0xDEC});
  OptimizerConfig oc;
  oc.learning_rate = config.learning_rate;
  oc.max_grad_norm = config.max_grad_norm;
  Optimizer opt(oc);
  DecoderTrainReport report;
  const std::size_t batch = std::max<std::size_t>(1, config.batch);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = shuffled(train.size(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      Tape tape;
      ParamScope scope(tape, decoder.store);
      std::vector<Var> terms;
      std::size_t tokens = 0;
      for (std::size_t b = start; b < end; ++b) {
        const auto& s = train[order[b]];
        Var lp = log_softmax(decoder.logits(scope, input_of(s)));
        terms.push_back(sum(pick(lp, s.targets)));
        tokens += s.targets.size();
      }
      Var total = terms.front();
      for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
      Var loss = scale(total, -1.0 / static_cast<double>(tokens));
      tape.backward(loss);
      opt.step(decoder.store);
      report.loss_curve.push_back(loss.value().item());
    }
  }
  report.held_out_accuracy = held_out.empty() ? 0.0 : teacher_forced_accuracy(decoder, held_out);
  return report;
}

double teacher_forced_accuracy(const ActionDecoder& decoder, std::span<const TeacherSequence> seqs) {
  std::size_t correct = 0, total = 0;
  for (const auto& s : seqs) {
    const auto lp = decoder.log_probs(input_of(s));
    for (std::size_t p = 0; p < s.targets.size(); ++p) {
      correct += argmax(lp.row(p)) == s.targets[p];
      ++total;
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

double sequence_loss(const ActionDecoder& decoder, std::span<const TeacherSequence> seqs) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& s : seqs) {
    const auto lp = decoder.log_probs(input_of(s));
    for (std::size_t p = 0; p < s.targets.size(); ++p) total -= lp.at(p, s.targets[p]);
    tokens += s.targets.size();
  }
  return tokens ? total / static_cast<double>(tokens) : 0.0;
}

DecoderTrainReport train_linear_planner(LinearPlanner& planner, std::span<const TeacherSequence> train,
                                        std::span<const TeacherSequence> held_out, const DecoderTrainConfig& config) {
  struct Sample {
    std::vector<double> f;
    std::size_t target;
  };
  const auto flatten = [&](std::span<const TeacherSequence> seqs) {
    std::vector<Sample> out;
    for (const auto& s : seqs) {
      for (std::size_t p = 0; p < s.targets.size(); ++p) out.push_back({planner.features(s.goal, s.memory[p]), s.targets[p]});
    }
    return out;
  };
  const auto samples = flatten(train);
  if (samples.empty()) throw ConfigError("train_linear_planner: no training samples");
  auto rng = make_rng(config.seed, {0xC1A55});
  OptimizerConfig oc;
  oc.learning_rate = config.learning_rate;
  oc.max_grad_norm = config.max_grad_norm;
  Optimizer opt(oc);
  DecoderTrainReport report;
  const std::size_t batch = std::max<std::size_t>(1, config.batch) * 8;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = shuffled(samples.size(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::vector<std::vector<double>> rows;
      std::vector<std::size_t> targets;
      for (std::size_t b = start; b < end; ++b) {
        rows.push_back(samples[order[b]].f);
        targets.push_back(samples[order[b]].target);
      }
      Tape tape;
      ParamScope scope(tape, planner.store);
      Var loss = scale(sum(pick(log_softmax(planner.logits(scope, stack_rows(rows))), targets)),
                       -1.0 / static_cast<double>(targets.size()));
      tape.backward(loss);
      opt.step(planner.store);
      report.loss_curve.push_back(loss.value().item());
    }
  }
  const auto held = flatten(held_out);
  std::size_t correct = 0;
  for (const auto& s : held) {
    Tape tape;
    tape.set_grad_enabled(false);
    ParamScope scope(tape, planner.store);
    correct += argmax(planner.logits(scope, Tensor({1, s.f.size()}, s.f)).value().values()) == s.target;
  }
  report.held_out_accuracy = held.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(held.size());
  return report;
}

void to_json(nlohmann::json& j, const RetrievalOptions& o) {
  j = {{"k", o.k},
       {"replan", o.replan},
       {"replan_config", o.replan_config},
       {"relocalize_pool", o.relocalize_pool}};
}

void from_json(const nlohmann::json& j, RetrievalOptions& o) {
  RetrievalOptions d;
  o.k = j.value("k", d.k);
  o.replan = j.value("replan", d.replan);
  o.replan_config = j.contains("replan_config") ? j.at("replan_config").get<tam::ReplanConfig>() : d.replan_config;
  o.relocalize_pool = j.value("relocalize_pool", d.relocalize_pool);
}

MemoryReader::MemoryReader(const tam::MemoryIndex& index, const tam::GoalAssociator* assoc, RetrievalOptions options)
    : index_(index), assoc_(assoc), options_(options) {
  if (options_.replan && !assoc_) throw ConfigError("replanning needs a goal association network");
  if (options_.replan) options_.replan_config.validate();
}

std::vector<MemorySlot> MemoryReader::read(std::size_t goal, std::span<const double> frame, StepDecision& decision,
                                           std::optional<std::size_t> exclude_episode) {
  auto query = index_.query_of_frame(frame);
  std::size_t node = index_.localize(query, exclude_episode);
  if (options_.replan && prev_) {
    const auto& g = index_.graph();
    if (tam::goal_association_score(*assoc_, g.node(node), g.node(*prev_), goal) < options_.replan_config.threshold) {
      std::vector<std::size_t> pool;
      if (options_.relocalize_pool) {
        pool = index_.retrieve(query, options_.relocalize_pool, exclude_episode);
      } else if (exclude_episode) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (g.node(i).episode != *exclude_episode) pool.push_back(i);
        }
      }
      const auto outcome = tam::replan(node, *prev_, goal, g, *assoc_, options_.replan_config, {}, pool);
      if (const auto* ok = std::get_if<tam::ReplanResult>(&outcome)) {
        decision.replan_trials = ok->trials;
        if (ok->node != node) {
          decision.replanned = true;
          node = ok->node;
          const auto key = index_.query_of_node(node);
          query.assign(key.begin(), key.end());
        }
      } else {
        decision.replan_trials = std::get<tam::ReplanFailed>(outcome).trials;
        decision.replan_failed = true;
      }
    }
  }
  decision.localized = node;
  prev_ = node;
  decision.retrieved = index_.retrieve(query, options_.k, exclude_episode);
  return slots_from_nodes(index_.graph(), decision.retrieved);
}

DecoderPolicy::DecoderPolicy(const ActionDecoder& decoder, const tam::MemoryIndex* index,
                             const tam::GoalAssociator* assoc, RetrievalOptions options)
    : decoder_(decoder) {
  if (decoder.config.use_memory) {
    if (!index) throw ConfigError("decoder with memory needs a memory index");
    options.k = decoder.config.memory_slots;
    reader_.emplace(*index, assoc, options);
  }
}

void DecoderPolicy::begin(std::size_t goal) {
  goal_ = goal;
  history_.clear();
  memory_.clear();
  failed_.clear();
  if (reader_) reader_->begin();
}

StepDecision DecoderPolicy::decide(const std::vector<double>* frame) {
  StepDecision d;
  const auto& vocab = sim::ActionVocabulary::instance();
  if (history_.size() + 1 >= decoder_.config.max_length) {
    d.token = vocab.stop();
    return d;
  }
  if (decoder_.config.use_memory) {
    const auto k = decoder_.config.memory_slots;
    const auto vd = decoder_.config.value_dim;
    auto slots = frame ? reader_->read(goal_, *frame, d) : empty_slots(k, vd);
    while (slots.size() < k) slots.push_back(empty_slots(1, vd).front());
    memory_.push_back(std::move(slots));
  }
  const auto probs = decoder_.next_distribution({goal_, history_, memory_});
  d.token = argmax(probs, failed_);
  history_.push_back(d.token);
  return d;
}

void DecoderPolicy::feedback(const StepOutcome& outcome) {
  if (outcome.success) {
    failed_.clear();
    return;
  }
  if (history_.empty()) return;
  failed_.push_back(history_.back());
  history_.pop_back();
  if (!memory_.empty()) memory_.pop_back();
}

LinearPolicy::LinearPolicy(const LinearPlanner& planner, const tam::MemoryIndex& index,
                           const tam::GoalAssociator* assoc, RetrievalOptions options)
    : planner_(planner), reader_(index, assoc, options), value_dim_(planner.value_dim) {}

void LinearPolicy::begin(std::size_t goal) {
  goal_ = goal;
  failed_.clear();
  reader_.begin();
}

StepDecision LinearPolicy::decide(const std::vector<double>* frame) {
  StepDecision d;
  const auto slots = frame ? reader_.read(goal_, *frame, d) : empty_slots(reader_.options().k, value_dim_);
  d.token = last_ = argmax(planner_.scores(goal_, slots), failed_);
  return d;
}

void LinearPolicy::feedback(const StepOutcome& outcome) {
  if (outcome.success) {
    failed_.clear();
  } else {
    failed_.push_back(last_);
  }
}

StepDecision ReplayPolicy::decide(const std::vector<double>*) {
  StepDecision d;
  const auto& vocab = sim::ActionVocabulary::instance();
  d.token = next_ < actions_.size() ? vocab.encode(actions_[next_++]) : vocab.stop();
  return d;
}

Plan plan_episode(Policy& policy, std::size_t goal, EpisodeInterface& env, std::size_t max_steps) {
  const auto& vocab = sim::ActionVocabulary::instance();
  Plan plan;
  plan.goal = goal;
  policy.begin(goal);
  for (std::size_t t = 0; t < max_steps; ++t) {
    auto decision = policy.decide(env.observation());
    if (decision.token == vocab.stop()) {
      plan.stopped = true;
      break;
    }
    PlanStep step;
    step.predicted = vocab.decode(decision.token);
    step.outcome = env.submit(step.predicted);
    if (env.closed_loop()) policy.feedback(step.outcome);
    step.decision = std::move(decision);
    plan.steps.push_back(std::move(step));
  }
  return plan;
}

nlohmann::json plan_step_json(const PlanStep& step) {
  nlohmann::json j{{"predicted", step.predicted.to_string()},
                   {"executed", step.outcome.success},
                   {"failure", step.outcome.failure ? nlohmann::json(std::string(sim::to_string(*step.outcome.failure)))
                                                    : nlohmann::json(nullptr)},
                   {"attacked", step.outcome.attacked},
                   {"executed_action", step.outcome.executed.to_string()},
                   {"localized_node", step.decision.localized ? nlohmann::json(*step.decision.localized)
                                                              : nlohmann::json(nullptr)},
                   {"replan_trials", step.decision.replan_trials},
                   {"replanned", step.decision.replanned},
                   {"retrieved", step.decision.retrieved}};
  return j;
}

void write_trace(std::ostream& out, const Plan& plan, std::size_t episode_id) {
  for (std::size_t t = 0; t < plan.steps.size(); ++t) {
    auto j = plan_step_json(plan.steps[t]);
    j["episode_id"] = episode_id;
    j["goal"] = sim::goal(plan.goal).text;
    j["step"] = t;
    out << j.dump() << '\n';
  }
}

}  // namespace tamplan::plan
