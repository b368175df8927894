#include "tamplan/plan/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "tamplan/common/errors.hpp"
#include "tamplan/grad/ops.hpp"

namespace tamplan::plan {

using namespace grad;

void DecoderConfig::validate() const {
  for (auto d : {model_dim, heads, layers, ffn_dim, max_length, memory_slots, value_dim, goal_count, vocab_size,
                 output_size}) {
    if (d == 0) throw ConfigError("decoder config: sizes must be positive");
  }
  if (model_dim % heads != 0) throw ConfigError("decoder config: model_dim must be divisible by heads");
  if (output_size > vocab_size) throw ConfigError("decoder config: output_size exceeds vocab_size");
}

void to_json(nlohmann::json& j, const DecoderConfig& c) {
  j = {{"model_dim", c.model_dim},
       {"heads", c.heads},
       {"layers", c.layers},
       {"ffn_dim", c.ffn_dim},
       {"max_length", c.max_length},
       {"memory_slots", c.memory_slots},
       {"value_dim", c.value_dim},
       {"goal_count", c.goal_count},
       {"vocab_size", c.vocab_size},
       {"output_size", c.output_size},
       {"use_memory", c.use_memory},
       {"use_goal", c.use_goal},
       {"memory_next_action", c.memory_next_action},
       {"dropout", c.dropout}};
}

void from_json(const nlohmann::json& j, DecoderConfig& c) {
  DecoderConfig d;
  c.model_dim = j.value("model_dim", d.model_dim);
  c.heads = j.value("heads", d.heads);
  c.layers = j.value("layers", d.layers);
  c.ffn_dim = j.value("ffn_dim", d.ffn_dim);
  c.max_length = j.value("max_length", d.max_length);
  c.memory_slots = j.value("memory_slots", d.memory_slots);
  c.value_dim = j.value("value_dim", d.value_dim);
  c.goal_count = j.value("goal_count", d.goal_count);
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.output_size = j.value("output_size", d.output_size);
  c.use_memory = j.value("use_memory", d.use_memory);
  c.use_goal = j.value("use_goal", d.use_goal);
  c.memory_next_action = j.value("memory_next_action", d.memory_next_action);
  c.dropout = j.value("dropout", d.dropout);
}

std::vector<double> sinusoid(std::size_t position, std::size_t dim) {
  std::vector<double> pe(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const double rate = std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(dim));
    const double angle = static_cast<double>(position) * rate;
    pe[i] = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
  }
  return pe;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw ContractError("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::size_t argmax(std::span<const double> values, std::span<const std::size_t> excluded) {
  if (values.empty()) throw ContractError("argmax: empty input");
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::find(excluded.begin(), excluded.end(), i) != excluded.end()) continue;
    if (!best || values[i] > values[*best]) best = i;
  }
  return best ? *best : argmax(values);
}

ActionDecoder ActionDecoder::create(const DecoderConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  ActionDecoder m;
  m.config = config;
  const std::size_t d = config.model_dim;
  auto& s = m.store;
  m.token_table_ = s.add("dec.token_embedding", {config.vocab_size, d}, Init::kNormalSmall, rng);
  // Extra row: the "no goal" token used by the goal-blind variant.
  m.goal_table_ = s.add("dec.goal_embedding", {config.goal_count + 1, d}, Init::kNormalSmall, rng);
  if (config.use_memory) {
    m.memory_proj_ = Linear::create(s, "dec.memory_proj", config.value_dim, d, rng);
    if (config.memory_next_action) {
      m.next_table_ = s.add("dec.next_action_embedding", {config.vocab_size, d}, Init::kNormalSmall, rng);
    }
  }
  const auto make_norm = [&](const std::string& name) {
    Norm n;
    n.gain = s.add(name + ".gain", {d}, Init::kOnes, rng);
    n.bias = s.add(name + ".bias", {d}, Init::kZeros, rng);
    return n;
  };
  const auto make_attention = [&](const std::string& name) {
    Attention a;
    a.q = Linear::create(s, name + ".q", d, d, rng);
    a.k = Linear::create(s, name + ".k", d, d, rng);
    a.v = Linear::create(s, name + ".v", d, d, rng);
    a.o = Linear::create(s, name + ".o", d, d, rng);
    return a;
  };
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::string p = "dec.layer" + std::to_string(l);
    Block b;
    b.n1 = make_norm(p + ".norm1");
    b.self = make_attention(p + ".self");
    if (config.use_memory) {
      b.n2 = make_norm(p + ".norm2");
      b.cross = make_attention(p + ".cross");
    }
    b.n3 = make_norm(p + ".norm3");
    b.ff1 = Linear::create(s, p + ".ff1", d, config.ffn_dim, rng);
    b.ff2 = Linear::create(s, p + ".ff2", config.ffn_dim, d, rng);
    m.blocks_.push_back(b);
  }
  m.final_norm_ = make_norm("dec.final_norm");
  m.out_ = Linear::create(s, "dec.out", d, config.output_size, rng);
  // Small readout so the untrained model starts near the uniform prediction.
  std::normal_distribution<double> small(0.0, 0.02);
  for (auto& w : s[m.out_.weight].value.values()) w = small(rng);
  return m;
}

Var ActionDecoder::norm(ParamScope& scope, const Norm& n, Var x) const {
  return add_rowwise(mul_rowwise(layer_norm(x, 1e-5), scope(n.gain)), scope(n.bias));
}

Var ActionDecoder::attend(ParamScope& scope, const Attention& a, Var queries, Var keys, const Tensor& mask) const {
  const std::size_t heads = config.heads;
  const std::size_t dh = config.model_dim / heads;
  Var q = a.q(scope, queries);
  Var k = a.k(scope, keys);
  Var v = a.v(scope, keys);
  Var m = scope.tape().constant(mask);
  std::vector<Var> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    Var qh = slice_cols(q, h * dh, dh);
    Var kh = slice_cols(k, h * dh, dh);
    Var vh = slice_cols(v, h * dh, dh);
    Var scores = add(scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dh))), m);
    outs.push_back(matmul(softmax(scores, 1), vh));
  }
  return a.o(scope, heads == 1 ? outs.front() : concat(outs, 1));
}

Var ActionDecoder::logits(ParamScope& scope, const DecoderInput& input) const {
  const std::size_t positions = input.history.size() + 1;
  if (positions > config.max_length) {
    throw ContractError("decoder: history of " + std::to_string(input.history.size()) +
                        " tokens exceeds max length " + std::to_string(config.max_length));
  }
  if (config.use_goal && input.goal >= config.goal_count) {
    throw ContractError("decoder: goal id " + std::to_string(input.goal) + " outside vocabulary");
  }
  for (auto t : input.history) {
    if (t >= config.vocab_size) throw ContractError("decoder: history token outside vocabulary");
  }
  Tape& tape = scope.tape();
  const std::size_t d = config.model_dim;

  const std::size_t goal_row[] = {config.use_goal ? input.goal : config.goal_count};
  Var x = add(embedding(scope(goal_table_), goal_row), tape.constant(Tensor({1, d}, sinusoid(0, d))));
  if (!input.history.empty()) {
    std::vector<double> pe;
    for (std::size_t t = 0; t < input.history.size(); ++t) {
      const auto row = sinusoid(t + 1, d);
      pe.insert(pe.end(), row.begin(), row.end());
    }
    Var h = add(embedding(scope(token_table_), input.history), tape.constant(Tensor({input.history.size(), d}, pe)));
    const Var parts[] = {x, h};
    x = concat(parts, 0);
  }

  Tensor causal({positions, positions});
  for (std::size_t i = 0; i < positions; ++i) {
    for (std::size_t j = i + 1; j < positions; ++j) causal.at(i, j) = -1e30;
  }

  Var memory;
  Tensor block_mask;
  if (config.use_memory) {
    if (input.memory.size() != positions) {
      throw ContractError("decoder: expected " + std::to_string(positions) + " memory blocks, got " +
                          std::to_string(input.memory.size()));
    }
    const std::size_t k = config.memory_slots;
    std::vector<double> values;
    std::vector<std::size_t> next;
    for (const auto& block : input.memory) {
      if (block.size() != k) throw ContractError("decoder: memory block must hold " + std::to_string(k) + " slots");
      for (const auto& slot : block) {
        if (slot.value.size() != config.value_dim) throw DimensionError("decoder: memory value size mismatch");
        values.insert(values.end(), slot.value.begin(), slot.value.end());
        next.push_back(slot.next_action);
      }
    }
    memory = memory_proj_(scope, tape.constant(Tensor({positions * k, config.value_dim}, std::move(values))));
    if (config.memory_next_action) memory = add(memory, embedding(scope(next_table_), next));
    block_mask = Tensor::filled({positions, positions * k}, -1e30);
    for (std::size_t i = 0; i < positions; ++i) {
      for (std::size_t s = 0; s < k; ++s) block_mask.at(i, i * k + s) = 0.0;
    }
  }

  for (const auto& b : blocks_) {
    Var h = norm(scope, b.n1, x);
    x = add(x, attend(scope, b.self, h, h, causal));
    if (config.use_memory) {
      x = add(x, attend(scope, b.cross, norm(scope, b.n2, x), memory, block_mask));
    }
    x = add(x, b.ff2(scope, relu(b.ff1(scope, norm(scope, b.n3, x)))));
  }
  return out_(scope, norm(scope, final_norm_, x));
}

Tensor ActionDecoder::log_probs(const DecoderInput& input) const {
  Tape tape;
  tape.set_grad_enabled(false);
  ParamScope scope(tape, const_cast<ParameterStore&>(store));
  return log_softmax(logits(scope, input)).value();
}

std::vector<double> ActionDecoder::next_distribution(const DecoderInput& input) const {
  Tape tape;
  tape.set_grad_enabled(false);
  ParamScope scope(tape, const_cast<ParameterStore&>(store));
  const auto probs = softmax(logits(scope, input), 1).value();
  const auto last = probs.row(probs.rows() - 1);
  return {last.begin(), last.end()};
}

LinearPlanner LinearPlanner::create(std::size_t goal_count, std::size_t value_dim, std::size_t output_size,
                                    std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LinearPlanner p;
  p.goal_count = goal_count;
  p.value_dim = value_dim;
  p.output_size = output_size;
  p.layer = Linear::create(p.store, "cls.linear", p.feature_dim(), output_size, rng);
  return p;
}

std::vector<double> LinearPlanner::features(std::size_t goal, std::span<const MemorySlot> slots) const {
  if (goal >= goal_count) throw ContractError("classifier: goal outside vocabulary");
  std::vector<double> f(feature_dim(), 0.0);
  f[goal] = 1.0;
  if (slots.empty()) return f;
  const double w = 1.0 / static_cast<double>(slots.size());
  for (const auto& s : slots) {
    if (s.value.size() != value_dim) throw DimensionError("classifier: memory value size mismatch");
    for (std::size_t i = 0; i < value_dim; ++i) f[goal_count + i] += w * s.value[i];
    if (s.next_action < output_size) f[goal_count + value_dim + s.next_action] += w;
  }
  return f;
}

Var LinearPlanner::logits(ParamScope& scope, const Tensor& features) const {
  return layer(scope, scope.tape().constant(features));
}

std::vector<double> LinearPlanner::scores(std::size_t goal, std::span<const MemorySlot> slots) const {
  Tape tape;
  tape.set_grad_enabled(false);
  ParamScope scope(tape, const_cast<ParameterStore&>(store));
  const auto f = features(goal, slots);
  const auto out = logits(scope, Tensor({1, f.size()}, f)).value();
  return {out.values().begin(), out.values().end()};
}

std::size_t LinearPlanner::predict(std::size_t goal, std::span<const MemorySlot> slots) const {
  return argmax(scores(goal, slots));
}

}  // namespace tamplan::plan
