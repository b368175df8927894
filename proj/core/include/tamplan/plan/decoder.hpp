#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "tamplan/grad/layers.hpp"
#include "tamplan/grad/parameter.hpp"

namespace tamplan::plan {

/// Retrieved memory entry as seen by the decoder.
struct MemorySlot {
  std::vector<double> value;      // z ⊕ v_a
  std::size_t next_action = 0;    // token that followed the stored step
};

struct DecoderConfig {
  std::size_t model_dim = 64;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t ffn_dim = 128;
  std::size_t max_length = 24;   // goal + history positions
  std::size_t memory_slots = 5;  // k
  std::size_t value_dim = 128;   // size of MemorySlot::value
  std::size_t goal_count = 8;
  std::size_t vocab_size = 82;   // input tokens incl. STOP and PAD
  std::size_t output_size = 81;  // predicted tokens: actions + STOP
  bool use_memory = true;
  bool use_goal = true;
  /// Adds an embedding of the slot's next_action to the projected value.
  bool memory_next_action = true;
  bool dropout = false;          // accepted for completeness; inference and training run without it

  void validate() const;
};

void to_json(nlohmann::json& j, const DecoderConfig& c);
void from_json(const nlohmann::json& j, DecoderConfig& c);

struct DecoderInput {
  std::size_t goal = 0;
  std::span<const std::size_t> history;
  /// One block of `memory_slots` entries per position (history.size() + 1);
  /// ignored when the model has no memory.
  std::span<const std::vector<MemorySlot>> memory;
};

/// Pre-norm transformer decoder. Position 0 holds the goal with a fixed
/// positional vector; position t+1 holds history token t with a sinusoidal
/// embedding of t+1. Each position cross-attends only to its own memory
/// block, and memory carries no positional signal.
class ActionDecoder {
 public:
  static ActionDecoder create(const DecoderConfig& config, std::uint64_t seed);

  /// (positions x output_size) logits. Throws ContractError when the
  /// history does not fit into max_length.
  grad::Var logits(grad::ParamScope& scope, const DecoderInput& input) const;
  /// Softmax distribution for the next token after the full history.
  std::vector<double> next_distribution(const DecoderInput& input) const;
  /// Per-position log-probabilities (positions x output_size), tape-free.
  grad::Tensor log_probs(const DecoderInput& input) const;

  grad::ParameterStore store;
  DecoderConfig config;

 private:
  struct Norm {
    std::size_t gain = 0, bias = 0;
  };
  struct Attention {
    grad::Linear q, k, v, o;
  };
  struct Block {
    Norm n1, n2, n3;
    Attention self;
    Attention cross;
    grad::Linear ff1, ff2;
  };

  grad::Var norm(grad::ParamScope& scope, const Norm& n, grad::Var x) const;
  grad::Var attend(grad::ParamScope& scope, const Attention& a, grad::Var queries, grad::Var keys,
                   const grad::Tensor& mask) const;

  std::size_t token_table_ = 0;
  std::size_t goal_table_ = 0;
  std::size_t next_table_ = 0;
  grad::Linear memory_proj_;
  std::vector<Block> blocks_;
  Norm final_norm_;
  grad::Linear out_;
};

/// Sinusoidal embedding of a position (sin on even, cos on odd dims).
std::vector<double> sinusoid(std::size_t position, std::size_t dim);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);
/// Same, skipping `excluded`; falls back to the plain argmax when everything is excluded.
std::size_t argmax(std::span<const double> values, std::span<const std::size_t> excluded);

/// Ablation that replaces the decoder with one linear layer over
///   goal one-hot ⊕ mean slot value ⊕ mean one-hot(next_action).
class LinearPlanner {
 public:
  static LinearPlanner create(std::size_t goal_count, std::size_t value_dim, std::size_t output_size,
                              std::uint64_t seed);

  std::size_t feature_dim() const { return goal_count + value_dim + output_size; }
  std::vector<double> features(std::size_t goal, std::span<const MemorySlot> slots) const;
  grad::Var logits(grad::ParamScope& scope, const grad::Tensor& features) const;
  std::vector<double> scores(std::size_t goal, std::span<const MemorySlot> slots) const;
  std::size_t predict(std::size_t goal, std::span<const MemorySlot> slots) const;

  grad::ParameterStore store;
  std::size_t goal_count = 0;
  std::size_t value_dim = 0;
  std::size_t output_size = 0;
  grad::Linear layer;
};

}  // namespace tamplan::plan
