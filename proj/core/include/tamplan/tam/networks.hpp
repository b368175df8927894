#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tamplan/grad/layers.hpp"
#include "tamplan/grad/parameter.hpp"

namespace tamplan::tam {

struct TamConfig {
  std::size_t feature_dim = 130;  // one frame
  std::size_t embed_dim = 64;     // D, size of v_a
  std::size_t enc_hidden = 128;
  std::size_t proj_dim = 64;      // size of z
  double temperature = 0.1;
  std::size_t goal_count = 8;
  std::size_t goal_embed_dim = 16;
  std::size_t assoc_hidden = 64;
  std::size_t loc_hidden = 128;
  std::size_t key_dim = 64;

  void validate() const;
};

void to_json(nlohmann::json& j, const TamConfig& c);
void from_json(const nlohmann::json& j, TamConfig& c);

/// Enc (MLP over stacked start/end frames) followed by the projection head P_mu.
class AffordanceNet {
 public:
  static AffordanceNet create(const TamConfig& config, std::uint64_t seed);

  struct Out {
    grad::Var v;  // (n x D)
    grad::Var z;  // (n x proj_dim), unit rows
  };
  /// x: (n x 2F) rows of [start | end].
  Out forward(grad::ParamScope& scope, grad::Var x) const;
  /// Tape-free batch inference.
  std::pair<grad::Tensor, grad::Tensor> embed(const grad::Tensor& x) const;
  grad::Var encode(grad::ParamScope& scope, grad::Var x) const;

  grad::ParameterStore store;
  TamConfig config;
  grad::Mlp enc;
  grad::Mlp proj;
};

/// P_sigma: discriminator over (v_i, v_j, goal). With goal conditioning off
/// it is the goal-blind ablation and ignores the goal argument.
class GoalAssociator {
 public:
  static GoalAssociator create(const TamConfig& config, std::uint64_t seed, bool goal_conditioned = true);

  /// vi, vj: (n x D); returns logits (n x 1).
  grad::Var logits(grad::ParamScope& scope, grad::Var vi, grad::Var vj, std::span<const std::size_t> goals) const;
  /// Probability in [0, 1]; throws ContractError for goals outside the vocabulary.
  double score(std::span<const double> vi, std::span<const double> vj, std::size_t goal) const;

  grad::ParameterStore store;
  TamConfig config;
  bool goal_conditioned = true;
  std::size_t goal_table = 0;
  grad::Mlp mlp;
};

/// Siamese localizer: shared branch E over single frames and a symmetric head
///   p(f1, f2) = sigmoid(a - c * sum_d exp(u_d) (E(f1)_d - E(f2)_d)^2).
class LocalizationNet {
 public:
  static LocalizationNet create(const TamConfig& config, std::uint64_t seed);

  grad::Var branch(grad::ParamScope& scope, grad::Var frames) const;
  grad::Var pair_logits(grad::ParamScope& scope, grad::Var e1, grad::Var e2) const;

  grad::Tensor embed(const grad::Tensor& frames) const;
  std::vector<double> embed_one(std::span<const double> frame) const;

  /// Head on precomputed branch outputs; exactly symmetric in its arguments.
  double score_embeddings(std::span<const double> e1, std::span<const double> e2) const;
  double score(std::span<const double> f1, std::span<const double> f2) const;

  /// Cached head parameters for fast scans: exp(u), a, c.
  struct Head {
    std::vector<double> weight;
    double bias = 0.0;
    double scale = 0.0;
    double logit(std::span<const double> e1, std::span<const double> e2) const;
  };
  Head head() const;

  grad::ParameterStore store;
  TamConfig config;
  grad::Mlp branch_mlp;
  std::size_t u = 0, a = 0, c = 0;
};

/// Checkpoint helpers; metadata records the config and the dataset hash the
/// weights were trained on.
void save_network(const std::filesystem::path& path, const grad::ParameterStore& store, const TamConfig& config,
                  const std::string& kind, const std::string& dataset_sha256, const nlohmann::json& extra = {});

struct LoadedNetwork {
  grad::ParameterStore store;
  TamConfig config;
  std::string kind;
  std::string dataset_sha256;
  nlohmann::json extra;
};
LoadedNetwork load_network(const std::filesystem::path& path, const std::string& expected_kind);

AffordanceNet load_affordance(const LoadedNetwork& n);
GoalAssociator load_goal_associator(const LoadedNetwork& n);
LocalizationNet load_localization(const LoadedNetwork& n);

}  // namespace tamplan::tam
