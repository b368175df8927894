#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "tamplan/grad/tensor.hpp"
#include "tamplan/sim/dataset.hpp"
#include "tamplan/tam/networks.hpp"

namespace tamplan::tam {

/// Flat per-step view of a demonstration set.
struct StepTable {
  grad::Tensor stacked;  // (n x 2F) [start | end]
  grad::Tensor ends;     // (n x F)
  grad::Tensor starts;   // (n x F)
  std::vector<std::size_t> action;
  std::vector<std::size_t> goal;
  std::vector<std::size_t> episode;  // demo index within the set
  std::vector<std::size_t> step;
  /// First row of each episode and its length.
  std::vector<std::size_t> episode_begin;
  std::vector<std::size_t> episode_length;
  std::vector<std::size_t> episode_goal;

  std::size_t size() const { return action.size(); }
  static StepTable build(std::span<const sim::Demonstration> demos);
};

/// Deterministic ~10% episode hold-out used for every "held-out" metric.
bool is_held_out(const sim::Demonstration& d);
struct Split {
  std::vector<sim::Demonstration> train;
  std::vector<sim::Demonstration> held_out;
};
Split split_demonstrations(std::span<const sim::Demonstration> demos);

struct TrainReport {
  std::vector<double> loss_curve;
  double held_out_metric = 0.0;
  std::size_t skipped_anchors = 0;
};

struct AffordanceTrainConfig {
  std::size_t steps = 500;
  std::size_t classes_per_batch = 16;
  std::size_t per_class = 4;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
};

struct AssocTrainConfig {
  std::size_t steps = 2000;
  std::size_t batch = 128;
  double learning_rate = 2e-3;
  std::uint64_t seed = 2;
};

struct LocalizationTrainConfig {
  std::size_t steps = 600;
  std::size_t batch = 64;
  double learning_rate = 1e-3;
  std::size_t min_separation = 3;  // Delta
  std::uint64_t seed = 3;
};

void to_json(nlohmann::json& j, const AffordanceTrainConfig& c);
void from_json(const nlohmann::json& j, AffordanceTrainConfig& c);
void to_json(nlohmann::json& j, const AssocTrainConfig& c);
void from_json(const nlohmann::json& j, AssocTrainConfig& c);
void to_json(nlohmann::json& j, const LocalizationTrainConfig& c);
void from_json(const nlohmann::json& j, LocalizationTrainConfig& c);

/// Held-out metric: nearest-centroid action accuracy in z-space.
TrainReport train_affordance(AffordanceNet& net, const StepTable& train, const StepTable& held_out,
                             const AffordanceTrainConfig& config);

/// Enc stays frozen. Held-out metric: pair accuracy at threshold 0.5.
/// Throws ConfigError when the data holds a single goal.
TrainReport train_goal_association(GoalAssociator& net, const AffordanceNet& encoder, const StepTable& train,
                                   const StepTable& held_out, const AssocTrainConfig& config);

/// Held-out metric: adjacency ROC-AUC. Throws ConfigError when Delta exceeds
/// every episode length.
TrainReport train_localization(LocalizationNet& net, const StepTable& train, const StepTable& held_out,
                               const LocalizationTrainConfig& config);

// ---- evaluation helpers -------------------------------------------------

double nearest_centroid_accuracy(const AffordanceNet& net, const StepTable& train, const StepTable& held_out);

struct CosineSeparation {
  double intra = 0.0;
  double inter = 0.0;
};
CosineSeparation cosine_separation(const AffordanceNet& net, const StepTable& table);

struct AssocPair {
  std::size_t i = 0, j = 0, goal = 0;
  double label = 0.0;
};
/// Balanced pairs: half positive (both steps from episodes of the queried
/// goal), half negative (queried goal differs from at least one episode goal).
std::vector<AssocPair> sample_assoc_pairs(const StepTable& table, std::size_t count, std::mt19937_64& rng);
double goal_association_accuracy(const GoalAssociator& net, const grad::Tensor& embeddings,
                                 std::span<const AssocPair> pairs);

struct FramePair {
  std::vector<double> a, b;
  double label = 0.0;
};
/// Positives (end_{t-1}, start_t); negatives at least Delta steps apart or
/// from different episodes.
std::vector<FramePair> sample_frame_pairs(const StepTable& table, std::size_t count, std::size_t min_separation,
                                          std::mt19937_64& rng);
std::vector<double> localization_scores(const LocalizationNet& net, std::span<const FramePair> pairs);

/// Mann-Whitney ROC-AUC; ties count one half.
double roc_auc(std::span<const double> scores, std::span<const double> labels);

}  // namespace tamplan::tam
