#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tamplan/eval/metrics.hpp"
#include "tamplan/plan/planner.hpp"
#include "tamplan/sim/apartment.hpp"
#include "tamplan/sim/dataset.hpp"

namespace tamplan::eval {

enum class EvalMode { kPureText, kVisStatic, kVisInteractive, kVisInteractiveAttack };

const std::vector<EvalMode>& all_modes();
std::string_view to_string(EvalMode mode);
std::optional<EvalMode> parse_mode(std::string_view text);
bool is_interactive(EvalMode mode);

struct AttackConfig {
  double p = 0.15;
  std::uint64_t seed = 0xA77AC;

  void validate() const;
};

struct EvalOptions {
  EvalMode mode = EvalMode::kVisInteractive;
  AttackConfig attack;
  sim::SimConfig sim;
  std::uint64_t seed = 0;  // observation noise
  /// Interactive LCS: count the executed (attacked) action instead of the prediction.
  bool lcs_counts_attacked = false;
};

void to_json(nlohmann::json& j, const EvalOptions& o);
void from_json(const nlohmann::json& j, EvalOptions& o);

/// Step budget for an episode whose expert plan has `expert_length` steps.
std::size_t step_budget(std::size_t expert_length);

struct Metrics {
  double lcs = 0.0;
  double executability = 0.0;
  double f1 = 0.0;
  double f1_state = 0.0;
  double f1_relation = 0.0;
};

struct EpisodeResult {
  std::size_t episode_id = 0;
  std::size_t goal = 0;
  Metrics metrics;
  std::size_t steps = 0;
  std::size_t replans = 0;
  std::size_t attacked = 0;
};

struct EvalReport {
  EvalMode mode = EvalMode::kVisInteractive;
  EvalOptions options;
  std::vector<EpisodeResult> episodes;  // sorted by episode id
  Metrics mean;
  std::map<std::string, std::string> lineage;  // input name -> sha256

  static const std::vector<std::string>& csv_columns();
  std::vector<double> csv_values() const;
};

void to_json(nlohmann::json& j, const EvalReport& r);

/// Live simulator; with an attack config the submitted action may be
/// swapped for a uniformly drawn executable one.
class InteractiveEnv : public plan::EpisodeInterface {
 public:
  InteractiveEnv(const sim::Demonstration& demo, const sim::SimConfig& sim, std::uint64_t noise_seed,
                 std::optional<AttackConfig> attack);
  const std::vector<double>* observation() const override { return &frame_; }
  plan::StepOutcome submit(const sim::Action& predicted) override;
  const sim::EnvironmentState& state() const { return state_; }

 private:
  sim::EnvironmentState state_;
  std::vector<double> frame_;
  double sigma_;
  std::mt19937_64 noise_;
  std::optional<AttackConfig> attack_;
  std::mt19937_64 attack_rng_;
};

/// Replays the recorded observations whatever the planner does; actions are
/// played on a shadow state only for scoring.
class StaticEnv : public plan::EpisodeInterface {
 public:
  StaticEnv(const sim::Demonstration& demo, const sim::SimConfig& sim, bool observations);
  const std::vector<double>* observation() const override;
  plan::StepOutcome submit(const sim::Action& predicted) override;
  bool closed_loop() const override { return false; }
  const sim::EnvironmentState& state() const { return state_; }

 private:
  const sim::Demonstration& demo_;
  sim::EnvironmentState state_;
  bool observations_;
  std::size_t t_ = 0;
};

EpisodeResult score_episode(const sim::Demonstration& demo, const plan::Plan& plan,
                            const sim::EnvironmentState& final_state, const EvalOptions& options);

/// Runs every episode in order; `plans` receives the traces when given.
EvalReport run_evaluation(plan::Policy& policy, std::span<const sim::Demonstration> episodes,
                          const EvalOptions& options, std::vector<plan::Plan>* plans = nullptr);

struct NamedPolicy {
  std::string name;
  plan::Policy* policy = nullptr;
};

struct AblationRow {
  std::string variant;
  EvalReport report;
};

struct AblationTable {
  std::vector<AblationRow> rows;  // grouped by mode, variants in input order
  std::string to_csv() const;
};

AblationTable run_ablation_suite(std::span<const NamedPolicy> variants, std::span<const sim::Demonstration> episodes,
                                 const EvalOptions& base,
                                 std::span<const EvalMode> modes = {});

std::string reports_csv(std::span<const EvalReport> reports);

}  // namespace tamplan::eval
