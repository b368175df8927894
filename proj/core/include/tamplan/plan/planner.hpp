#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tamplan/plan/decoder.hpp"
#include "tamplan/sim/dataset.hpp"
#include "tamplan/sim/dynamics.hpp"
#include "tamplan/tam/memory.hpp"
#include "tamplan/tam/replan.hpp"

namespace tamplan::plan {

std::vector<MemorySlot> slots_from_nodes(const tam::TamGraph& graph, std::span<const std::size_t> nodes);
/// Placeholder block for positions without an observation (pure-text mode).
std::vector<MemorySlot> empty_slots(std::size_t k, std::size_t value_dim);

/// Teacher-forcing view of one demonstration.
struct TeacherSequence {
  std::size_t goal = 0;
  std::size_t episode_id = 0;
  std::vector<std::size_t> targets;  // expert tokens followed by STOP
  std::vector<std::vector<MemorySlot>> memory;  // one block per position

  std::span<const std::size_t> history() const { return {targets.data(), targets.size() - 1}; }
};

/// Position t retrieves with the frame the agent sees before acting: the
/// initial frame, then each step's end frame. With leave_one_out the
/// demonstration's own episode is excluded from retrieval.
std::vector<TeacherSequence> build_teacher_sequences(std::span<const sim::Demonstration> demos,
                                                     const tam::MemoryIndex* index, std::size_t k,
                                                     std::size_t value_dim, bool leave_one_out = true);

struct DecoderTrainConfig {
  std::size_t epochs = 30;
  std::size_t batch = 16;
  double learning_rate = 1e-3;
  double max_grad_norm = 1.0;
  std::uint64_t seed = 4;
};

void to_json(nlohmann::json& j, const DecoderTrainConfig& c);
void from_json(const nlohmann::json& j, DecoderTrainConfig& c);

struct DecoderTrainReport {
  std::vector<double> loss_curve;  // one entry per update
  double held_out_accuracy = 0.0;
};

/// Token-level cross-entropy with teacher forcing.
DecoderTrainReport train_decoder(ActionDecoder& decoder, std::span<const TeacherSequence> train,
                                 std::span<const TeacherSequence> held_out, const DecoderTrainConfig& config);
double teacher_forced_accuracy(const ActionDecoder& decoder, std::span<const TeacherSequence> seqs);
/// Mean per-token cross-entropy.
double sequence_loss(const ActionDecoder& decoder, std::span<const TeacherSequence> seqs);

DecoderTrainReport train_linear_planner(LinearPlanner& planner, std::span<const TeacherSequence> train,
                                        std::span<const TeacherSequence> held_out, const DecoderTrainConfig& config);

// ---- closed-loop planning ----------------------------------------------

struct StepDecision {
  std::size_t token = 0;
  std::optional<std::size_t> localized;
  std::size_t replan_trials = 0;
  bool replanned = false;      // retrieval moved to a different node
  bool replan_failed = false;
  std::vector<std::size_t> retrieved;
};

struct StepOutcome;

class Policy {
 public:
  virtual ~Policy() = default;
  virtual void begin(std::size_t goal) = 0;
  /// `frame` is the latest observation, or null when the mode gives none.
  virtual StepDecision decide(const std::vector<double>* frame) = 0;
  /// Outcome of the last decision; only called in closed-loop episodes.
  virtual void feedback(const StepOutcome&) {}
};

struct RetrievalOptions {
  std::size_t k = 5;
  bool replan = true;
  tam::ReplanConfig replan_config;
  /// Replanning snaps within this many best localization candidates; 0 searches all nodes.
  std::size_t relocalize_pool = 0;
};

void to_json(nlohmann::json& j, const RetrievalOptions& o);
void from_json(const nlohmann::json& j, RetrievalOptions& o);

/// Localize, optionally replan against the previous node, retrieve k.
class MemoryReader {
 public:
  MemoryReader(const tam::MemoryIndex& index, const tam::GoalAssociator* assoc, RetrievalOptions options);

  void begin() { prev_.reset(); }
  /// Fills the retrieval fields of `decision` and returns the slots. Nodes of
  /// `exclude_episode` are never localized, snapped to or retrieved.
  std::vector<MemorySlot> read(std::size_t goal, std::span<const double> frame, StepDecision& decision,
                               std::optional<std::size_t> exclude_episode = {});

  const RetrievalOptions& options() const { return options_; }

 private:
  const tam::MemoryIndex& index_;
  const tam::GoalAssociator* assoc_;
  RetrievalOptions options_;
  std::optional<std::size_t> prev_;
};

/// Same, with memory read through `reader` so that training sees the
/// retrieval (replanning included) used when planning.
std::vector<TeacherSequence> build_teacher_sequences(std::span<const sim::Demonstration> demos, MemoryReader& reader,
                                                     std::size_t value_dim, bool leave_one_out = true);

/// Decoder-driven policy; memory is optional (goal-only baseline).
class DecoderPolicy : public Policy {
 public:
  DecoderPolicy(const ActionDecoder& decoder, const tam::MemoryIndex* index, const tam::GoalAssociator* assoc,
                RetrievalOptions options = {});
  void begin(std::size_t goal) override;
  StepDecision decide(const std::vector<double>* frame) override;
  /// A failed step is dropped from the context and its token is not proposed
  /// again until the state changes.
  void feedback(const StepOutcome& outcome) override;

 private:
  const ActionDecoder& decoder_;
  std::optional<MemoryReader> reader_;
  std::size_t goal_ = 0;
  std::vector<std::size_t> history_;
  std::vector<std::vector<MemorySlot>> memory_;
  std::vector<std::size_t> failed_;
};

class LinearPolicy : public Policy {
 public:
  LinearPolicy(const LinearPlanner& planner, const tam::MemoryIndex& index, const tam::GoalAssociator* assoc,
               RetrievalOptions options = {});
  void begin(std::size_t goal) override;
  StepDecision decide(const std::vector<double>* frame) override;
  void feedback(const StepOutcome& outcome) override;

 private:
  const LinearPlanner& planner_;
  MemoryReader reader_;
  std::size_t goal_ = 0;
  std::size_t value_dim_ = 0;
  std::size_t last_ = 0;
  std::vector<std::size_t> failed_;
};

/// Replays a fixed action list, then STOP.
class ReplayPolicy : public Policy {
 public:
  explicit ReplayPolicy(std::vector<sim::Action> actions) : actions_(std::move(actions)) {}
  void begin(std::size_t) override { next_ = 0; }
  StepDecision decide(const std::vector<double>*) override;

 private:
  std::vector<sim::Action> actions_;
  std::size_t next_ = 0;
};

struct StepOutcome {
  sim::Action executed;
  bool attacked = false;
  bool success = true;
  std::optional<sim::FailReason> failure;
};

/// What the planner acts on: a live simulator or a recorded episode.
class EpisodeInterface {
 public:
  virtual ~EpisodeInterface() = default;
  virtual const std::vector<double>* observation() const = 0;
  virtual StepOutcome submit(const sim::Action& predicted) = 0;
  /// False when outcomes do not reach the planner (recorded episodes).
  virtual bool closed_loop() const { return true; }
};

struct PlanStep {
  sim::Action predicted;
  StepOutcome outcome;
  StepDecision decision;
};

struct Plan {
  std::size_t goal = 0;
  std::vector<PlanStep> steps;
  bool stopped = false;  // STOP emitted before the step budget ran out
};

/// Greedy closed loop: observe, decide, submit, until STOP or max_steps.
Plan plan_episode(Policy& policy, std::size_t goal, EpisodeInterface& env, std::size_t max_steps);

nlohmann::json plan_step_json(const PlanStep& step);
void write_trace(std::ostream& out, const Plan& plan, std::size_t episode_id);

}  // namespace tamplan::plan
