#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tamplan/sim/dataset.hpp"
#include "tamplan/tam/networks.hpp"

namespace tamplan::tam {

/// One demonstration step. `key` is the localization embedding of the step's
/// end frame; `z` and `v` are the affordance and goal-association values.
struct TamNode {
  std::size_t id = 0;
  std::vector<double> key;
  std::vector<double> z;
  std::vector<double> v;
  std::vector<double> frame;      // raw end frame (pixel-style localization)
  std::size_t action = 0;         // token of this step
  std::size_t next_action = 0;    // token of the following step, STOP at the end
  std::size_t goal = 0;
  std::size_t episode = 0;        // episode_id of the source demonstration
  std::size_t step = 0;
  sim::Room room = sim::Room::kKitchen;  // agent room after the step
};

struct MemoryProvenance {
  std::string dataset_sha256;
  std::string affordance_sha256;
  std::string goal_association_sha256;
  std::string localization_sha256;
  std::string vocabulary;

  bool operator==(const MemoryProvenance&) const = default;
};

void to_json(nlohmann::json& j, const MemoryProvenance& p);
void from_json(const nlohmann::json& j, MemoryProvenance& p);

class TamGraph {
 public:
  TamGraph() = default;
  TamGraph(std::vector<TamNode> nodes, MemoryProvenance provenance);

  const std::vector<TamNode>& nodes() const { return nodes_; }
  const TamNode& node(std::size_t i) const { return nodes_.at(i); }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  const std::vector<std::size_t>& by_goal(std::size_t goal) const;
  const std::vector<std::size_t>& by_action(std::size_t action) const;
  const MemoryProvenance& provenance() const { return provenance_; }
  std::size_t key_dim() const { return nodes_.empty() ? 0 : nodes_.front().key.size(); }
  std::size_t value_dim() const { return nodes_.empty() ? 0 : nodes_.front().v.size(); }

  /// SHA-256 of the serialized graph.
  std::string content_hash() const;

  void save(const std::filesystem::path& path) const;
  static TamGraph load(const std::filesystem::path& path);
  std::string serialize() const;
  static TamGraph deserialize(const std::string& bytes);

 private:
  void index();

  std::vector<TamNode> nodes_;
  MemoryProvenance provenance_;
  std::vector<std::vector<std::size_t>> goal_index_;
  std::vector<std::vector<std::size_t>> action_index_;
};

struct TamNetworks {
  AffordanceNet affordance;
  GoalAssociator goal_association;
  LocalizationNet localization;
  /// Dataset each network was trained on.
  std::string affordance_dataset, goal_dataset, localization_dataset;
};

/// One node per step. Throws ProvenanceError when a network was trained on
/// a different dataset than `dataset_sha256`.
TamGraph build_memory(std::span<const sim::Demonstration> demos, const std::string& dataset_sha256,
                      const TamNetworks& nets);

/// How a query frame is compared with memory.
enum class LocalizeMetric { kLearned, kPixelCosine };

/// Scores every node against a query; higher is closer.
class MemoryIndex {
 public:
  MemoryIndex(const TamGraph& graph, const LocalizationNet* net, LocalizeMetric metric = LocalizeMetric::kLearned);

  const TamGraph& graph() const { return *graph_; }
  LocalizeMetric metric() const { return metric_; }

  /// Query representation of a frame: E(frame) or the frame itself.
  std::vector<double> query_of_frame(std::span<const double> frame) const;
  /// Query representation of a stored node.
  std::span<const double> query_of_node(std::size_t node) const;

  std::vector<double> scores(std::span<const double> query) const;
  double score(std::span<const double> query, std::size_t node) const;

  /// argmax score; ties go to the lowest index. Throws ContractError on an empty graph.
  std::size_t localize(std::span<const double> query, std::optional<std::size_t> exclude_episode = {}) const;
  /// Top-k by score (descending, ties by index). k above the node count
  /// returns every node and bumps `warnings`.
  std::vector<std::size_t> retrieve(std::span<const double> query, std::size_t k,
                                    std::optional<std::size_t> exclude_episode = {}) const;

  mutable std::size_t warnings = 0;

 private:
  const TamGraph* graph_;
  LocalizeMetric metric_;
  const LocalizationNet* net_;
  LocalizationNet::Head head_;
  std::vector<double> frame_norms_;
};

/// P_sigma between two stored nodes.
double goal_association_score(const GoalAssociator& net, const TamNode& a, const TamNode& b, std::size_t goal);

}  // namespace tamplan::tam
