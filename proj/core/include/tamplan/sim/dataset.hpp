#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tamplan/sim/apartment.hpp"
#include "tamplan/sim/observation.hpp"
#include "tamplan/sim/snapshot.hpp"
#include "tamplan/sim/tasks.hpp"

namespace tamplan::sim {

struct DemoStep {
  Observation observation;
  Action action;
};

struct Demonstration {
  std::size_t episode_id = 0;
  std::size_t goal_id = 0;
  std::uint64_t apartment_seed = 0;
  Room spawn_room = Room::kKitchen;
  std::vector<double> initial_frame;  // noisy frame before the first action
  std::vector<DemoStep> steps;
  FactSet final_facts;

  std::vector<Action> actions() const;
};

/// Recreates the state the expert started from.
EnvironmentState initial_state(const Demonstration& demo, const SimConfig& config);

/// Replays the recorded actions; nullopt if any step fails.
std::optional<EnvironmentState> replay(const Demonstration& demo, const SimConfig& config);

struct DemoSpec {
  std::vector<std::size_t> goal_ids;  // episode i pursues goal_ids[i % size]
  std::size_t n_episodes = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> apartment_seeds;
  /// Cycle through apartment_seeds instead of drawing them at random.
  bool round_robin = false;
  SimConfig sim;
  /// Resampling budget per episode before giving up with ConfigError.
  std::size_t max_resamples = 64;
  /// Expert plans outside [min_steps, max_steps] are resampled.
  std::size_t min_steps = 2;
  std::size_t max_steps = 9;

  static DemoSpec training(std::size_t demos_per_goal, std::uint64_t seed, const SimConfig& sim = {});
  static DemoSpec test(std::size_t n_episodes, std::uint64_t seed, const SimConfig& sim = {});
};

void to_json(nlohmann::json& j, const DemoSpec& s);
void from_json(const nlohmann::json& j, DemoSpec& s);

struct DemoSet {
  std::vector<Demonstration> demos;
  std::size_t resampled = 0;  // episodes redrawn because the goal was trivial or infeasible
};

DemoSet generate_demonstrations(const DemoSpec& spec);

struct DatasetManifest {
  int format_version = 1;
  std::string dataset_sha256;
  std::size_t episodes = 0;
  std::size_t resampled = 0;
  std::size_t feature_dim = 0;
  nlohmann::json spec;
  std::map<std::string, std::size_t> goal_counts;
  std::map<std::string, std::vector<std::string>> spawn_rooms_per_template;
};

void to_json(nlohmann::json& j, const DatasetManifest& m);
void from_json(const nlohmann::json& j, DatasetManifest& m);

std::filesystem::path manifest_path(const std::filesystem::path& dataset);

/// Writes the JSON-lines dataset and its manifest next to it.
DatasetManifest write_dataset(const std::filesystem::path& path, const DemoSet& set, const DemoSpec& spec);

struct LoadedDataset {
  DemoSet set;
  DatasetManifest manifest;
  DemoSpec spec;
};

/// Throws IoError on unreadable files and ProvenanceError when the file
/// hash disagrees with the manifest.
LoadedDataset read_dataset(const std::filesystem::path& path);

nlohmann::json demo_to_json(const Demonstration& d);
Demonstration demo_from_json(const nlohmann::json& j);

}  // namespace tamplan::sim
