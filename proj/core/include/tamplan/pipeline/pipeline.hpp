#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tamplan/eval/harness.hpp"
#include "tamplan/plan/decoder.hpp"
#include "tamplan/plan/planner.hpp"
#include "tamplan/sim/apartment.hpp"
#include "tamplan/sim/dataset.hpp"
#include "tamplan/tam/networks.hpp"
#include "tamplan/tam/training.hpp"

namespace tamplan::pipeline {

struct RunPaths {
  std::filesystem::path dataset = "run/data/train.jsonl";
  std::filesystem::path checkpoints = "run/checkpoints";
  std::filesystem::path memory = "run/memory.tam";
  std::filesystem::path reports = "run/reports";
};

struct EvalSettings {
  std::size_t episodes = 50;
  std::vector<eval::EvalMode> modes = eval::all_modes();
  eval::AttackConfig attack;
  std::uint64_t noise_seed = 0;
  bool lcs_counts_attacked = false;
  bool ablation = true;
  bool traces = true;
};

void to_json(nlohmann::json& j, const EvalSettings& s);
void from_json(const nlohmann::json& j, EvalSettings& s);

/// Everything a run depends on. Component seeds are mixed with `seed`.
struct RunConfig {
  std::uint64_t seed = 1;
  RunPaths paths;
  sim::SimConfig sim;
  std::size_t demos_per_goal = 200;
  std::uint64_t test_seed = 0;
  tam::TamConfig tam;
  tam::AffordanceTrainConfig affordance_train;
  tam::AssocTrainConfig assoc_train;
  tam::LocalizationTrainConfig localization_train;
  plan::DecoderConfig decoder;
  plan::DecoderTrainConfig decoder_train;
  plan::RetrievalOptions retrieval;
  EvalSettings eval;

  void validate() const;
  /// SHA-256 of everything except `paths`.
  std::string hash() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_run_config(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

/// Training and test episode specs derived from the run seed.
sim::DemoSpec training_spec(const RunConfig& c);
sim::DemoSpec test_spec(const RunConfig& c);

sim::DatasetManifest cmd_gen_data(const RunConfig& c, std::ostream& log);

struct TrainSummary {
  std::string dataset_sha256;
  std::string memory_sha256;
  std::map<std::string, std::string> checkpoints;  // name -> file sha256
  std::map<std::string, double> metrics;
};

/// Trains the TAM networks, then (with their memory frozen) every planner variant.
TrainSummary cmd_train(const RunConfig& c, std::ostream& log);

/// Writes the memory built from the dataset and the TAM checkpoints.
std::string cmd_build_mem(const RunConfig& c, std::ostream& log);

struct EvalSummary {
  std::vector<std::pair<std::string, eval::EvalReport>> reports;  // (method, report)
  eval::AblationTable ablation;
};

/// Throws ProvenanceError when dataset, checkpoints and memory disagree.
EvalSummary cmd_eval(const RunConfig& c, std::ostream& log);

/// One CSV row per node; returns the row count.
std::size_t cmd_export_embeddings(const std::filesystem::path& memory, const std::filesystem::path& out);

/// Names of the checkpoints written by cmd_train.
const std::vector<std::string>& checkpoint_names();
std::filesystem::path checkpoint_path(const RunConfig& c, const std::string& name);

}  // namespace tamplan::pipeline
