#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "tamplan/common/errors.hpp"
#include "tamplan/pipeline/pipeline.hpp"

namespace {

using namespace tamplan;

enum Exit { kOk = 0, kUsage = 1, kProvenance = 2 };

struct Overrides {
  std::string config;
  std::string emit_config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> episodes;
  std::string dataset, checkpoints, memory, reports;
  std::string mode;
  std::optional<double> attack_p;
  bool ablation = false;
  bool no_ablation = false;
  bool lcs_counts_attacked = false;
  std::string out;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Run config (JSON); defaults are used for missing fields");
  cmd->add_option("--emit-config", o.emit_config, "Write the fully materialized config here");
  cmd->add_option("--seed", o.seed, "Global seed");
  cmd->add_option("--dataset", o.dataset, "Dataset path");
  cmd->add_option("--checkpoints", o.checkpoints, "Checkpoint directory");
  cmd->add_option("--memory", o.memory, "Memory file");
  cmd->add_option("--reports", o.reports, "Report directory");
}

pipeline::RunConfig resolve(const Overrides& o, const std::string& command) {
  auto c = o.config.empty() ? pipeline::RunConfig{} : pipeline::load_run_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (!o.dataset.empty()) c.paths.dataset = o.dataset;
  if (!o.checkpoints.empty()) c.paths.checkpoints = o.checkpoints;
  if (!o.memory.empty()) c.paths.memory = o.memory;
  if (!o.reports.empty()) c.paths.reports = o.reports;
  if (o.episodes) (command == "gen-data" ? c.demos_per_goal : c.eval.episodes) = *o.episodes;
  if (!o.mode.empty() && o.mode != "all") {
    const auto m = eval::parse_mode(o.mode);
    if (!m) throw ConfigError("unknown --mode '" + o.mode + "'");
    c.eval.modes = {*m};
  } else if (o.mode == "all") {
    c.eval.modes = eval::all_modes();
  }
  if (o.attack_p) c.eval.attack.p = *o.attack_p;
  if (o.ablation) c.eval.ablation = true;
  if (o.no_ablation) c.eval.ablation = false;
  if (o.lcs_counts_attacked) c.eval.lcs_counts_attacked = true;
  c.validate();
  if (!o.emit_config.empty()) pipeline::write_json_file(o.emit_config, c);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planning from demonstrations with task-aware memory"};
  app.require_subcommand(1);
  Overrides o;

  auto* gen = app.add_subcommand("gen-data", "Generate the demonstration dataset and its manifest");
  add_common(gen, o);
  gen->add_option("--episodes", o.episodes, "Demonstrations per goal");

  auto* train = app.add_subcommand("train", "Train the memory networks and the planners");
  add_common(train, o);

  auto* mem = app.add_subcommand("build-mem", "Build the memory from the dataset and trained networks");
  add_common(mem, o);

  auto* ev = app.add_subcommand("eval", "Evaluate planners and write reports");
  add_common(ev, o);
  ev->add_option("--mode", o.mode, "pure_text, vis_static, vis_interactive, vis_interactive_attack or all");
  ev->add_option("--attack-p", o.attack_p, "Per-step attack probability")->check(CLI::Range(0.0, 1.0));
  ev->add_option("--episodes", o.episodes, "Number of test episodes");
  ev->add_flag("--ablation", o.ablation, "Run the ablation suite (on by default)");
  ev->add_flag("--no-ablation", o.no_ablation, "Skip the ablation suite");
  ev->add_flag("--lcs-counts-attacked", o.lcs_counts_attacked,
               "Interactive LCS counts the executed attacked action instead of the prediction");

  auto* exp = app.add_subcommand("export-embeddings", "Export memory node embeddings and labels as CSV");
  add_common(exp, o);
  exp->add_option("--out", o.out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) {
      pipeline::cmd_gen_data(resolve(o, "gen-data"), std::cerr);
    } else if (train->parsed()) {
      pipeline::cmd_train(resolve(o, "train"), std::cerr);
    } else if (mem->parsed()) {
      pipeline::cmd_build_mem(resolve(o, "build-mem"), std::cerr);
    } else if (ev->parsed()) {
      pipeline::cmd_eval(resolve(o, "eval"), std::cerr);
    } else if (exp->parsed()) {
      const auto c = resolve(o, "export-embeddings");
      const auto rows = pipeline::cmd_export_embeddings(c.paths.memory, o.out);
      std::cerr << "exported " << rows << " nodes to " << o.out << "\n";
    }
  } catch (const ProvenanceError& e) {
    std::cerr << "provenance error: " << e.what() << "\n";
    return kProvenance;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kOk;
}
