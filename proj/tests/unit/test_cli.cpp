#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "tamplan/common/hash.hpp"
#include "tamplan/pipeline/pipeline.hpp"
#include "tamplan/sim/tasks.hpp"
#include "tamplan/tam/memory.hpp"

using namespace tamplan;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "tamplan_test_cli";

int run(const std::string& args, std::string* output = nullptr) {
  const auto log = kRoot / "last_command.log";
  const std::string cmd = std::string(TAMPLAN_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (output) {
    std::ifstream in(log);
    std::stringstream s;
    s << in.rdbuf();
    *output = s.str();
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Small enough to train in seconds.
pipeline::RunConfig tiny(const fs::path& dir) {
  pipeline::RunConfig c;
  c.seed = 5;
  c.paths = {dir / "data/train.jsonl", dir / "ckpt", dir / "memory.tam", dir / "reports"};
  c.demos_per_goal = 4;
  c.affordance_train.steps = 60;
  c.affordance_train.classes_per_batch = 6;
  c.assoc_train.steps = 80;
  c.assoc_train.batch = 32;
  c.localization_train.steps = 60;
  c.localization_train.batch = 16;
  c.decoder_train.epochs = 6;
  c.eval.episodes = 4;
  return c;
}

struct Fixture {
  Fixture() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
  }
};

}  // namespace

TEST_CASE_FIXTURE(Fixture, "default data generation covers four spawn rooms per goal and is reproducible") {
  pipeline::RunConfig c;
  c.paths.dataset = kRoot / "a/train.jsonl";
  std::ostringstream log;
  const auto m1 = pipeline::cmd_gen_data(c, log);
  CHECK(m1.episodes == 8 * c.demos_per_goal);
  CHECK(m1.spawn_rooms_per_template.size() == sim::kGoalCount);
  for (const auto& [goal, rooms] : m1.spawn_rooms_per_template) CHECK(rooms.size() == 4);
  c.paths.dataset = kRoot / "b/train.jsonl";
  const auto m2 = pipeline::cmd_gen_data(c, log);
  CHECK(m1.dataset_sha256 == m2.dataset_sha256);
  CHECK(slurp(kRoot / "a/train.jsonl") == slurp(kRoot / "b/train.jsonl"));
}

TEST_CASE_FIXTURE(Fixture, "zero episodes give an empty dataset with a valid manifest") {
  const auto path = kRoot / "empty.jsonl";
  CHECK(run("gen-data --episodes 0 --dataset " + path.string()) == 0);
  const auto m = pipeline::read_json_file(sim::manifest_path(path)).get<sim::DatasetManifest>();
  CHECK(m.episodes == 0);
  CHECK(m.dataset_sha256 == sha256_file(path));
}

TEST_CASE_FIXTURE(Fixture, "usage and missing inputs exit with code 1") {
  std::string out;
  CHECK(run("", &out) == 1);
  CHECK(run("frobnicate", &out) == 1);
  const auto missing = kRoot / "nowhere/train.jsonl";
  CHECK(run("train --dataset " + missing.string(), &out) == 1);
  CHECK(out.find(missing.string()) != std::string::npos);
  std::ofstream(kRoot / "bad.json") << "{ not json";
  CHECK(run("gen-data --config " + (kRoot / "bad.json").string(), &out) == 1);
  CHECK(run("eval --attack-p 2 --dataset " + missing.string(), &out) == 1);
}

TEST_CASE_FIXTURE(Fixture, "emitted config materializes every default and reloads unchanged") {
  const auto cfg = kRoot / "run.json";
  CHECK(run("gen-data --episodes 0 --dataset " + (kRoot / "d.jsonl").string() + " --emit-config " + cfg.string()) ==
        0);
  const auto j = pipeline::read_json_file(cfg);
  for (const char* key : {"seed", "paths", "sim", "tam", "decoder", "decoder_train", "retrieval", "eval"}) {
    CHECK(j.contains(key));
  }
  const auto c = pipeline::load_run_config(cfg);
  CHECK(nlohmann::json(c) == j);
}

TEST_CASE_FIXTURE(Fixture, "full command pipeline at toy scale") {
  const auto dir = kRoot / "run";
  const auto c = tiny(dir);
  const auto cfg = kRoot / "tiny.json";
  pipeline::write_json_file(cfg, c);
  const std::string base = " --config " + cfg.string();
  std::string out;

  REQUIRE(run("gen-data" + base, &out) == 0);
  REQUIRE(run("train" + base, &out) == 0);
  REQUIRE(run("build-mem" + base, &out) == 0);

  for (const auto& name : pipeline::checkpoint_names()) CHECK(fs::exists(pipeline::checkpoint_path(c, name)));
  const auto manifest = pipeline::read_json_file(c.paths.checkpoints / "train_manifest.json");
  const auto graph = tam::TamGraph::load(c.paths.memory);
  CHECK(manifest.at("memory_sha256") == graph.content_hash());

  SUBCASE("loss curves improve") {
    for (const auto& name : {"affordance", "goal_association", "localization", "decoder_full", "linear_planner"}) {
      std::ifstream in(c.paths.checkpoints / (std::string(name) + "_loss.csv"));
      std::string line;
      std::getline(in, line);
      std::vector<double> v;
      while (std::getline(in, line)) v.push_back(std::stod(line.substr(line.find(',') + 1)));
      REQUIRE(v.size() > 1);
      INFO(name);
      CHECK(v.back() < v.front());
    }
  }

  SUBCASE("evaluation over every mode writes four reports per method") {
    REQUIRE(run("eval --mode all" + base, &out) == 0);
    for (const auto& method : {"tam_transformer", "goal_only_transformer"}) {
      for (auto m : eval::all_modes()) {
        const auto p = c.paths.reports / (std::string(method) + "_" + std::string(eval::to_string(m)) + ".json");
        CHECK(fs::exists(p));
      }
    }
    const auto ablation = slurp(c.paths.reports / "ablation.csv");
    CHECK(std::count(ablation.begin(), ablation.end(), '\n') == 1 + 5 * 2);
    const auto first = slurp(c.paths.reports / "results.csv");
    REQUIRE(run("eval --mode all" + base, &out) == 0);
    CHECK(slurp(c.paths.reports / "results.csv") == first);

    const auto report = pipeline::read_json_file(c.paths.reports / "tam_transformer_vis_interactive.json");
    CHECK(report.at("lineage").at("memory") == graph.content_hash());
    CHECK(report.at("mean").at("executability") == 1.0);
  }

  SUBCASE("single mode") {
    REQUIRE(run("eval --mode vis_static --no-ablation" + base, &out) == 0);
    CHECK(fs::exists(c.paths.reports / "tam_transformer_vis_static.json"));
    CHECK_FALSE(fs::exists(c.paths.reports / "tam_transformer_pure_text.json"));
    CHECK(run("eval --mode sideways" + base, &out) == 1);
  }

  SUBCASE("embedding export") {
    const auto csv = kRoot / "emb.csv";
    REQUIRE(run("export-embeddings --out " + csv.string() + base, &out) == 0);
    std::ifstream in(csv);
    std::string header, line;
    std::getline(in, header);
    const auto columns = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
    CHECK(columns == 6 + 2 * c.tam.embed_dim);
    std::map<std::string, std::size_t> per_goal;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      ++rows;
      std::size_t a = line.find(','), b = line.find(',', a + 1);
      ++per_goal[line.substr(a + 1, b - a - 1)];
    }
    CHECK(rows == graph.size());
    // Node labels agree with the dataset they came from.
    const auto data = sim::read_dataset(c.paths.dataset);
    std::map<std::string, std::size_t> steps;
    for (const auto& d : data.set.demos) steps[sim::goal(d.goal_id).text] += d.steps.size();
    CHECK(per_goal == steps);
    for (const auto& [g, n] : data.manifest.goal_counts) CHECK(per_goal.count(g) == 1);
  }

  SUBCASE("mismatched lineage is refused with code 2") {
    auto other = c;
    other.seed = 6;
    other.paths.dataset = dir / "data/other.jsonl";
    std::ostringstream log;
    pipeline::cmd_gen_data(other, log);
    CHECK(run("eval --dataset " + other.paths.dataset.string() + base, &out) == 2);
    // A memory rebuilt from foreign checkpoints is refused too.
    fs::copy_file(c.paths.checkpoints / "localization.ckpt", kRoot / "loc.bak");
    auto swapped = c;
    swapped.seed = 99;
    swapped.paths.checkpoints = dir / "ckpt2";
    pipeline::cmd_train(swapped, log);
    fs::copy_file(swapped.paths.checkpoints / "localization.ckpt", c.paths.checkpoints / "localization.ckpt",
                  fs::copy_options::overwrite_existing);
    CHECK(run("eval" + base, &out) == 2);
  }

  SUBCASE("retraining reproduces checkpoints byte for byte") {
    auto again = c;
    again.paths.checkpoints = dir / "ckpt_again";
    std::ostringstream log;
    const auto s = pipeline::cmd_train(again, log);
    for (const auto& [name, hash] : s.checkpoints) {
      INFO(name);
      CHECK(hash == sha256_file(pipeline::checkpoint_path(c, name)));
    }
  }
}
