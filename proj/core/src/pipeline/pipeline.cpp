#include "tamplan/pipeline/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "tamplan/common/errors.hpp"
#include "tamplan/common/hash.hpp"
#include "tamplan/common/rng.hpp"
#include "tamplan/grad/checkpoint.hpp"
#include "tamplan/sim/tasks.hpp"
#include "tamplan/sim/vocabulary.hpp"
#include "tamplan/tam/memory.hpp"

namespace tamplan::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Seed stream tags.
constexpr std::uint64_t kData = 0xDA7A, kTest = 0x7E57, kInit = 0x1417, kTrain = 0x7A1, kEval = 0xE7A1;

template <typename T>
T field(const json& j, const char* key, const T& fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::vector<std::string> mode_names(const std::vector<eval::EvalMode>& modes) {
  std::vector<std::string> out;
  for (auto m : modes) out.emplace_back(eval::to_string(m));
  return out;
}

std::vector<eval::EvalMode> parse_modes(const std::vector<std::string>& names) {
  std::vector<eval::EvalMode> out;
  for (const auto& n : names) {
    auto m = eval::parse_mode(n);
    if (!m) throw ConfigError("unknown evaluation mode: " + n);
    out.push_back(*m);
  }
  return out;
}

template <typename Cfg>
Cfg with_seed(Cfg cfg, std::uint64_t run_seed, std::uint64_t tag) {
  cfg.seed = derive_seed(run_seed, {kTrain, tag, cfg.seed});
  return cfg;
}

std::uint64_t init_seed(const RunConfig& c, std::uint64_t tag) { return derive_seed(c.seed, {kInit, tag}); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_curve(const fs::path& path, const std::vector<double>& curve) {
  std::ostringstream s;
  s << "step,loss\n" << std::setprecision(17);
  for (std::size_t i = 0; i < curve.size(); ++i) s << i << ',' << curve[i] << '\n';
  write_text(path, s.str());
}

sim::DatasetManifest read_manifest(const fs::path& dataset) {
  const auto mp = sim::manifest_path(dataset);
  if (!fs::exists(dataset)) throw IoError("dataset not found: '" + dataset.string() + "'");
  if (!fs::exists(mp)) throw IoError("dataset manifest not found: '" + mp.string() + "'");
  return read_json_file(mp).get<sim::DatasetManifest>();
}

/// TAM networks as loaded from their checkpoints.
struct TamBundle {
  tam::TamNetworks nets;
  tam::GoalAssociator naive_assoc;
};

TamBundle load_tam(const RunConfig& c) {
  const auto aff = tam::load_network(checkpoint_path(c, "affordance"), "affordance");
  const auto assoc = tam::load_network(checkpoint_path(c, "goal_association"), "goal_association");
  const auto naive = tam::load_network(checkpoint_path(c, "goal_association_naive"), "goal_association");
  const auto loc = tam::load_network(checkpoint_path(c, "localization"), "localization");
  return {{tam::load_affordance(aff), tam::load_goal_associator(assoc), tam::load_localization(loc),
           aff.dataset_sha256, assoc.dataset_sha256, loc.dataset_sha256},
          tam::load_goal_associator(naive)};
}

struct LoadedPlanner {
  grad::Checkpoint ck;
  std::string memory_sha256;
  std::string dataset_sha256;
};

LoadedPlanner load_planner_checkpoint(const RunConfig& c, const std::string& name, const std::string& kind) {
  const auto path = checkpoint_path(c, name);
  if (!fs::exists(path)) throw IoError("checkpoint not found: '" + path.string() + "'");
  LoadedPlanner p{grad::load_checkpoint(path), {}, {}};
  if (p.ck.metadata.value("kind", std::string()) != kind) {
    throw ProvenanceError("checkpoint '" + path.string() + "' is not a " + kind);
  }
  p.memory_sha256 = p.ck.metadata.value("memory_sha256", std::string());
  p.dataset_sha256 = p.ck.metadata.value("dataset_sha256", std::string());
  return p;
}

plan::ActionDecoder load_decoder(const LoadedPlanner& p) {
  auto d = plan::ActionDecoder::create(p.ck.metadata.at("config").get<plan::DecoderConfig>(), 0);
  grad::assign_parameters(d.store, p.ck.store);
  return d;
}

plan::LinearPlanner load_linear(const LoadedPlanner& p) {
  const auto& m = p.ck.metadata;
  auto l = plan::LinearPlanner::create(m.at("goal_count").get<std::size_t>(), m.at("value_dim").get<std::size_t>(),
                                       m.at("output_size").get<std::size_t>(), 0);
  grad::assign_parameters(l.store, p.ck.store);
  return l;
}

/// Planner variants; each decoder is trained against the retrieval it plans with.
struct DecoderVariant {
  const char* name;
  bool use_memory;
  bool use_goal;
  tam::LocalizeMetric metric;
  bool replan;
};

const std::vector<DecoderVariant>& decoder_variants() {
  static const std::vector<DecoderVariant> v{
      {"decoder_full", true, true, tam::LocalizeMetric::kLearned, true},
      {"decoder_goal_only", false, true, tam::LocalizeMetric::kLearned, false},
      {"decoder_naive", true, false, tam::LocalizeMetric::kLearned, true},
      {"decoder_pixel", true, true, tam::LocalizeMetric::kPixelCosine, true},
      {"decoder_wo_replan", true, true, tam::LocalizeMetric::kLearned, false},
  };
  return v;
}

}  // namespace

void to_json(json& j, const EvalSettings& s) {
  j = {{"episodes", s.episodes},
       {"modes", mode_names(s.modes)},
       {"attack_p", s.attack.p},
       {"attack_seed", s.attack.seed},
       {"noise_seed", s.noise_seed},
       {"lcs_counts_attacked", s.lcs_counts_attacked},
       {"ablation", s.ablation},
       {"traces", s.traces}};
}

void from_json(const json& j, EvalSettings& s) {
  EvalSettings d;
  s.episodes = field(j, "episodes", d.episodes);
  s.modes = j.contains("modes") ? parse_modes(j.at("modes").get<std::vector<std::string>>()) : d.modes;
  s.attack.p = field(j, "attack_p", d.attack.p);
  s.attack.seed = field(j, "attack_seed", d.attack.seed);
  s.noise_seed = field(j, "noise_seed", d.noise_seed);
  s.lcs_counts_attacked = field(j, "lcs_counts_attacked", d.lcs_counts_attacked);
  s.ablation = field(j, "ablation", d.ablation);
  s.traces = field(j, "traces", d.traces);
}

void RunConfig::validate() const {
  sim.validate();
  tam.validate();
  decoder.validate();
  retrieval.replan_config.validate();
  eval.attack.validate();
  if (retrieval.k != decoder.memory_slots) throw ConfigError("retrieval k must equal decoder memory_slots");
  if (decoder.value_dim != tam.proj_dim + tam.embed_dim) {
    throw ConfigError("decoder value_dim must equal proj_dim + embed_dim");
  }
  if (decoder.goal_count != tam.goal_count || tam.goal_count != sim::kGoalCount) {
    throw ConfigError("goal counts disagree with the goal vocabulary");
  }
  if (tam.feature_dim != sim::FeatureLayout::instance().size()) {
    throw ConfigError("tam feature_dim must equal the observation size");
  }
  if (eval.modes.empty()) throw ConfigError("no evaluation modes selected");
}

std::string RunConfig::hash() const {
  // Output locations do not change results.
  auto j = json(*this);
  j.erase("paths");
  return sha256_hex(j.dump());
}

void to_json(json& j, const RunConfig& c) {
  j = {{"seed", c.seed},
       {"paths",
        {{"dataset", c.paths.dataset.string()},
         {"checkpoints", c.paths.checkpoints.string()},
         {"memory", c.paths.memory.string()},
         {"reports", c.paths.reports.string()}}},
       {"sim", c.sim},
       {"demos_per_goal", c.demos_per_goal},
       {"test_seed", c.test_seed},
       {"tam", c.tam},
       {"affordance_train", c.affordance_train},
       {"assoc_train", c.assoc_train},
       {"localization_train", c.localization_train},
       {"decoder", c.decoder},
       {"decoder_train", c.decoder_train},
       {"retrieval", c.retrieval},
       {"eval", c.eval}};
}

void from_json(const json& j, RunConfig& c) {
  RunConfig d;
  c.seed = field(j, "seed", d.seed);
  c.paths = d.paths;
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    c.paths.dataset = field(p, "dataset", d.paths.dataset.string());
    c.paths.checkpoints = field(p, "checkpoints", d.paths.checkpoints.string());
    c.paths.memory = field(p, "memory", d.paths.memory.string());
    c.paths.reports = field(p, "reports", d.paths.reports.string());
  }
  c.sim = field(j, "sim", d.sim);
  c.demos_per_goal = field(j, "demos_per_goal", d.demos_per_goal);
  c.test_seed = field(j, "test_seed", d.test_seed);
  c.tam = field(j, "tam", d.tam);
  c.affordance_train = field(j, "affordance_train", d.affordance_train);
  c.assoc_train = field(j, "assoc_train", d.assoc_train);
  c.localization_train = field(j, "localization_train", d.localization_train);
  c.decoder = field(j, "decoder", d.decoder);
  c.decoder_train = field(j, "decoder_train", d.decoder_train);
  c.retrieval = field(j, "retrieval", d.retrieval);
  c.eval = field(j, "eval", d.eval);
}

void write_json_file(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

RunConfig load_run_config(const fs::path& path) {
  try {
    auto c = read_json_file(path).get<RunConfig>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError("bad run config '" + path.string() + "': " + e.what());
  }
}

sim::DemoSpec training_spec(const RunConfig& c) {
  return sim::DemoSpec::training(c.demos_per_goal, derive_seed(c.seed, {kData}), c.sim);
}

sim::DemoSpec test_spec(const RunConfig& c) {
  return sim::DemoSpec::test(c.eval.episodes, derive_seed(c.seed, {kTest, c.test_seed}), c.sim);
}

const std::vector<std::string>& checkpoint_names() {
  static const std::vector<std::string> names{
      "affordance",    "goal_association", "goal_association_naive", "localization",     "decoder_full",
      "decoder_goal_only", "decoder_naive", "decoder_pixel",         "decoder_wo_replan", "linear_planner"};
  return names;
}

fs::path checkpoint_path(const RunConfig& c, const std::string& name) { return c.paths.checkpoints / (name + ".ckpt"); }

sim::DatasetManifest cmd_gen_data(const RunConfig& c, std::ostream& log) {
  c.validate();
  const auto spec = training_spec(c);
  const auto set = sim::generate_demonstrations(spec);
  if (c.paths.dataset.has_parent_path()) fs::create_directories(c.paths.dataset.parent_path());
  auto manifest = sim::write_dataset(c.paths.dataset, set, spec);
  log << "wrote " << manifest.episodes << " demonstrations to " << c.paths.dataset.string() << " (sha256 "
      << manifest.dataset_sha256 << ")\n";
  return manifest;
}

TrainSummary cmd_train(const RunConfig& c, std::ostream& log) {
  c.validate();
  const auto loaded = sim::read_dataset(c.paths.dataset);
  const auto& demos = loaded.set.demos;
  const auto sha = loaded.manifest.dataset_sha256;
  if (demos.empty()) throw ConfigError("dataset '" + c.paths.dataset.string() + "' holds no demonstrations");
  fs::create_directories(c.paths.checkpoints);
  TrainSummary summary;
  summary.dataset_sha256 = sha;

  const auto split = tam::split_demonstrations(demos);
  const auto train = tam::StepTable::build(split.train);
  const auto held = tam::StepTable::build(split.held_out);
  const auto curve = [&](const std::string& name, const std::vector<double>& v) {
    write_curve(c.paths.checkpoints / (name + "_loss.csv"), v);
  };

  auto aff = tam::AffordanceNet::create(c.tam, init_seed(c, 1));
  auto r = tam::train_affordance(aff, train, held, with_seed(c.affordance_train, c.seed, 1));
  summary.metrics["affordance_centroid_accuracy"] = r.held_out_metric;
  curve("affordance", r.loss_curve);
  log << "affordance: nearest-centroid accuracy " << r.held_out_metric << "\n";

  auto assoc = tam::GoalAssociator::create(c.tam, init_seed(c, 2), true);
  r = tam::train_goal_association(assoc, aff, train, held, with_seed(c.assoc_train, c.seed, 2));
  summary.metrics["goal_association_accuracy"] = r.held_out_metric;
  curve("goal_association", r.loss_curve);
  log << "goal association: held-out pair accuracy " << r.held_out_metric << "\n";

  auto naive = tam::GoalAssociator::create(c.tam, init_seed(c, 2), false);
  r = tam::train_goal_association(naive, aff, train, held, with_seed(c.assoc_train, c.seed, 2));
  summary.metrics["goal_association_naive_accuracy"] = r.held_out_metric;
  curve("goal_association_naive", r.loss_curve);

  auto loc = tam::LocalizationNet::create(c.tam, init_seed(c, 3));
  r = tam::train_localization(loc, train, held, with_seed(c.localization_train, c.seed, 3));
  summary.metrics["localization_auc"] = r.held_out_metric;
  curve("localization", r.loss_curve);
  log << "localization: held-out adjacency AUC " << r.held_out_metric << "\n";

  tam::save_network(checkpoint_path(c, "affordance"), aff.store, c.tam, "affordance", sha);
  tam::save_network(checkpoint_path(c, "goal_association"), assoc.store, c.tam, "goal_association", sha,
                    {{"goal_conditioned", true}});
  tam::save_network(checkpoint_path(c, "goal_association_naive"), naive.store, c.tam, "goal_association", sha,
                    {{"goal_conditioned", false}});
  tam::save_network(checkpoint_path(c, "localization"), loc.store, c.tam, "localization", sha);

  // Decoders see the memory exactly as build-mem will write it.
  const tam::TamNetworks nets{aff, assoc, loc, sha, sha, sha};
  const auto graph = tam::build_memory(demos, sha, nets);
  summary.memory_sha256 = graph.content_hash();
  const tam::MemoryIndex learned(graph, &loc, tam::LocalizeMetric::kLearned);
  const tam::MemoryIndex pixel(graph, nullptr, tam::LocalizeMetric::kPixelCosine);

  std::uint64_t tag = 10;
  for (const auto& v : decoder_variants()) {
    auto dc = c.decoder;
    dc.use_memory = v.use_memory;
    dc.use_goal = v.use_goal;
    std::vector<plan::TeacherSequence> tr, ho;
    if (dc.use_memory) {
      auto retrieval = c.retrieval;
      retrieval.k = dc.memory_slots;
      retrieval.replan = retrieval.replan && v.replan;
      plan::MemoryReader reader(v.metric == tam::LocalizeMetric::kLearned ? learned : pixel,
                                v.use_goal ? &assoc : &naive, retrieval);
      tr = plan::build_teacher_sequences(split.train, reader, dc.value_dim);
      ho = plan::build_teacher_sequences(split.held_out, reader, dc.value_dim);
    } else {
      tr = plan::build_teacher_sequences(split.train, nullptr, dc.memory_slots, dc.value_dim);
      ho = plan::build_teacher_sequences(split.held_out, nullptr, dc.memory_slots, dc.value_dim);
    }
    auto dec = plan::ActionDecoder::create(dc, init_seed(c, tag));
    const auto rep = plan::train_decoder(dec, tr, ho, with_seed(c.decoder_train, c.seed, tag));
    ++tag;
    summary.metrics[std::string(v.name) + "_accuracy"] = rep.held_out_accuracy;
    curve(v.name, rep.loss_curve);
    log << v.name << ": held-out next-action accuracy " << rep.held_out_accuracy << "\n";
    grad::save_checkpoint(checkpoint_path(c, v.name), dec.store,
                          {{"kind", "decoder"},
                           {"config", dc},
                           {"localize", v.metric == tam::LocalizeMetric::kLearned ? "learned" : "pixel"},
                           {"dataset_sha256", sha},
                           {"memory_sha256", summary.memory_sha256}});
  }

  {
    plan::MemoryReader reader(learned, &assoc, c.retrieval);
    const auto tr = plan::build_teacher_sequences(split.train, reader, c.decoder.value_dim);
    const auto ho = plan::build_teacher_sequences(split.held_out, reader, c.decoder.value_dim);
    auto lin = plan::LinearPlanner::create(c.tam.goal_count, c.decoder.value_dim, c.decoder.output_size,
                                           init_seed(c, tag));
    const auto rep = plan::train_linear_planner(lin, tr, ho, with_seed(c.decoder_train, c.seed, tag));
    summary.metrics["linear_planner_accuracy"] = rep.held_out_accuracy;
    curve("linear_planner", rep.loss_curve);
    log << "linear planner: held-out next-action accuracy " << rep.held_out_accuracy << "\n";
    grad::save_checkpoint(checkpoint_path(c, "linear_planner"), lin.store,
                          {{"kind", "linear_planner"},
                           {"goal_count", lin.goal_count},
                           {"value_dim", lin.value_dim},
                           {"output_size", lin.output_size},
                           {"dataset_sha256", sha},
                           {"memory_sha256", summary.memory_sha256}});
  }

  for (const auto& name : checkpoint_names()) summary.checkpoints[name] = sha256_file(checkpoint_path(c, name));
  write_json_file(c.paths.checkpoints / "train_manifest.json", {{"dataset_sha256", sha},
                                                                 {"memory_sha256", summary.memory_sha256},
                                                                 {"checkpoints", summary.checkpoints},
                                                                 {"metrics", summary.metrics},
                                                                 {"config_sha256", c.hash()}});
  return summary;
}

std::string cmd_build_mem(const RunConfig& c, std::ostream& log) {
  c.validate();
  const auto loaded = sim::read_dataset(c.paths.dataset);
  const auto bundle = load_tam(c);
  const auto graph = tam::build_memory(loaded.set.demos, loaded.manifest.dataset_sha256, bundle.nets);
  if (c.paths.memory.has_parent_path()) fs::create_directories(c.paths.memory.parent_path());
  graph.save(c.paths.memory);
  const auto h = graph.content_hash();
  log << "wrote memory with " << graph.size() << " nodes to " << c.paths.memory.string() << " (sha256 " << h
      << ")\n";
  return h;
}

EvalSummary cmd_eval(const RunConfig& c, std::ostream& log) {
  c.validate();
  const auto manifest = read_manifest(c.paths.dataset);
  const auto& sha = manifest.dataset_sha256;
  if (!fs::exists(c.paths.memory)) throw IoError("memory not found: '" + c.paths.memory.string() + "'");
  const auto graph = tam::TamGraph::load(c.paths.memory);
  const auto memory_sha = graph.content_hash();
  const auto bundle = load_tam(c);
  const auto& prov = graph.provenance();

  // Lineage: every artifact must descend from the same dataset and memory.
  if (prov.dataset_sha256 != sha) throw ProvenanceError("memory was built from a different dataset");
  for (const auto& h : {bundle.nets.affordance_dataset, bundle.nets.goal_dataset, bundle.nets.localization_dataset}) {
    if (h != sha) throw ProvenanceError("a TAM checkpoint was trained on a different dataset");
  }
  if (prov.affordance_sha256 != bundle.nets.affordance.store.content_hash() ||
      prov.goal_association_sha256 != bundle.nets.goal_association.store.content_hash() ||
      prov.localization_sha256 != bundle.nets.localization.store.content_hash()) {
    throw ProvenanceError("memory was built with different TAM checkpoints");
  }
  if (prov.vocabulary != sim::ActionVocabulary::instance().fingerprint()) {
    throw ProvenanceError("memory uses a different action vocabulary");
  }
  std::map<std::string, LoadedPlanner> planners;
  for (const auto& v : decoder_variants()) planners.emplace(v.name, load_planner_checkpoint(c, v.name, "decoder"));
  planners.emplace("linear_planner", load_planner_checkpoint(c, "linear_planner", "linear_planner"));
  for (const auto& [name, p] : planners) {
    if (p.dataset_sha256 != sha || p.memory_sha256 != memory_sha) {
      throw ProvenanceError("checkpoint '" + name + "' was trained against a different dataset or memory");
    }
  }

  const auto full = load_decoder(planners.at("decoder_full"));
  const auto goal_only = load_decoder(planners.at("decoder_goal_only"));
  const auto naive = load_decoder(planners.at("decoder_naive"));
  const auto pixel_dec = load_decoder(planners.at("decoder_pixel"));
  const auto wo_replan = load_decoder(planners.at("decoder_wo_replan"));
  const auto linear = load_linear(planners.at("linear_planner"));
  const tam::MemoryIndex learned(graph, &bundle.nets.localization, tam::LocalizeMetric::kLearned);
  const tam::MemoryIndex pixel(graph, nullptr, tam::LocalizeMetric::kPixelCosine);

  auto no_replan = c.retrieval;
  no_replan.replan = false;
  plan::DecoderPolicy p_full(full, &learned, &bundle.nets.goal_association, c.retrieval);
  plan::DecoderPolicy p_goal(goal_only, nullptr, nullptr);
  plan::DecoderPolicy p_norep(wo_replan, &learned, &bundle.nets.goal_association, no_replan);
  plan::DecoderPolicy p_pixel(pixel_dec, &pixel, &bundle.nets.goal_association, c.retrieval);
  plan::LinearPolicy p_linear(linear, learned, &bundle.nets.goal_association, c.retrieval);
  plan::DecoderPolicy p_naive(naive, &learned, &bundle.naive_assoc, c.retrieval);

  const auto test = sim::generate_demonstrations(test_spec(c)).demos;
  eval::EvalOptions base;
  base.attack = c.eval.attack;
  base.sim = c.sim;
  base.seed = derive_seed(c.seed, {kEval, c.eval.noise_seed});
  base.lcs_counts_attacked = c.eval.lcs_counts_attacked;

  std::map<std::string, std::string> lineage{{"dataset", sha}, {"memory", memory_sha}, {"config", c.hash()}};
  for (const auto& name : checkpoint_names()) lineage["checkpoint:" + name] = sha256_file(checkpoint_path(c, name));

  fs::create_directories(c.paths.reports);
  EvalSummary summary;
  for (const auto& [method, policy] : {std::pair<std::string, plan::Policy*>{"tam_transformer", &p_full},
                                       std::pair<std::string, plan::Policy*>{"goal_only_transformer", &p_goal}}) {
    for (auto mode : c.eval.modes) {
      auto options = base;
      options.mode = mode;
      std::vector<plan::Plan> plans;
      auto report = eval::run_evaluation(*policy, test, options, &plans);
      report.lineage = lineage;
      const auto stem = method + "_" + std::string(eval::to_string(mode));
      write_json_file(c.paths.reports / (stem + ".json"), report);
      if (c.eval.traces) {
        std::ostringstream trace;
        for (std::size_t i = 0; i < plans.size(); ++i) plan::write_trace(trace, plans[i], test[i].episode_id);
        write_text(c.paths.reports / (stem + "_trace.jsonl"), trace.str());
      }
      log << stem << ": lcs " << report.mean.lcs << " f1 " << report.mean.f1 << "\n";
      summary.reports.emplace_back(method, std::move(report));
    }
  }
  {
    std::ostringstream csv;
    csv << "method,mode";
    for (const auto& col : eval::EvalReport::csv_columns()) csv << ',' << col;
    csv << '\n' << std::fixed << std::setprecision(6);
    for (const auto& [method, r] : summary.reports) {
      csv << method << ',' << eval::to_string(r.mode);
      for (double v : r.csv_values()) csv << ',' << v;
      csv << '\n';
    }
    write_text(c.paths.reports / "results.csv", csv.str());
  }

  if (c.eval.ablation) {
    const std::vector<eval::NamedPolicy> variants{{"full", &p_full},
                                                  {"wo_replan", &p_norep},
                                                  {"pixel_localize", &p_pixel},
                                                  {"wo_trans", &p_linear},
                                                  {"naive_goal", &p_naive}};
    std::vector<eval::EvalMode> modes;
    for (auto m : c.eval.modes) {
      if (eval::is_interactive(m)) modes.push_back(m);
    }
    if (!modes.empty()) {
      summary.ablation = eval::run_ablation_suite(variants, test, base, modes);
      json rows = json::array();
      for (auto& row : summary.ablation.rows) {
        row.report.lineage = lineage;
        rows.push_back({{"variant", row.variant}, {"report", row.report}});
      }
      write_json_file(c.paths.reports / "ablation.json", rows);
      write_text(c.paths.reports / "ablation.csv", summary.ablation.to_csv());
      for (const auto& row : summary.ablation.rows) {
        log << "ablation " << eval::to_string(row.report.mode) << " " << row.variant << ": lcs "
            << row.report.mean.lcs << "\n";
      }
    }
  }
  return summary;
}

std::size_t cmd_export_embeddings(const fs::path& memory, const fs::path& out) {
  if (!fs::exists(memory)) throw IoError("memory not found: '" + memory.string() + "'");
  const auto graph = tam::TamGraph::load(memory);
  const auto& vocab = sim::ActionVocabulary::instance();
  std::ostringstream csv;
  csv << "node_id,goal,action,room,episode,step";
  for (std::size_t i = 0; i < graph.key_dim(); ++i) csv << ",key_" << i;
  for (std::size_t i = 0; i < graph.value_dim(); ++i) csv << ",value_" << i;
  csv << '\n' << std::setprecision(17);
  for (const auto& n : graph.nodes()) {
    csv << n.id << ',' << sim::goal(n.goal).text << ',' << vocab.token_text(n.action) << ',' << sim::name(n.room)
        << ',' << n.episode << ',' << n.step;
    for (double x : n.key) csv << ',' << x;
    for (double x : n.v) csv << ',' << x;
    csv << '\n';
  }
  write_text(out, csv.str());
  return graph.size();
}

}  // namespace tamplan::pipeline
