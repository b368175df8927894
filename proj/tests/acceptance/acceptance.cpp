// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
// Usage: tamplan_acceptance [work_dir]
// Exit status is the number of failing criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "support/oracles.hpp"
#include "support/sim_fuzz.hpp"
#include "tamplan/common/hash.hpp"
#include "tamplan/eval/harness.hpp"
#include "tamplan/eval/metrics.hpp"
#include "tamplan/grad/grad_check.hpp"
#include "tamplan/grad/ops.hpp"
#include "tamplan/pipeline/pipeline.hpp"
#include "tamplan/plan/decoder.hpp"
#include "tamplan/sim/dataset.hpp"
#include "tamplan/sim/dynamics.hpp"
#include "tamplan/sim/snapshot.hpp"
#include "tamplan/tam/losses.hpp"
#include "tamplan/tam/memory.hpp"
#include "tamplan/tam/networks.hpp"
#include "tamplan/tam/replan.hpp"

using namespace tamplan;
namespace fs = std::filesystem;

namespace tol {
constexpr double kGradRelative = 1e-4;
constexpr double kGradEpsilon = 1e-5;
constexpr double kGradSeconds = 120.0;
constexpr double kInfoNceAbsolute = 1e-9;
constexpr double kLn7Absolute = 1e-6;
constexpr double kAuc = 0.85;
constexpr double kAssociation = 0.85;
constexpr double kCentroid = 0.80;
constexpr double kPipelineSeconds = 30.0 * 60.0;
constexpr double kTrendMargin = 0.05;
constexpr std::size_t kTrendEpisodes = 50;
constexpr std::size_t kFuzzPairs = 10000;
constexpr std::size_t kOraclePairs = 200;
}  // namespace tol

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::vector<double> uniform(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

std::vector<grad::Parameter*> params_of(grad::ParameterStore& store) {
  std::vector<grad::Parameter*> ps;
  for (auto& p : store.params()) ps.push_back(&p);
  return ps;
}

// ---------------------------------------------------------------------------

Verdict gradient_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  const tam::TamConfig cfg;
  grad::GradCheckOptions opt;
  opt.epsilon = tol::kGradEpsilon;
  opt.tolerance = tol::kGradRelative;
  opt.max_entries_per_parameter = 24;

  std::map<std::string, grad::GradCheckReport> reports;
  const std::size_t n = 6;
  std::vector<std::size_t> labels{0, 1, 0, 2, 1, 2};
  std::vector<std::size_t> goals{0, 3, 7, 1, 1, 5};
  std::vector<double> targets{1, 0, 1, 0, 0, 1};

  auto aff = tam::AffordanceNet::create(cfg, 1);
  const auto x = grad::Tensor::matrix(n, 2 * cfg.feature_dim, uniform(n * 2 * cfg.feature_dim, rng));
  const auto w = grad::Tensor::matrix(n, cfg.embed_dim, uniform(n * cfg.embed_dim, rng));
  reports["affordance"] = grad::grad_check(params_of(aff.store), [&](grad::Tape& t) {
    grad::ParamScope scope(t, aff.store);
    const auto out = aff.forward(scope, t.constant(x));
    return grad::add(tam::info_nce(out.z, labels, cfg.temperature).loss_sum, grad::dot(out.v, t.constant(w)));
  }, opt);

  auto assoc = tam::GoalAssociator::create(cfg, 2, true);
  const auto vi = grad::Tensor::matrix(n, cfg.embed_dim, uniform(n * cfg.embed_dim, rng));
  const auto vj = grad::Tensor::matrix(n, cfg.embed_dim, uniform(n * cfg.embed_dim, rng));
  reports["goal_discriminator"] = grad::grad_check(params_of(assoc.store), [&](grad::Tape& t) {
    grad::ParamScope scope(t, assoc.store);
    return grad::bce_with_logits(assoc.logits(scope, t.constant(vi), t.constant(vj), goals), targets);
  }, opt);

  auto loc = tam::LocalizationNet::create(cfg, 3);
  const auto f1 = grad::Tensor::matrix(n, cfg.feature_dim, uniform(n * cfg.feature_dim, rng));
  const auto f2 = grad::Tensor::matrix(n, cfg.feature_dim, uniform(n * cfg.feature_dim, rng));
  reports["siamese_localizer"] = grad::grad_check(params_of(loc.store), [&](grad::Tape& t) {
    grad::ParamScope scope(t, loc.store);
    const auto e1 = loc.branch(scope, t.constant(f1));
    const auto e2 = loc.branch(scope, t.constant(f2));
    return grad::bce_with_logits(loc.pair_logits(scope, e1, e2), targets);
  }, opt);

  const plan::DecoderConfig dc;
  auto dec = plan::ActionDecoder::create(dc, 4);
  const std::vector<std::size_t> seq{3, 17, 40, 80};
  std::vector<std::vector<plan::MemorySlot>> mem(seq.size());
  for (auto& block : mem) {
    for (std::size_t s = 0; s < dc.memory_slots; ++s) block.push_back({uniform(dc.value_dim, rng), rng() % 80});
  }
  reports["decoder"] = grad::grad_check(params_of(dec.store), [&](grad::Tape& t) {
    grad::ParamScope scope(t, dec.store);
    const std::span<const std::size_t> hist(seq.data(), seq.size() - 1);
    return grad::negate(grad::sum(grad::pick(grad::log_softmax(dec.logits(scope, {2, hist, mem})), seq)));
  }, opt);

  double worst = 0.0;
  std::string worst_name;
  std::size_t checked = 0;
  for (const auto& [name, r] : reports) {
    checked += r.checked;
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      worst_name = name + ":" + r.worst_parameter;
    }
  }
  const double secs = seconds_since(t0);
  return {worst < tol::kGradRelative && secs < tol::kGradSeconds,
          "max rel err " + fmt(worst, 3) + " (" + worst_name + ") over " + std::to_string(checked) +
              " entries in 4 architectures, " + fmt(secs, 3) + " s"};
}

Verdict info_nce_oracle() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 15;
    const auto z = testing::random_unit_rows(rng, n, 8);
    std::vector<std::size_t> labels(n);
    for (auto& l : labels) l = rng() % 4;
    std::vector<double> flat;
    for (const auto& r : z) flat.insert(flat.end(), r.begin(), r.end());
    grad::Tape tape;
    const auto r = tam::info_nce(tape.constant(grad::Tensor::matrix(n, 8, flat)), labels, 0.1);
    worst = std::max(worst, std::abs(r.loss_sum.value().item() - testing::info_nce_loop(z, labels, 0.1)));
  }
  const std::vector<std::size_t> labels{0, 0, 1, 1, 2, 2, 3, 3};
  std::vector<double> flat;
  for (int i = 0; i < 8; ++i) flat.insert(flat.end(), {0.6, 0.8});
  grad::Tape tape;
  const auto r = tam::info_nce(tape.constant(grad::Tensor::matrix(8, 2, flat)), labels, 0.1);
  const double ln7 = std::abs(r.loss_sum.value().item() / 8.0 - std::log(7.0));
  return {worst < tol::kInfoNceAbsolute && ln7 < tol::kLn7Absolute,
          "max |batched - loop| " + fmt(worst, 3) + " over 100 batches; |loss - ln 7| " + fmt(ln7, 3)};
}

Verdict metric_oracles() {
  std::mt19937_64 rng(303);
  std::size_t lcs_bad = 0, f1_bad = 0;
  for (std::size_t i = 0; i < tol::kOraclePairs; ++i) {
    std::vector<std::size_t> a(rng() % 9), b(rng() % 9);
    for (auto& v : a) v = rng() % 5;
    for (auto& v : b) v = rng() % 5;
    if (eval::lcs_normalized(a, b) != testing::lcs_normalized_oracle(a, b)) ++lcs_bad;
  }
  for (std::size_t i = 0; i < tol::kOraclePairs; ++i) {
    const auto p = testing::random_facts(rng, false), g = testing::random_facts(rng, false);
    const auto f = eval::graph_f1(p, g);
    if (f.f1 != testing::f1_oracle(p, g) ||
        f.f1_state != testing::f1_oracle(testing::only_kind(p, sim::FactKind::kState),
                                         testing::only_kind(g, sim::FactKind::kState)) ||
        f.f1_relation != testing::f1_oracle(testing::only_kind(p, sim::FactKind::kRelation),
                                            testing::only_kind(g, sim::FactKind::kRelation))) {
      ++f1_bad;
    }
  }
  return {lcs_bad == 0 && f1_bad == 0, std::to_string(lcs_bad) + " lcs and " + std::to_string(f1_bad) +
                                           " f1 mismatches over " + std::to_string(tol::kOraclePairs) + " pairs each"};
}

Verdict simulator_soundness(const pipeline::RunConfig& c) {
  std::mt19937_64 rng(404);
  const auto all = testing::every_action();
  std::size_t pairs = 0, violations = 0;
  while (pairs < tol::kFuzzPairs) {
    const auto s = testing::random_state(rng, c.sim);
    const auto exec = sim::executable_actions(s);
    for (int k = 0; k < 50 && pairs < tol::kFuzzPairs; ++k, ++pairs) {
      const auto& a = all[std::uniform_int_distribution<std::size_t>(0, all.size() - 1)(rng)];
      const bool ok = std::holds_alternative<sim::Transition>(sim::execute(s, a, 0.0, rng));
      if (ok != (std::find(exec.begin(), exec.end(), a) != exec.end())) ++violations;
    }
  }
  std::size_t demos = 0, replay_bad = 0;
  for (const auto& spec : {pipeline::training_spec(c), pipeline::test_spec(c)}) {
    for (const auto& d : sim::generate_demonstrations(spec).demos) {
      ++demos;
      const auto final_state = sim::replay(d, spec.sim);
      if (!final_state || sim::graph_snapshot(*final_state) != d.final_facts) ++replay_bad;
    }
  }
  return {violations == 0 && replay_bad == 0, std::to_string(violations) + " violations in " +
                                                  std::to_string(pairs) + " fuzz pairs; " +
                                                  std::to_string(replay_bad) + " of " + std::to_string(demos) +
                                                  " demonstrations fail to replay"};
}

/// Replays each test episode's expert actions.
class ExpertReplay : public plan::Policy {
 public:
  explicit ExpertReplay(const std::vector<sim::Demonstration>& demos) : demos_(demos) {}
  void begin(std::size_t) override {
    replay_.emplace(demos_.at(next_++).actions());
    replay_->begin(0);
  }
  plan::StepDecision decide(const std::vector<double>* frame) override { return replay_->decide(frame); }

 private:
  const std::vector<sim::Demonstration>& demos_;
  std::size_t next_ = 0;
  std::optional<plan::ReplayPolicy> replay_;
};

Verdict interactive_protocol(const pipeline::RunConfig& c, const pipeline::EvalSummary* desk) {
  const auto test = sim::generate_demonstrations(pipeline::test_spec(c)).demos;
  std::size_t imperfect = 0, not_executable = 0, reports = 0;
  for (auto mode : {eval::EvalMode::kVisInteractive, eval::EvalMode::kVisInteractiveAttack}) {
    ExpertReplay oracle(test);
    eval::EvalOptions opt;
    opt.mode = mode;
    opt.sim = c.sim;
    opt.attack = c.eval.attack;
    const auto r = eval::run_evaluation(oracle, test, opt);
    for (const auto& e : r.episodes) {
      if (e.metrics.executability != 1.0) ++not_executable;
      if (mode == eval::EvalMode::kVisInteractive && (e.metrics.lcs != 1.0 || e.metrics.f1 != 1.0)) ++imperfect;
    }
  }
  if (desk) {
    auto check = [&](const eval::EvalReport& r) {
      if (!eval::is_interactive(r.mode)) return;
      ++reports;
      for (const auto& e : r.episodes) {
        if (e.metrics.executability != 1.0) ++not_executable;
      }
    };
    for (const auto& [method, r] : desk->reports) check(r);
    for (const auto& row : desk->ablation.rows) check(row.report);
  }
  return {imperfect == 0 && not_executable == 0 && (desk == nullptr || reports > 0),
          std::to_string(imperfect) + " of " + std::to_string(test.size()) +
              " oracle episodes below LCS = F1 = 1; " + std::to_string(not_executable) +
              " interactive episodes with executability != 1 across oracle and " + std::to_string(reports) +
              " trained-planner reports"};
}

Verdict replan_behaviour(const pipeline::RunConfig& c, bool have_desk) {
  tam::ReplanConfig rc;
  rc.step_size = 0.1;
  const auto analytic = tam::replan_embedding({0.0}, [](auto x) { return x[0] >= 0.1 ? 1.0 : 0.0; },
                                              [](auto) { return std::vector<double>{-3.0}; }, rc);
  const bool sign_ok = analytic.success && analytic.trials == 1 && analytic.embedding[0] == 0.1;
  const auto passing = tam::replan_embedding({0.4, -0.7}, [](auto) { return 1.0; },
                                             [](auto x) { return std::vector<double>(x.size(), 1.0); }, rc);
  const bool pass_ok = passing.trials == 0 && passing.embedding == std::vector<double>{0.4, -0.7};

  std::size_t over_budget = 0, moved = 0, calls = 0;
  if (have_desk) {
    const auto graph = tam::TamGraph::load(c.paths.memory);
    const auto assoc = tam::load_goal_associator(
        tam::load_network(pipeline::checkpoint_path(c, "goal_association"), "goal_association"));
    tam::ReplanConfig node_rc = c.retrieval.replan_config;
    std::mt19937_64 rng(808);
    for (int i = 0; i < 200; ++i, ++calls) {
      const std::size_t t = rng() % graph.size(), prev = rng() % graph.size(), goal = rng() % 8;
      const auto out = tam::replan(t, prev, goal, graph, assoc, node_rc);
      if (std::visit([](const auto& r) { return r.trials; }, out) > node_rc.max_trials) ++over_budget;
    }
    tam::ReplanConfig lenient = node_rc;
    lenient.threshold = 1e-300;
    for (int i = 0; i < 50; ++i, ++calls) {
      const std::size_t t = rng() % graph.size();
      const auto out = tam::replan(t, (t + 1) % graph.size(), graph.node(t).goal, graph, assoc, lenient);
      const auto* ok = std::get_if<tam::ReplanResult>(&out);
      if (!ok || ok->node != t || ok->trials != 0) ++moved;
    }
  }
  return {sign_ok && pass_ok && over_budget == 0 && moved == 0,
          std::string("0.0 -> ") + fmt(analytic.embedding[0], 17) + " in " + std::to_string(analytic.trials) +
              " trial; passing score " + std::to_string(passing.trials) + " trials; " +
              std::to_string(over_budget) + " over budget and " + std::to_string(moved) +
              " passing nodes altered in " + std::to_string(calls) + " calls on the trained memory"};
}

// ---------------------------------------------------------------------------

pipeline::RunConfig configure(const fs::path& dir, pipeline::RunConfig c = {}) {
  c.paths = {dir / "data/train.jsonl", dir / "checkpoints", dir / "memory.tam", dir / "reports"};
  return c;
}

struct DeskRun {
  pipeline::TrainSummary train;
  pipeline::EvalSummary eval;
  double seconds = 0.0;
  std::string error;
};

DeskRun run_pipeline(const pipeline::RunConfig& c, std::ostream& log) {
  DeskRun r;
  const auto t0 = Clock::now();
  try {
    pipeline::cmd_gen_data(c, log);
    r.train = pipeline::cmd_train(c, log);
    pipeline::cmd_build_mem(c, log);
    r.eval = pipeline::cmd_eval(c, log);
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.seconds = seconds_since(t0);
  return r;
}

Verdict learning_sanity(const DeskRun& d) {
  if (!d.error.empty()) return {false, "pipeline failed: " + d.error};
  const auto& m = d.train.metrics;
  const double auc = m.at("localization_auc"), acc = m.at("goal_association_accuracy"),
               cen = m.at("affordance_centroid_accuracy");
  return {auc >= tol::kAuc && acc >= tol::kAssociation && cen >= tol::kCentroid && d.seconds <= tol::kPipelineSeconds,
          "localization AUC " + fmt(auc) + ", association " + fmt(acc) + ", centroid " + fmt(cen) +
              ", train+eval " + fmt(d.seconds / 60.0, 3) + " min"};
}

Verdict trend_reproduction(const DeskRun& d) {
  if (!d.error.empty()) return {false, "pipeline failed: " + d.error};
  using eval::EvalMode;
  std::map<std::pair<std::string, EvalMode>, double> lcs;
  std::size_t episodes = 0;
  for (const auto& [method, r] : d.eval.reports) {
    lcs[{method == "tam_transformer" ? "full" : "goal_only", r.mode}] = r.mean.lcs;
    episodes = r.episodes.size();
  }
  for (const auto& row : d.eval.ablation.rows) {
    if (row.variant != "full") lcs[{row.variant, row.report.mode}] = row.report.mean.lcs;
  }
  auto at = [&](const std::string& m, EvalMode mode) { return lcs.at({m, mode}); };
  const double margin = tol::kTrendMargin;

  const double a = at("full", EvalMode::kVisInteractive) - at("goal_only", EvalMode::kVisInteractive);
  const double b = at("full", EvalMode::kVisInteractiveAttack) - at("wo_replan", EvalMode::kVisInteractiveAttack);
  double c_gap = 1.0;
  for (auto mode : {EvalMode::kVisInteractive, EvalMode::kVisInteractiveAttack}) {
    for (const auto& row : d.eval.ablation.rows) {
      if (row.report.mode == mode && row.variant != "naive_goal") {
        c_gap = std::min(c_gap, row.report.mean.lcs - at("naive_goal", mode));
      }
    }
  }
  double d_gap = 1.0;
  std::string d_worst;
  for (const auto& m : {"full", "goal_only"}) {
    const double g = at(m, EvalMode::kVisStatic) - at(m, EvalMode::kVisInteractiveAttack);
    if (g < d_gap) {
      d_gap = g;
      d_worst = m;
    }
  }
  const bool pa = a >= margin, pb = b >= margin, pc = c_gap >= margin, pd = d_gap >= margin;
  auto mark = [](bool ok) { return ok ? "ok" : "MISS"; };
  return {pa && pb && pc && pd && episodes == tol::kTrendEpisodes,
          "(a) full - goal_only interactive " + fmt(a, 3) + " " + mark(pa) + "; (b) full - wo_replan attack " +
              fmt(b, 3) + " " + mark(pb) + "; (c) naive gap " + fmt(c_gap, 3) + " " + mark(pc) +
              "; (d) min static - attack " + fmt(d_gap, 3) + " (" + d_worst + ") " + mark(pd) + "; " +
              std::to_string(episodes) + " episodes"};
}

std::map<std::string, std::string> tree_hashes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = sha256_file(e.path());
  }
  return out;
}

/// Reduced-scale configuration, run twice in separate directories.
Verdict determinism(const fs::path& work) {
  pipeline::RunConfig base;
  base.demos_per_goal = 12;
  base.affordance_train.steps = 150;
  base.assoc_train.steps = 150;
  base.localization_train.steps = 150;
  base.decoder_train.epochs = 3;
  base.eval.episodes = 8;
  std::ostringstream log;
  std::vector<std::map<std::string, std::string>> trees;
  for (const char* name : {"det_a", "det_b"}) {
    const auto dir = work / name;
    fs::remove_all(dir);
    const auto r = run_pipeline(configure(dir, base), log);
    if (!r.error.empty()) return {false, "pipeline failed: " + r.error};
    trees.push_back(tree_hashes(dir));
  }
  std::size_t differing = 0;
  std::string first;
  for (const auto& [file, hash] : trees[0]) {
    const auto it = trees[1].find(file);
    if (it == trees[1].end() || it->second != hash) {
      if (differing++ == 0) first = file;
    }
  }
  differing += trees[1].size() > trees[0].size() ? trees[1].size() - trees[0].size() : 0;
  return {differing == 0 && trees[0].size() > 10,
          std::to_string(trees[0].size()) + " files compared, " + std::to_string(differing) + " differ" +
              (first.empty() ? "" : " (first: " + first + ")")};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "tamplan_acceptance";
  fs::create_directories(work);
  const auto desk_cfg = configure(work / "desk");
  fs::remove_all(work / "desk");

  int failures = 0;
  auto report = [&](int id, const char* name, const Verdict& v) {
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << id << " " << name << ": " << v.detail << std::endl;
    if (!v.pass) ++failures;
  };

  report(1, "gradient correctness", gradient_correctness());
  report(2, "contrastive loss oracle", info_nce_oracle());
  report(3, "metric oracles", metric_oracles());
  report(4, "simulator soundness", simulator_soundness(desk_cfg));

  std::ostringstream desk_log;
  const auto desk = run_pipeline(desk_cfg, desk_log);
  {
    std::ofstream(work / "desk.log") << desk_log.str();
  }
  report(5, "learning sanity", learning_sanity(desk));
  report(6, "interactive protocol", interactive_protocol(desk_cfg, desk.error.empty() ? &desk.eval : nullptr));
  report(7, "trend reproduction", trend_reproduction(desk));
  report(8, "replan behaviour", replan_behaviour(desk_cfg, desk.error.empty()));
  report(9, "determinism", determinism(work));

  std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria fail") << std::endl;
  return failures;
}
