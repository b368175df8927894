#include "tamplan/eval/harness.hpp"

#include <algorithm>
#include <sstream>

#include "tamplan/common/errors.hpp"
#include "tamplan/common/rng.hpp"
#include "tamplan/sim/dynamics.hpp"
#include "tamplan/sim/tasks.hpp"
#include "tamplan/sim/vocabulary.hpp"

namespace tamplan::eval {

const std::vector<EvalMode>& all_modes() {
  static const std::vector<EvalMode> modes{EvalMode::kPureText, EvalMode::kVisStatic, EvalMode::kVisInteractive,
                                           EvalMode::kVisInteractiveAttack};
  return modes;
}

std::string_view to_string(EvalMode mode) {
  switch (mode) {
    case EvalMode::kPureText: return "pure_text";
    case EvalMode::kVisStatic: return "vis_static";
    case EvalMode::kVisInteractive: return "vis_interactive";
    case EvalMode::kVisInteractiveAttack: return "vis_interactive_attack";
  }
  return "?";
}

std::optional<EvalMode> parse_mode(std::string_view text) {
  for (auto m : all_modes()) {
    if (to_string(m) == text) return m;
  }
  return std::nullopt;
}

bool is_interactive(EvalMode mode) {
  return mode == EvalMode::kVisInteractive || mode == EvalMode::kVisInteractiveAttack;
}

void AttackConfig::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("attack probability must lie in [0, 1]");
}

void to_json(nlohmann::json& j, const EvalOptions& o) {
  j = {{"mode", to_string(o.mode)},
       {"attack_p", o.attack.p},
       {"attack_seed", o.attack.seed},
       {"sim", o.sim},
       {"seed", o.seed},
       {"lcs_counts_attacked", o.lcs_counts_attacked}};
}

void from_json(const nlohmann::json& j, EvalOptions& o) {
  EvalOptions d;
  const auto mode = parse_mode(j.value("mode", std::string(to_string(d.mode))));
  if (!mode) throw ConfigError("unknown evaluation mode: " + j.value("mode", std::string()));
  o.mode = *mode;
  o.attack.p = j.value("attack_p", d.attack.p);
  o.attack.seed = j.value("attack_seed", d.attack.seed);
  o.sim = j.contains("sim") ? j.at("sim").get<sim::SimConfig>() : d.sim;
  o.seed = j.value("seed", d.seed);
  o.lcs_counts_attacked = j.value("lcs_counts_attacked", d.lcs_counts_attacked);
  o.attack.validate();
}

std::size_t step_budget(std::size_t expert_length) { return 2 * expert_length + 4; }

const std::vector<std::string>& EvalReport::csv_columns() {
  static const std::vector<std::string> cols{"lcs", "executability", "f1", "f1_state", "f1_relation"};
  return cols;
}

std::vector<double> EvalReport::csv_values() const {
  return {mean.lcs, mean.executability, mean.f1, mean.f1_state, mean.f1_relation};
}

namespace {

nlohmann::json metrics_json(const Metrics& m) {
  return {{"lcs", m.lcs},
          {"executability", m.executability},
          {"f1", m.f1},
          {"f1_state", m.f1_state},
          {"f1_relation", m.f1_relation}};
}

}  // namespace

void to_json(nlohmann::json& j, const EvalReport& r) {
  auto eps = nlohmann::json::array();
  for (const auto& e : r.episodes) {
    auto row = metrics_json(e.metrics);
    row["episode_id"] = e.episode_id;
    row["goal"] = sim::goal(e.goal).text;
    row["steps"] = e.steps;
    row["replans"] = e.replans;
    row["attacked"] = e.attacked;
    eps.push_back(std::move(row));
  }
  j = {{"mode", to_string(r.mode)}, {"options", r.options}, {"mean", metrics_json(r.mean)},
       {"episodes", std::move(eps)}, {"lineage", r.lineage}};
}

InteractiveEnv::InteractiveEnv(const sim::Demonstration& demo, const sim::SimConfig& sim, std::uint64_t noise_seed,
                               std::optional<AttackConfig> attack)
    : state_(sim::initial_state(demo, sim)),
      frame_(demo.initial_frame),
      sigma_(sim.noise_sigma),
      noise_(make_rng(noise_seed, {demo.episode_id, 0x0B5})),
      attack_(attack),
      attack_rng_(make_rng(attack ? attack->seed : 0, {demo.episode_id, 0xA77})) {
  if (attack_) attack_->validate();
}

plan::StepOutcome InteractiveEnv::submit(const sim::Action& predicted) {
  plan::StepOutcome out;
  out.executed = predicted;
  if (attack_ && bernoulli(attack_rng_, attack_->p)) {
    const auto options = sim::executable_actions(state_);
    if (!options.empty()) {
      out.executed = options[uniform_index(attack_rng_, options.size())];
      out.attacked = true;
    }
  }
  auto result = sim::execute(state_, out.executed, sigma_, noise_);
  if (auto* t = std::get_if<sim::Transition>(&result)) {
    state_ = std::move(t->state);
    frame_ = std::move(t->observation.end_features);
  } else {
    out.success = false;
    out.failure = std::get<sim::NotExecutable>(result).reason;
  }
  return out;
}

StaticEnv::StaticEnv(const sim::Demonstration& demo, const sim::SimConfig& sim, bool observations)
    : demo_(demo), state_(sim::initial_state(demo, sim)), observations_(observations) {}

const std::vector<double>* StaticEnv::observation() const {
  if (!observations_) return nullptr;
  if (t_ == 0 || demo_.steps.empty()) return &demo_.initial_frame;
  return &demo_.steps[std::min(t_, demo_.steps.size()) - 1].observation.end_features;
}

plan::StepOutcome StaticEnv::submit(const sim::Action& predicted) {
  plan::StepOutcome out;
  out.executed = predicted;
  out.failure = sim::apply(state_, predicted);
  out.success = !out.failure;
  ++t_;
  return out;
}

EpisodeResult score_episode(const sim::Demonstration& demo, const plan::Plan& plan,
                            const sim::EnvironmentState& final_state, const EvalOptions& options) {
  const auto& vocab = sim::ActionVocabulary::instance();
  EpisodeResult r;
  r.episode_id = demo.episode_id;
  r.goal = demo.goal_id;
  r.steps = plan.steps.size();
  std::vector<std::size_t> gt;
  for (const auto& s : demo.steps) gt.push_back(vocab.encode(s.action));
  std::vector<std::size_t> pred;
  const bool interactive = is_interactive(options.mode);
  for (const auto& s : plan.steps) {
    r.replans += s.decision.replanned;
    r.attacked += s.outcome.attacked;
    if (!interactive) {
      pred.push_back(vocab.encode(s.predicted));
    } else if (s.outcome.success) {
      pred.push_back(vocab.encode(s.outcome.attacked && options.lcs_counts_attacked ? s.outcome.executed : s.predicted));
    }
  }
  r.metrics.lcs = lcs_normalized(pred, gt);
  if (interactive) {
    r.metrics.executability = 1.0;
  } else {
    std::vector<sim::Action> actions;
    for (const auto& s : plan.steps) actions.push_back(s.predicted);
    r.metrics.executability = executability(actions, sim::initial_state(demo, options.sim));
  }
  const auto f = graph_f1(sim::graph_snapshot(final_state), demo.final_facts);
  r.metrics.f1 = f.f1;
  r.metrics.f1_state = f.f1_state;
  r.metrics.f1_relation = f.f1_relation;
  return r;
}

EvalReport run_evaluation(plan::Policy& policy, std::span<const sim::Demonstration> episodes,
                          const EvalOptions& options, std::vector<plan::Plan>* plans) {
  options.attack.validate();
  EvalReport report;
  report.mode = options.mode;
  report.options = options;
  for (const auto& demo : episodes) {
    const auto budget = step_budget(demo.steps.size());
    plan::Plan plan;
    sim::EnvironmentState final_state;
    if (is_interactive(options.mode)) {
      std::optional<AttackConfig> attack;
      if (options.mode == EvalMode::kVisInteractiveAttack) attack = options.attack;
      InteractiveEnv env(demo, options.sim, options.seed, attack);
      plan = plan::plan_episode(policy, demo.goal_id, env, budget);
      final_state = env.state();
    } else {
      StaticEnv env(demo, options.sim, options.mode == EvalMode::kVisStatic);
      plan = plan::plan_episode(policy, demo.goal_id, env, budget);
      final_state = env.state();
    }
    report.episodes.push_back(score_episode(demo, plan, final_state, options));
    if (plans) plans->push_back(std::move(plan));
  }
  std::stable_sort(report.episodes.begin(), report.episodes.end(),
                   [](const auto& a, const auto& b) { return a.episode_id < b.episode_id; });
  if (!report.episodes.empty()) {
    const double n = static_cast<double>(report.episodes.size());
    for (const auto& e : report.episodes) {
      report.mean.lcs += e.metrics.lcs / n;
      report.mean.executability += e.metrics.executability / n;
      report.mean.f1 += e.metrics.f1 / n;
      report.mean.f1_state += e.metrics.f1_state / n;
      report.mean.f1_relation += e.metrics.f1_relation / n;
    }
  }
  return report;
}

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << std::fixed << v;
  return s.str();
}

}  // namespace

std::string AblationTable::to_csv() const {
  std::ostringstream out;
  out << "mode,variant";
  for (const auto& c : EvalReport::csv_columns()) out << ',' << c;
  out << '\n';
  for (const auto& row : rows) {
    out << to_string(row.report.mode) << ',' << row.variant;
    for (double v : row.report.csv_values()) out << ',' << fmt(v);
    out << '\n';
  }
  return out.str();
}

AblationTable run_ablation_suite(std::span<const NamedPolicy> variants, std::span<const sim::Demonstration> episodes,
                                 const EvalOptions& base, std::span<const EvalMode> modes) {
  static const std::vector<EvalMode> kDefault{EvalMode::kVisInteractive, EvalMode::kVisInteractiveAttack};
  if (modes.empty()) modes = kDefault;
  AblationTable table;
  for (auto mode : modes) {
    for (const auto& v : variants) {
      if (!v.policy) throw ConfigError("ablation variant without a policy: " + v.name);
      auto options = base;
      options.mode = mode;
      table.rows.push_back({v.name, run_evaluation(*v.policy, episodes, options)});
    }
  }
  return table;
}

std::string reports_csv(std::span<const EvalReport> reports) {
  std::ostringstream out;
  out << "mode";
  for (const auto& c : EvalReport::csv_columns()) out << ',' << c;
  out << '\n';
  for (const auto& r : reports) {
    out << to_string(r.mode);
    for (double v : r.csv_values()) out << ',' << fmt(v);
    out << '\n';
  }
  return out.str();
}

}  // namespace tamplan::eval
