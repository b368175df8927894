#include <random>

#include "doctest.h"
#include "support/oracles.hpp"
#include "tamplan/common/errors.hpp"
#include "tamplan/eval/harness.hpp"
#include "tamplan/eval/metrics.hpp"
#include "tamplan/sim/dynamics.hpp"
#include "tamplan/sim/tasks.hpp"
#include "tamplan/sim/vocabulary.hpp"

using namespace tamplan;
using namespace tamplan::eval;

namespace {

using Seq = std::vector<std::size_t>;

std::vector<sim::Demonstration> test_episodes(std::size_t n = 16) {
  return sim::generate_demonstrations(sim::DemoSpec::test(n, 3)).demos;
}

/// Records which observations it was shown; replays the expert.
class Recorder : public plan::Policy {
 public:
  explicit Recorder(const std::vector<sim::Demonstration>& demos) : demos_(demos) {}
  void begin(std::size_t) override {
    replay_.emplace(demos_[episode_++].actions());
    replay_->begin(0);
  }
  plan::StepDecision decide(const std::vector<double>* frame) override {
    seen.push_back(frame ? *frame : std::vector<double>{});
    return replay_->decide(frame);
  }
  std::vector<std::vector<double>> seen;

 private:
  const std::vector<sim::Demonstration>& demos_;
  std::size_t episode_ = 0;
  std::optional<plan::ReplayPolicy> replay_;
};

/// Always proposes putting down a plate it never picked up.
class Stubborn : public plan::Policy {
 public:
  void begin(std::size_t) override {}
  plan::StepDecision decide(const std::vector<double>*) override {
    plan::StepDecision d;
    d.token = sim::ActionVocabulary::instance().encode(
        sim::Action::put_back(sim::ObjectClass::kPlate, sim::ObjectClass::kTable));
    return d;
  }
};

/// Stubborn, counting the outcomes it is told about.
class Listener : public Stubborn {
 public:
  void feedback(const plan::StepOutcome& o) override {
    ++told;
    failures += !o.success;
  }
  std::size_t told = 0, failures = 0;
};

}  // namespace

TEST_CASE("lcs examples") {
  const Seq abcd{1, 2, 3, 4}, bc{2, 3};
  CHECK(lcs_normalized(abcd, abcd) == 1.0);
  CHECK(lcs_normalized(abcd, bc) == 0.5);
  CHECK(lcs_normalized(Seq{}, Seq{1}) == 0.0);
  CHECK(lcs_normalized(Seq{}, Seq{}) == 1.0);
}

TEST_CASE("lcs matches exhaustive enumeration and is symmetric") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    Seq a(rng() % 9), b(rng() % 9);
    for (auto& x : a) x = rng() % 4;
    for (auto& x : b) x = rng() % 4;
    const double got = lcs_normalized(a, b);
    CHECK(got == testing::lcs_normalized_oracle(a, b));
    CHECK(got == lcs_normalized(b, a));
    CHECK((got == 1.0) == (a == b));
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("executability replays from the initial state") {
  const auto demos = test_episodes(4);
  for (const auto& d : demos) {
    const auto s0 = sim::initial_state(d, {});
    CHECK(executability(d.actions(), s0) == 1.0);
  }
  // Grabbing an object in a room the agent has not walked to fails.
  const auto& d = demos.front();
  const auto s0 = sim::initial_state(d, {});
  std::optional<sim::Action> far;
  for (const auto& [id, info] : s0.objects) {
    if (!info.room || *info.room == s0.agent.room || !sim::traits(id).grabbable) continue;
    auto there = s0;
    if (!sim::apply(there, sim::Action::walk(*info.room)) && !sim::check_preconditions(there, sim::Action::grab(id))) {
      far = sim::Action::grab(id);
      break;
    }
  }
  REQUIRE(far);
  const std::vector<sim::Action> seq{*far, sim::Action::walk(*s0.objects.at(far->object).room), *far};
  CHECK(executability(seq, s0) == doctest::Approx(2.0 / 3.0));
  CHECK(executability({}, s0) == 1.0);
}

TEST_CASE("graph f1 examples") {
  using sim::Fact;
  const auto plate = sim::ObjectClass::kPlate, cup = sim::ObjectClass::kCup, table = sim::ObjectClass::kTable;
  const sim::FactSet gt{Fact::relation({plate, sim::RelationKind::kOn, table}),
                        Fact::relation({cup, sim::RelationKind::kOn, table})};
  const sim::FactSet pred{Fact::relation({plate, sim::RelationKind::kOn, table})};
  const auto f = graph_f1(pred, gt);
  CHECK(f.f1_relation == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(f.f1_state == 1.0);
  const auto same = graph_f1(gt, gt);
  CHECK(same.f1 == 1.0);
  CHECK(same.f1_relation == 1.0);
  const sim::FactSet other{Fact::state(cup, sim::StateKind::kHeld)};
  CHECK(graph_f1(other, gt).f1 == 0.0);
}

TEST_CASE("graph f1 matches set arithmetic and ignores ordering") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = testing::random_facts(rng, false);
    const auto b = testing::random_facts(rng, false);
    const auto f = graph_f1(a, b);
    CHECK(f.f1 == testing::f1_oracle(a, b));
    CHECK(f.f1_state == testing::f1_oracle(testing::only_kind(a, sim::FactKind::kState),
                                           testing::only_kind(b, sim::FactKind::kState)));
    CHECK(f.f1_relation == testing::f1_oracle(testing::only_kind(a, sim::FactKind::kRelation),
                                              testing::only_kind(b, sim::FactKind::kRelation)));
    auto sorted = a;
    std::sort(sorted.begin(), sorted.end());
    CHECK((f.f1 == 1.0) == (sorted == [&] {
            auto s = b;
            std::sort(s.begin(), s.end());
            return s;
          }()));
    for (double v : {f.f1, f.f1_state, f.f1_relation}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("replaying the expert is perfect in interactive mode") {
  const auto demos = test_episodes();
  Recorder oracle(demos);
  EvalOptions opt;
  opt.mode = EvalMode::kVisInteractive;
  const auto r = run_evaluation(oracle, demos, opt);
  REQUIRE(r.episodes.size() == demos.size());
  for (const auto& e : r.episodes) {
    CHECK(e.metrics.lcs == 1.0);
    CHECK(e.metrics.f1 == 1.0);
    CHECK(e.metrics.executability == 1.0);
  }
  CHECK(r.mean.lcs == 1.0);
}

TEST_CASE("interactive executability is always one even for failing plans") {
  const auto demos = test_episodes(8);
  Stubborn bad;
  for (auto mode : {EvalMode::kVisInteractive, EvalMode::kVisInteractiveAttack}) {
    EvalOptions opt;
    opt.mode = mode;
    const auto r = run_evaluation(bad, demos, opt);
    for (const auto& e : r.episodes) CHECK(e.metrics.executability == 1.0);
  }
  EvalOptions st;
  st.mode = EvalMode::kVisStatic;
  CHECK(run_evaluation(bad, demos, st).mean.executability < 1.0);
}

TEST_CASE("zero attack probability is a no-op") {
  const auto demos = test_episodes(8);
  Stubborn a, b;
  EvalOptions base;
  base.mode = EvalMode::kVisInteractive;
  auto attack = base;
  attack.mode = EvalMode::kVisInteractiveAttack;
  attack.attack.p = 0.0;
  std::vector<plan::Plan> pa, pb;
  const auto ra = run_evaluation(a, demos, base, &pa);
  const auto rb = run_evaluation(b, demos, attack, &pb);
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(nlohmann::json::array({plan::plan_step_json(pa[i].steps.back())}) ==
          nlohmann::json::array({plan::plan_step_json(pb[i].steps.back())}));
    CHECK(pa[i].steps.size() == pb[i].steps.size());
  }
  for (std::size_t i = 0; i < ra.episodes.size(); ++i) {
    CHECK(ra.episodes[i].metrics.lcs == rb.episodes[i].metrics.lcs);
    CHECK(ra.episodes[i].metrics.f1 == rb.episodes[i].metrics.f1);
  }
}

TEST_CASE("certain attack replaces every step with an executable action") {
  const auto demos = test_episodes(4);
  for (const auto& d : demos) {
    InteractiveEnv env(d, {}, 1, AttackConfig{1.0, 5});
    auto shadow = sim::initial_state(d, {});
    for (int t = 0; t < 6; ++t) {
      const auto options = sim::executable_actions(shadow);
      const auto out = env.submit(sim::Action::walk(sim::Room::kOffice));
      CHECK(out.attacked);
      CHECK(out.success);
      CHECK(std::find(options.begin(), options.end(), out.executed) != options.end());
      REQUIRE_FALSE(sim::apply(shadow, out.executed));
      CHECK(env.state() == shadow);
    }
  }
}

TEST_CASE("static mode shows recorded frames whatever the planner does") {
  const auto demos = test_episodes(3);
  Recorder rec(demos);
  EvalOptions opt;
  opt.mode = EvalMode::kVisStatic;
  run_evaluation(rec, demos, opt);
  std::size_t k = 0;
  for (const auto& d : demos) {
    CHECK(rec.seen[k++] == d.initial_frame);
    for (std::size_t t = 0; t < d.steps.size(); ++t) CHECK(rec.seen[k++] == d.steps[t].observation.end_features);
  }

  Recorder blind(demos);
  opt.mode = EvalMode::kPureText;
  run_evaluation(blind, demos, opt);
  for (const auto& f : blind.seen) CHECK(f.empty());
}

TEST_CASE("seed-paired evaluations are identical") {
  const auto demos = test_episodes(8);
  Stubborn a, b;
  EvalOptions opt;
  opt.mode = EvalMode::kVisInteractiveAttack;
  opt.attack.p = 0.5;
  const nlohmann::json ja = run_evaluation(a, demos, opt), jb = run_evaluation(b, demos, opt);
  CHECK(ja.dump() == jb.dump());
}

TEST_CASE("ablation table holds one row per variant per mode") {
  const auto demos = test_episodes(4);
  Stubborn s1, s2, s3, s4, s5;
  const std::vector<NamedPolicy> vars{{"a", &s1}, {"b", &s2}, {"c", &s3}, {"d", &s4}, {"e", &s5}};
  const auto t = run_ablation_suite(vars, demos, {});
  REQUIRE(t.rows.size() == 10);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(t.rows[i].report.mode == EvalMode::kVisInteractive);
    CHECK(t.rows[i + 5].report.mode == EvalMode::kVisInteractiveAttack);
  }
  const auto csv = t.to_csv();
  CHECK(csv.rfind("mode,variant,lcs,executability,f1,f1_state,f1_relation\n", 0) == 0);
}

TEST_CASE("mode names and attack bounds") {
  for (auto m : all_modes()) CHECK(parse_mode(to_string(m)) == m);
  CHECK_FALSE(parse_mode("interactive"));
  CHECK_THROWS_AS((AttackConfig{1.5, 0}.validate()), ConfigError);
  CHECK(step_budget(5) == 14);
}

TEST_CASE("only closed-loop modes report outcomes to the planner") {
  const auto demos = test_episodes(4);
  for (auto mode : all_modes()) {
    Listener l;
    EvalOptions opt;
    opt.mode = mode;
    std::vector<plan::Plan> plans;
    run_evaluation(l, demos, opt, &plans);
    std::size_t steps = 0, failed = 0;
    for (const auto& p : plans) {
      steps += p.steps.size();
      for (const auto& s : p.steps) failed += !s.outcome.success;
    }
    INFO(to_string(mode));
    CHECK(l.told == (is_interactive(mode) ? steps : 0));
    CHECK(l.failures == (is_interactive(mode) ? failed : 0));
  }
}
