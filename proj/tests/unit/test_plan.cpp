#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "tamplan/common/errors.hpp"
#include "tamplan/grad/grad_check.hpp"
#include "tamplan/grad/ops.hpp"
#include "tamplan/plan/decoder.hpp"
#include "tamplan/plan/planner.hpp"
#include "tamplan/sim/dataset.hpp"
#include "tamplan/sim/vocabulary.hpp"
#include "tamplan/tam/memory.hpp"

using namespace tamplan;
using namespace tamplan::plan;

namespace {

DecoderConfig tiny() {
  DecoderConfig c;
  c.model_dim = 8;
  c.heads = 2;
  c.ffn_dim = 16;
  c.max_length = 6;
  c.memory_slots = 3;
  c.value_dim = 4;
  return c;
}

std::vector<std::vector<MemorySlot>> random_memory(std::mt19937_64& rng, const DecoderConfig& c, std::size_t blocks) {
  std::normal_distribution<double> g;
  std::vector<std::vector<MemorySlot>> out(blocks);
  for (auto& b : out) {
    for (std::size_t s = 0; s < c.memory_slots; ++s) {
      MemorySlot slot;
      slot.value.resize(c.value_dim);
      for (auto& v : slot.value) v = g(rng);
      slot.next_action = rng() % c.output_size;
      b.push_back(slot);
    }
  }
  return out;
}

/// Environment that rejects every action.
class RejectingEnv : public EpisodeInterface {
 public:
  const std::vector<double>* observation() const override { return nullptr; }
  StepOutcome submit(const sim::Action&) override {
    StepOutcome o;
    o.success = false;
    o.failure = sim::FailReason::kNotVisible;
    return o;
  }
};

/// Environment that accepts everything and shows a fixed frame.
class NullEnv : public EpisodeInterface {
 public:
  const std::vector<double>* observation() const override { return nullptr; }
  StepOutcome submit(const sim::Action& a) override {
    StepOutcome o;
    o.executed = a;
    return o;
  }
};

}  // namespace

TEST_CASE("next-token distribution is normalized") {
  const auto c = tiny();
  const auto dec = ActionDecoder::create(c, 1);
  std::mt19937_64 rng(2);
  const std::vector<std::size_t> hist{3, 7, 11};
  const auto mem = random_memory(rng, c, hist.size() + 1);
  const auto p = dec.next_distribution({2, hist, mem});
  REQUIRE(p.size() == c.output_size);
  double s = 0.0;
  for (double x : p) s += x;
  CHECK(std::abs(s - 1.0) < 1e-9);
}

TEST_CASE("memory slot order does not matter") {
  const auto c = tiny();
  const auto dec = ActionDecoder::create(c, 3);
  std::mt19937_64 rng(4);
  const std::vector<std::size_t> hist{5, 9};
  auto mem = random_memory(rng, c, hist.size() + 1);
  const auto before = dec.log_probs({1, hist, mem});
  for (auto& block : mem) std::reverse(block.begin(), block.end());
  std::swap(mem[1][0], mem[1][1]);
  const auto after = dec.log_probs({1, hist, mem});
  for (std::size_t i = 0; i < before.numel(); ++i) CHECK(std::abs(before[i] - after[i]) < 1e-12);
}

TEST_CASE("later tokens never influence earlier positions") {
  const auto c = tiny();
  const auto dec = ActionDecoder::create(c, 5);
  std::mt19937_64 rng(6);
  const std::vector<std::size_t> hist{1, 2, 3, 4};
  const auto mem = random_memory(rng, c, hist.size() + 1);
  const auto base = dec.log_probs({0, hist, mem});
  for (std::size_t j = 0; j < hist.size(); ++j) {
    auto h2 = hist;
    h2[j] = 40;
    auto m2 = mem;
    m2[j + 1] = random_memory(rng, c, 1).front();
    const auto pert = dec.log_probs({0, h2, m2});
    // Row p predicts the token after position p; history token j sits at position j + 1.
    for (std::size_t p = 0; p <= j; ++p) {
      for (std::size_t k = 0; k < c.output_size; ++k) CHECK(pert.at(p, k) == base.at(p, k));
    }
    bool changed = false;
    for (std::size_t k = 0; k < c.output_size; ++k) changed |= pert.at(j + 1, k) != base.at(j + 1, k);
    CHECK(changed);
  }
}

TEST_CASE("sequence log-probability factorizes over steps") {
  const auto c = tiny();
  const auto dec = ActionDecoder::create(c, 7);
  std::mt19937_64 rng(8);
  const std::vector<std::size_t> seq{12, 30, 4, sim::ActionVocabulary::instance().stop()};
  const auto mem = random_memory(rng, c, seq.size());
  const std::span<const std::size_t> hist(seq.data(), seq.size() - 1);
  const auto lp = dec.log_probs({3, hist, mem});
  double joint = 0.0, chained = 0.0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    joint += lp.at(t, seq[t]);
    const std::span<const std::size_t> prefix(seq.data(), t);
    const std::span<const std::vector<MemorySlot>> mprefix(mem.data(), t + 1);
    chained += std::log(dec.next_distribution({3, prefix, mprefix})[seq[t]]);
  }
  CHECK(std::abs(joint - chained) < 1e-9);
}

TEST_CASE("history beyond the maximum length is a contract error") {
  const auto c = tiny();
  const auto dec = ActionDecoder::create(c, 9);
  std::mt19937_64 rng(1);
  const std::vector<std::size_t> hist(c.max_length, 3);
  const auto mem = random_memory(rng, c, hist.size() + 1);
  CHECK_THROWS_AS(dec.next_distribution({0, hist, mem}), ContractError);
}

TEST_CASE("decoder gradients match finite differences") {
  const auto c = tiny();
  auto dec = ActionDecoder::create(c, 10);
  std::mt19937_64 rng(11);
  const std::vector<std::size_t> seq{8, 20, 80};
  const auto mem = random_memory(rng, c, seq.size());
  std::vector<grad::Parameter*> params;
  for (auto& p : dec.store.params()) params.push_back(&p);
  grad::GradCheckOptions opt;
  opt.max_entries_per_parameter = 12;
  const auto rep = grad::grad_check(params, [&](grad::Tape& t) {
    grad::ParamScope scope(t, dec.store);
    const std::span<const std::size_t> hist(seq.data(), seq.size() - 1);
    return grad::negate(grad::sum(grad::pick(grad::log_softmax(dec.logits(scope, {1, hist, mem})), seq)));
  }, opt);
  INFO(rep.worst_parameter, " ", rep.max_relative_error);
  CHECK(rep.passed());
}

TEST_CASE("argmax breaks ties towards the lowest index") {
  CHECK(argmax(std::vector<double>{0.1, 0.7, 0.7, 0.2}) == 1);
  CHECK(argmax(std::vector<double>{0.5}) == 0);
  const std::vector<std::size_t> skip{1};
  CHECK(argmax(std::vector<double>{0.1, 0.7, 0.7, 0.2}, skip) == 2);
  const std::vector<std::size_t> all{0, 1, 2, 3};
  CHECK(argmax(std::vector<double>{0.1, 0.7, 0.7, 0.2}, all) == 1);
}

TEST_CASE("sinusoidal positions differ and stay bounded") {
  const auto a = sinusoid(1, 8), b = sinusoid(2, 8);
  CHECK(a != b);
  for (double x : a) CHECK(std::abs(x) <= 1.0);
  CHECK(sinusoid(0, 4) == std::vector<double>{0.0, 1.0, 0.0, 1.0});
}

TEST_CASE("teacher-forced training memorizes a small demonstration set") {
  const auto demos = sim::generate_demonstrations(sim::DemoSpec::training(2, 5)).demos;
  REQUIRE(demos.size() == 16);
  const std::vector<sim::Demonstration> ten(demos.begin(), demos.begin() + 10);
  tam::TamConfig tc;
  const tam::TamNetworks nets{tam::AffordanceNet::create(tc, 1), tam::GoalAssociator::create(tc, 2),
                              tam::LocalizationNet::create(tc, 3), "d", "d", "d"};
  const auto graph = tam::build_memory(ten, "d", nets);
  // Raw-frame retrieval keeps every context distinguishable without trained keys.
  const tam::MemoryIndex index(graph, nullptr, tam::LocalizeMetric::kPixelCosine);

  DecoderConfig c;
  const auto seqs = build_teacher_sequences(ten, &index, c.memory_slots, c.value_dim, false);
  auto dec = ActionDecoder::create(c, 12);
  const double init = sequence_loss(dec, seqs);
  CHECK(std::abs(init - std::log(static_cast<double>(c.output_size))) < 0.1 * std::log(81.0));

  DecoderTrainConfig cfg;
  cfg.epochs = 300;  // one full-batch update per epoch
  cfg.learning_rate = 5e-4;
  const auto rep = train_decoder(dec, seqs, seqs, cfg);
  REQUIRE(rep.loss_curve.size() == 300);
  CHECK(rep.loss_curve[99] < rep.loss_curve[0]);
  std::size_t rises = 0;
  for (std::size_t i = 1; i < 100; ++i) rises += rep.loss_curve[i] >= rep.loss_curve[i - 1];
  CHECK(rises == 0);
  CHECK(rep.held_out_accuracy >= 0.99);

  // Zeroing memory changes a trained model's prediction.
  const auto& s = seqs.front();
  auto blank = s.memory;
  for (auto& b : blank) {
    for (auto& slot : b) std::fill(slot.value.begin(), slot.value.end(), 0.0);
  }
  const auto with = dec.next_distribution({s.goal, {}, std::span(s.memory).first(1)});
  const auto without = dec.next_distribution({s.goal, {}, std::span<const std::vector<MemorySlot>>(blank).first(1)});
  CHECK(with != without);
}

TEST_CASE("training rejects a decoder built for another vocabulary") {
  auto c = tiny();
  c.vocab_size = 10;
  c.output_size = 9;
  auto dec = ActionDecoder::create(c, 1);
  TeacherSequence s;
  s.targets = {1};
  s.memory = {empty_slots(c.memory_slots, c.value_dim)};
  const std::vector<TeacherSequence> seqs{s};
  CHECK_THROWS_AS(train_decoder(dec, seqs, {}, {}), ProvenanceError);
}

TEST_CASE("greedy planning is deterministic and respects the step budget") {
  auto c = tiny();
  c.use_memory = false;
  const auto dec = ActionDecoder::create(c, 13);
  DecoderPolicy policy(dec, nullptr, nullptr);
  NullEnv env;
  CHECK(plan_episode(policy, 2, env, 0).steps.empty());
  const auto a = plan_episode(policy, 2, env, 4);
  const auto b = plan_episode(policy, 2, env, 4);
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) CHECK(a.steps[i].predicted == b.steps[i].predicted);
  CHECK(a.steps.size() <= 4);
}

TEST_CASE("a failed step leaves the context unchanged and is not proposed again") {
  auto c = tiny();
  c.use_memory = false;
  const auto dec = ActionDecoder::create(c, 13);
  DecoderPolicy policy(dec, nullptr, nullptr);
  policy.begin(1);
  const auto first = policy.decide(nullptr).token;
  StepOutcome failed;
  failed.success = false;
  policy.feedback(failed);
  const auto second = policy.decide(nullptr).token;
  // Same empty history, so the same distribution with the failed token removed.
  const auto probs = dec.next_distribution({1, {}, {}});
  const std::vector<std::size_t> skip{first};
  CHECK(second != first);
  CHECK(second == argmax(probs, skip));

  // Every proposal in an all-rejecting episode is new.
  RejectingEnv env;
  const auto plan = plan_episode(policy, 1, env, 5);
  std::set<std::string> seen;
  for (const auto& s : plan.steps) CHECK(seen.insert(s.predicted.to_string()).second);

  // Success lifts the exclusion.
  policy.begin(1);
  policy.decide(nullptr);
  policy.feedback(failed);
  policy.decide(nullptr);
  policy.feedback(StepOutcome{});
  const std::vector<std::size_t> hist{second};
  CHECK(policy.decide(nullptr).token == argmax(dec.next_distribution({1, hist, {}})));
}

TEST_CASE("replay policy emits its actions then stops") {
  const auto& vocab = sim::ActionVocabulary::instance();
  const std::vector<sim::Action> acts{vocab.decode(0), vocab.decode(1)};
  ReplayPolicy p(acts);
  NullEnv env;
  const auto plan = plan_episode(p, 0, env, 10);
  CHECK(plan.stopped);
  REQUIRE(plan.steps.size() == 2);
  CHECK(plan.steps[0].predicted == acts[0]);

  std::ostringstream out;
  write_trace(out, plan, 7);
  std::istringstream in(out.str());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"predicted", "executed", "failure", "localized_node", "replan_trials", "retrieved"}) {
      CHECK(j.contains(key));
    }
    CHECK(j.at("episode_id") == 7);
    ++lines;
  }
  CHECK(lines == 2);
}

TEST_CASE("disabling replanning never alters retrieval") {
  const auto demos = sim::generate_demonstrations(sim::DemoSpec::training(1, 8)).demos;
  tam::TamConfig tc;
  const tam::TamNetworks nets{tam::AffordanceNet::create(tc, 1), tam::GoalAssociator::create(tc, 2),
                              tam::LocalizationNet::create(tc, 3), "d", "d", "d"};
  const auto graph = tam::build_memory(demos, "d", nets);
  const tam::MemoryIndex index(graph, &nets.localization);
  DecoderConfig c;
  const auto dec = ActionDecoder::create(c, 4);
  RetrievalOptions off;
  off.replan = false;
  DecoderPolicy policy(dec, &index, &nets.goal_association, off);
  policy.begin(demos[0].goal_id);
  for (const auto& step : demos[0].steps) {
    const auto d = policy.decide(&step.observation.end_features);
    CHECK_FALSE(d.replanned);
    CHECK(d.replan_trials == 0);
    REQUIRE(d.localized);
    const auto q = index.query_of_frame(step.observation.end_features);
    CHECK(d.retrieved == index.retrieve(q, c.memory_slots));
  }
}

TEST_CASE("linear planner features are goal one-hot, mean value and mean next-action one-hot") {
  const auto lp = LinearPlanner::create(8, 2, 81, 1);
  const std::vector<MemorySlot> slots{{{1.0, 3.0}, 5}, {{3.0, 5.0}, 5}};
  const auto f = lp.features(2, slots);
  REQUIRE(f.size() == lp.feature_dim());
  CHECK(f[2] == 1.0);
  CHECK(f[8] == 2.0);
  CHECK(f[9] == 4.0);
  CHECK(f[10 + 5] == 1.0);
}
