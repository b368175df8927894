#include <random>

#include <benchmark/benchmark.h>

#include "tamplan/eval/metrics.hpp"
#include "tamplan/grad/ops.hpp"
#include "tamplan/plan/decoder.hpp"
#include "tamplan/sim/apartment.hpp"
#include "tamplan/sim/dataset.hpp"
#include "tamplan/sim/dynamics.hpp"
#include "tamplan/tam/losses.hpp"
#include "tamplan/tam/memory.hpp"

using namespace tamplan;

namespace {

grad::Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(r * c);
  for (auto& x : v) x = g(rng);
  return grad::Tensor::matrix(r, c, std::move(v));
}

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  grad::Parameter a{"a", random_matrix(n, n, 1), {}, false}, b{"b", random_matrix(n, n, 2), {}, false};
  for (auto _ : state) {
    grad::Tape tape;
    auto loss = grad::sum(grad::matmul(tape.parameter(a), tape.parameter(b)));
    tape.backward(loss);
    benchmark::DoNotOptimize(a.grad.values().data());
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(32)->Arg(64)->Arg(128);

void BM_InfoNce(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  grad::Parameter z{"z", random_matrix(n, 64, 3), {}, false};
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % 16;
  for (auto _ : state) {
    grad::Tape tape;
    auto r = tam::info_nce(grad::l2_normalize_rows(tape.parameter(z)), labels, 0.1);
    tape.backward(r.loss_sum);
  }
}
BENCHMARK(BM_InfoNce)->Arg(16)->Arg(64);

void BM_DecoderNext(benchmark::State& state) {
  plan::DecoderConfig c;
  const auto dec = plan::ActionDecoder::create(c, 1);
  const auto len = static_cast<std::size_t>(state.range(0));
  std::vector<std::size_t> hist(len, 3);
  std::vector<std::vector<plan::MemorySlot>> mem(len + 1, std::vector<plan::MemorySlot>(c.memory_slots));
  for (auto& b : mem) {
    for (auto& s : b) s.value.assign(c.value_dim, 0.1);
  }
  for (auto _ : state) benchmark::DoNotOptimize(dec.next_distribution({0, hist, mem}));
}
BENCHMARK(BM_DecoderNext)->Arg(1)->Arg(8)->Arg(16);

void BM_Retrieve(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  std::vector<tam::TamNode> nodes(n);
  for (std::size_t i = 0; i < n; ++i) {
    nodes[i].id = i;
    nodes[i].frame.resize(130);
    for (auto& x : nodes[i].frame) x = g(rng);
    nodes[i].key = nodes[i].z = nodes[i].v = {0.0};
  }
  const tam::TamGraph graph(std::move(nodes), {});
  const tam::MemoryIndex index(graph, nullptr, tam::LocalizeMetric::kPixelCosine);
  std::vector<double> q(130);
  for (auto& x : q) x = g(rng);
  for (auto _ : state) benchmark::DoNotOptimize(index.retrieve(q, 5));
}
BENCHMARK(BM_Retrieve)->Arg(1000)->Arg(10000);

void BM_ExecutableActions(benchmark::State& state) {
  const auto s = sim::generate_apartment(7, {});
  for (auto _ : state) benchmark::DoNotOptimize(sim::executable_actions(s));
}
BENCHMARK(BM_ExecutableActions);

void BM_Lcs(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<std::size_t> a(n), b(n);
  for (auto& x : a) x = rng() % 20;
  for (auto& x : b) x = rng() % 20;
  for (auto _ : state) benchmark::DoNotOptimize(eval::lcs_normalized(a, b));
}
BENCHMARK(BM_Lcs)->Arg(8)->Arg(24);

}  // namespace
BENCHMARK_MAIN();
