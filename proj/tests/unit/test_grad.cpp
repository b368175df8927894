#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "support/fd_oracle.hpp"
#include "tamplan/common/errors.hpp"
#include "tamplan/grad/checkpoint.hpp"
#include "tamplan/grad/grad_check.hpp"
#include "tamplan/grad/layers.hpp"
#include "tamplan/grad/ops.hpp"
#include "tamplan/grad/optimizer.hpp"

using namespace tamplan;
using namespace tamplan::grad;

namespace {

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("tensor shape invariants") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  CHECK_THROWS_AS(Tensor(Shape{0, 3}), DimensionError);
  Tensor t({2, 3});
  CHECK(t.numel() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
}

TEST_CASE("relu and softmax examples") {
  Tape tape;
  auto r = relu(tape.constant(Tensor::vector({-1.0, 0.0, 2.0})));
  CHECK(r.value() == Tensor::vector({0.0, 0.0, 2.0}));
  auto s = softmax(tape.constant(Tensor::vector({0.0, 0.0, 0.0})), 0);
  for (double v : s.value().values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("matmul matches triple-loop oracle") {
  std::mt19937_64 rng(7);
  const auto a = random_values(6, rng);
  const auto b = random_values(6, rng);
  Tape tape;
  auto c = matmul(tape.constant(Tensor::matrix(2, 3, a)), tape.constant(Tensor::matrix(3, 2, b)));
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 3; ++k) acc += a[i * 3 + k] * b[k * 2 + j];
      CHECK(c.value().at(i, j) == doctest::Approx(acc).epsilon(1e-14));
    }
  }
}

TEST_CASE("shape mismatch names the op and shapes") {
  Tape tape;
  auto a = tape.constant(Tensor({2, 3}));
  try {
    (void)matmul(a, a);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("(2x3)") != std::string::npos);
  }
  CHECK_THROWS_AS((void)add(a, tape.constant(Tensor({3, 2}))), DimensionError);
  CHECK_THROWS_AS((void)add_rowwise(a, tape.constant(Tensor({2}))), DimensionError);
}

TEST_CASE("backward analytic examples") {
  SUBCASE("sum is linear") {
    Tape tape;
    auto x = tape.variable(Tensor::vector({0.3, -2.0, 5.0}));
    tape.backward(sum(x));
    CHECK(x.grad() == Tensor::vector({1.0, 1.0, 1.0}));
  }
  SUBCASE("dot(x, x)") {
    Tape tape;
    auto x = tape.variable(Tensor::vector({1.0, 2.0}));
    tape.backward(dot(x, x));
    CHECK(x.grad() == Tensor::vector({2.0, 4.0}));
  }
  SUBCASE("non-scalar loss is rejected") {
    Tape tape;
    auto x = tape.variable(Tensor::vector({1.0, 2.0}));
    CHECK_THROWS_AS(tape.backward(relu(x)), ContractError);
  }
  SUBCASE("empty tape is rejected") {
    Tape tape;
    Tape other;
    auto x = other.variable(Tensor::scalar(1.0));
    CHECK_THROWS_AS(tape.backward(x), ContractError);
  }
}

TEST_CASE("unreached parameters get zero gradient") {
  ParameterStore store;
  store.add("used", Tensor::vector({1.0, 2.0}));
  store.add("unused", Tensor::vector({3.0}));
  Tape tape;
  auto u = tape.parameter(store[0]);
  (void)tape.parameter(store[1]);
  tape.backward(sum(u));
  CHECK(store[1].has_grad);
  CHECK(store[1].grad[0] == 0.0);
  CHECK(store[0].grad == Tensor::vector({1.0, 1.0}));
}

TEST_CASE("backward visits operations in reverse application order") {
  Tape tape;
  auto x = tape.variable(Tensor::vector({0.5, -0.25}));
  auto y = relu(x);
  auto z = exp(y);
  auto w = scale(z, 3.0);
  auto l = sum(w);
  tape.backward(l);
  const std::vector<std::size_t> expected{l.id(), w.id(), z.id(), y.id()};
  CHECK(tape.last_backward_visits() == expected);
}

TEST_CASE("two-layer MLP gradient matches central differences") {
  std::mt19937_64 rng(11);
  ParameterStore store;
  auto mlp = Mlp::create(store, "mlp", {4, 6, 3}, rng);
  const auto input = Tensor::matrix(2, 4, random_values(8, rng));

  const auto loss_of = [&](ParameterStore& s) {
    Tape tape;
    ParamScope scope(tape, s);
    auto out = mlp(scope, tape.constant(input));
    auto l = sum(square(out));
    const double v = l.value().item();
    tape.backward(l);
    return v;
  };
  loss_of(store);
  std::vector<double> analytic, flat;
  for (auto& p : store.params()) {
    analytic.insert(analytic.end(), p.grad.values().begin(), p.grad.values().end());
    flat.insert(flat.end(), p.value.values().begin(), p.value.values().end());
  }
  const auto numeric = testing::central_differences(
      [&](const std::vector<double>& x) {
        ParameterStore copy = store;
        std::size_t off = 0;
        for (auto& p : copy.params())
          for (auto& v : p.value.values()) v = x[off++];
        Tape tape;
        tape.set_grad_enabled(false);
        ParamScope scope(tape, copy);
        return sum(square(mlp(scope, tape.constant(input)))).value().item();
      },
      flat);
  CHECK(testing::max_relative_error(analytic, numeric) < 1e-4);
}

TEST_CASE("optimizer update rules") {
  SUBCASE("sgd step") {
    ParameterStore store;
    store.add("p", Tensor::scalar(1.0));
    store[0].grad[0] = 2.0;
    store[0].has_grad = true;
    Optimizer opt({.kind = OptimizerKind::kSgd, .learning_rate = 0.1});
    opt.step(store);
    CHECK(store[0].value[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(store[0].grad[0] == 0.0);
    CHECK(opt.state().step_count == 1);
  }
  SUBCASE("zero grad leaves parameter unchanged") {
    ParameterStore store;
    store.add("p", Tensor::scalar(1.5));
    store[0].has_grad = true;
    Optimizer sgd({.kind = OptimizerKind::kSgd, .learning_rate = 0.1});
    sgd.step(store);
    CHECK(store[0].value[0] == 1.5);
    store[0].has_grad = true;
    Optimizer adam({.kind = OptimizerKind::kAdam, .learning_rate = 0.1});
    adam.step(store);
    CHECK(store[0].value[0] == 1.5);
  }
  SUBCASE("first adam step moves by lr * g / (|g| + eps)") {
    ParameterStore store;
    store.add("p", Tensor::scalar(1.0));
    store[0].grad[0] = -4.0;
    store[0].has_grad = true;
    Optimizer opt({.kind = OptimizerKind::kAdam, .learning_rate = 0.01});
    opt.step(store);
    CHECK(store[0].value[0] == doctest::Approx(1.0 + 0.01 * 4.0 / (4.0 + 1e-8)).epsilon(1e-14));
    CHECK(opt.state().first_moment.size() == 1);
  }
  SUBCASE("missing grad is a contract error") {
    ParameterStore store;
    store.add("p", Tensor::scalar(1.0));
    Optimizer opt({});
    CHECK_THROWS_AS(opt.step(store), ContractError);
  }
  SUBCASE("sgd converges on (x - 3)^2") {
    ParameterStore store;
    store.add("x", Tensor::scalar(0.0));
    Optimizer opt({.kind = OptimizerKind::kSgd, .learning_rate = 0.1});
    for (int i = 0; i < 100; ++i) {
      Tape tape;
      auto x = tape.parameter(store[0]);
      auto d = sub(x, tape.constant(Tensor::scalar(3.0)));
      tape.backward(dot(d, d));
      opt.step(store);
    }
    CHECK(std::abs(store[0].value[0] - 3.0) < 1e-2);
  }
}

TEST_CASE("grad_check on reference heads") {
  std::mt19937_64 rng(3);
  SUBCASE("linear layer is exact") {
    ParameterStore store;
    auto lin = Linear::create(store, "lin", 5, 3, rng);
    const auto x = Tensor::matrix(4, 5, random_values(20, rng));
    const auto w = Tensor::matrix(4, 3, random_values(12, rng));
    std::vector<Parameter*> ps;
    for (auto& p : store.params()) ps.push_back(&p);
    auto report = grad_check(ps, [&](Tape& t) {
      ParamScope scope(t, store);
      return dot(lin(scope, t.constant(x)), t.constant(w));
    });
    CHECK(report.max_relative_error < 1e-6);
  }
  SUBCASE("3-layer relu MLP") {
    ParameterStore store;
    auto mlp = Mlp::create(store, "mlp", {6, 8, 8, 4}, rng);
    const auto x = Tensor::matrix(3, 6, random_values(18, rng));
    std::vector<Parameter*> ps;
    for (auto& p : store.params()) ps.push_back(&p);
    auto report = grad_check(ps, [&](Tape& t) {
      ParamScope scope(t, store);
      return mean(square(mlp(scope, t.constant(x))));
    });
    CHECK(report.max_relative_error < 1e-4);
    CHECK(report.checked == store.scalar_count());
  }
  SUBCASE("softmax cross-entropy head") {
    ParameterStore store;
    auto lin = Linear::create(store, "head", 5, 7, rng);
    const auto x = Tensor::matrix(4, 5, random_values(20, rng));
    const std::vector<std::size_t> labels{0, 3, 6, 2};
    std::vector<Parameter*> ps;
    for (auto& p : store.params()) ps.push_back(&p);
    auto report = grad_check(ps, [&](Tape& t) {
      ParamScope scope(t, store);
      auto logp = log_softmax(lin(scope, t.constant(x)));
      return negate(mean(pick(logp, labels)));
    });
    CHECK(report.max_relative_error < 1e-4);
  }
}

TEST_CASE("op gradients against finite differences") {
  std::mt19937_64 rng(21);
  const auto base = random_values(12, rng, 0.2, 1.5);
  const auto weights = random_values(12, rng);
  using Builder = std::function<Var(Tape&, Var)>;
  const std::vector<std::pair<const char*, Builder>> cases{
      {"softmax axis 0", [](Tape&, Var x) { return softmax(x, 0); }},
      {"softmax axis 1", [](Tape&, Var x) { return softmax(x, 1); }},
      {"log_softmax", [](Tape&, Var x) { return log_softmax(x); }},
      {"layer_norm", [](Tape&, Var x) { return layer_norm(x); }},
      {"l2_normalize", [](Tape&, Var x) { return l2_normalize_rows(x); }},
      {"sigmoid", [](Tape&, Var x) { return sigmoid(x); }},
      {"softplus", [](Tape&, Var x) { return softplus(x); }},
      {"log", [](Tape&, Var x) { return log(x); }},
      {"exp", [](Tape&, Var x) { return exp(x); }},
      {"transpose", [](Tape&, Var x) { return reshape(transpose(x), {3, 4}); }},
      {"slice_cols", [](Tape&, Var x) { return concat(std::vector<Var>{slice_cols(x, 1, 2), slice_cols(x, 0, 2)}, 1); }},
      {"concat rows", [](Tape&, Var x) { return slice_rows(concat(std::vector<Var>{x, scale(x, 2.0)}, 0), 2, 4); }},
      {"rowwise", [](Tape& t, Var x) {
         auto v = t.constant(Tensor::vector({0.5, -1.0, 2.0}));
         return mul_rowwise(add_rowwise(x, v), v);
       }},
      {"self matmul", [](Tape&, Var x) { return reshape(matmul(x, transpose(x)), {4, 4}); }},
  };
  for (const auto& [name, build] : cases) {
    CAPTURE(name);
    const auto loss_at = [&](const std::vector<double>& vals, bool with_grad, std::vector<double>* grad) {
      Tape tape;
      auto x = tape.variable(Tensor::matrix(4, 3, vals));
      auto y = build(tape, x);
      auto flat = reshape(y, {y.value().numel()});
      std::vector<double> w(weights.begin(), weights.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(flat.value().numel(), 12)));
      w.resize(flat.value().numel(), 0.25);
      auto l = dot(flat, tape.constant(Tensor::vector(w)));
      if (with_grad) {
        tape.backward(l);
        const auto g = x.grad();
        grad->assign(g.values().begin(), g.values().end());
      }
      return l.value().item();
    };
    std::vector<double> analytic;
    loss_at(base, true, &analytic);
    const auto numeric = testing::central_differences(
        [&](const std::vector<double>& v) { return loss_at(v, false, nullptr); }, base);
    CHECK(testing::max_relative_error(analytic, numeric) < 1e-6);
  }
}

TEST_CASE("embedding and pick gradients scatter correctly") {
  Tape tape;
  auto table = tape.variable(Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
  const std::vector<std::size_t> ids{2, 0, 2};
  auto e = embedding(table, ids);
  CHECK(e.value() == Tensor::matrix(3, 2, {5, 6, 1, 2, 5, 6}));
  const std::vector<std::size_t> cols{1, 0, 0};
  tape.backward(sum(pick(e, cols)));
  CHECK(table.grad() == Tensor::matrix(3, 2, {1, 0, 0, 0, 1, 1}));
  CHECK_THROWS_AS((void)embedding(table, std::vector<std::size_t>{3}), DimensionError);
}

TEST_CASE("bce_with_logits closed forms") {
  Tape tape;
  auto l = bce_with_logits(tape.variable(Tensor::vector({0.0, 0.0})), std::vector<double>{1.0, 0.0});
  CHECK(l.value().item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  auto big = bce_with_logits(tape.variable(Tensor::vector({60.0})), std::vector<double>{1.0});
  CHECK(big.value().item() < 1e-25);
}

TEST_CASE("softmax and layer_norm invariants on random inputs") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Tape tape;
    auto x = tape.constant(Tensor::matrix(5, 9, random_values(45, rng, -30.0, 30.0)));
    for (std::size_t axis : {0u, 1u}) {
      const auto s = softmax(x, axis).value();
      const std::size_t lines = axis == 1 ? 5 : 9;
      for (std::size_t l = 0; l < lines; ++l) {
        double total = 0.0;
        const std::size_t len = axis == 1 ? 9 : 5;
        for (std::size_t i = 0; i < len; ++i) {
          const double v = axis == 1 ? s.at(l, i) : s.at(i, l);
          CHECK(v >= 0.0);
          CHECK(v <= 1.0);
          total += v;
        }
        CHECK(std::abs(total - 1.0) < 1e-9);
      }
    }
    const auto ln = layer_norm(x).value();
    for (std::size_t r = 0; r < 5; ++r) {
      double mu = 0.0, var = 0.0;
      for (double v : ln.row(r)) mu += v;
      mu /= 9.0;
      for (double v : ln.row(r)) var += (v - mu) * (v - mu);
      var /= 9.0;
      CHECK(std::abs(mu) < 1e-7);
      CHECK(std::abs(var - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("identical seed and op sequence give bit-identical gradients") {
  const auto run = [] {
    std::mt19937_64 rng(99);
    ParameterStore store;
    auto mlp = Mlp::create(store, "m", {5, 7, 2}, rng);
    const auto x = Tensor::matrix(3, 5, random_values(15, rng));
    Tape tape;
    ParamScope scope(tape, store);
    tape.backward(mean(square(mlp(scope, tape.constant(x)))));
    std::vector<double> g;
    for (auto& p : store.params()) g.insert(g.end(), p.grad.values().begin(), p.grad.values().end());
    return g;
  };
  CHECK(run() == run());
}

TEST_CASE("checkpoint round trip keeps names, shapes and bits") {
  std::mt19937_64 rng(1);
  ParameterStore store;
  Mlp::create(store, "enc", {3, 4, 2}, rng);
  const auto path = std::filesystem::temp_directory_path() / "tamplan_test_ckpt.bin";
  save_checkpoint(path, store, {{"kind", "test"}});
  const auto loaded = load_checkpoint(path);
  CHECK(loaded.metadata.at("kind") == "test");
  CHECK(loaded.store.content_hash() == store.content_hash());
  ParameterStore target;
  std::mt19937_64 other(2);
  Mlp::create(target, "enc", {3, 4, 2}, other);
  assign_parameters(target, loaded.store);
  CHECK(target.content_hash() == store.content_hash());
  ParameterStore wrong;
  Mlp::create(wrong, "enc", {3, 5, 2}, other);
  CHECK_THROWS_AS(assign_parameters(wrong, loaded.store), ProvenanceError);
  std::filesystem::remove(path);
}
