#include "tamplan/tam/networks.hpp"

#include <cmath>
#include <functional>

#include "tamplan/common/errors.hpp"
#include "tamplan/grad/checkpoint.hpp"

namespace tamplan::tam {

using namespace grad;

void TamConfig::validate() const {
  for (auto d : {feature_dim, embed_dim, enc_hidden, proj_dim, goal_count, goal_embed_dim, assoc_hidden, loc_hidden,
                 key_dim}) {
    if (d == 0) throw ConfigError("tam config: dimensions must be positive");
  }
  if (!(temperature > 0.0)) throw ConfigError("tam config: temperature must be positive");
}

void to_json(nlohmann::json& j, const TamConfig& c) {
  j = nlohmann::json{{"feature_dim", c.feature_dim},   {"embed_dim", c.embed_dim},
                     {"enc_hidden", c.enc_hidden},     {"proj_dim", c.proj_dim},
                     {"temperature", c.temperature},   {"goal_count", c.goal_count},
                     {"goal_embed_dim", c.goal_embed_dim}, {"assoc_hidden", c.assoc_hidden},
                     {"loc_hidden", c.loc_hidden},     {"key_dim", c.key_dim}};
}

void from_json(const nlohmann::json& j, TamConfig& c) {
  TamConfig d;
  c.feature_dim = j.value("feature_dim", d.feature_dim);
  c.embed_dim = j.value("embed_dim", d.embed_dim);
  c.enc_hidden = j.value("enc_hidden", d.enc_hidden);
  c.proj_dim = j.value("proj_dim", d.proj_dim);
  c.temperature = j.value("temperature", d.temperature);
  c.goal_count = j.value("goal_count", d.goal_count);
  c.goal_embed_dim = j.value("goal_embed_dim", d.goal_embed_dim);
  c.assoc_hidden = j.value("assoc_hidden", d.assoc_hidden);
  c.loc_hidden = j.value("loc_hidden", d.loc_hidden);
  c.key_dim = j.value("key_dim", d.key_dim);
}

namespace {

Tensor run_no_grad(const std::function<Var(Tape&)>& f) {
  Tape tape;
  tape.set_grad_enabled(false);
  return f(tape).value();
}

}  // namespace

AffordanceNet AffordanceNet::create(const TamConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  AffordanceNet n;
  n.config = config;
  n.enc = Mlp::create(n.store, "enc", {2 * config.feature_dim, config.enc_hidden, config.embed_dim}, rng);
  n.proj = Mlp::create(n.store, "proj", {config.embed_dim, config.embed_dim, config.embed_dim, config.proj_dim}, rng);
  return n;
}

Var AffordanceNet::encode(ParamScope& scope, Var x) const { return enc(scope, x); }

AffordanceNet::Out AffordanceNet::forward(ParamScope& scope, Var x) const {
  Var v = enc(scope, x);
  Var z = l2_normalize_rows(proj(scope, v));
  return {v, z};
}

std::pair<Tensor, Tensor> AffordanceNet::embed(const Tensor& x) const {
  Tape tape;
  tape.set_grad_enabled(false);
  auto& self = const_cast<AffordanceNet&>(*this);
  ParamScope scope(tape, self.store);
  auto out = forward(scope, tape.constant(x));
  return {out.v.value(), out.z.value()};
}

GoalAssociator GoalAssociator::create(const TamConfig& config, std::uint64_t seed, bool goal_conditioned) {
  config.validate();
  std::mt19937_64 rng(seed);
  GoalAssociator g;
  g.config = config;
  g.goal_conditioned = goal_conditioned;
  std::size_t in = 2 * config.embed_dim;
  if (goal_conditioned) {
    g.goal_table = g.store.add("assoc.goal_embedding", {config.goal_count, config.goal_embed_dim}, Init::kNormalSmall,
                               rng);
    in += config.goal_embed_dim;
  }
  g.mlp = Mlp::create(g.store, "assoc.mlp", {in, config.assoc_hidden, config.assoc_hidden, 1}, rng);
  return g;
}

Var GoalAssociator::logits(ParamScope& scope, Var vi, Var vj, std::span<const std::size_t> goals) const {
  std::vector<Var> parts{vi, vj};
  if (goal_conditioned) {
    for (auto g : goals) {
      if (g >= config.goal_count) throw ContractError("goal id " + std::to_string(g) + " outside vocabulary");
    }
    parts.push_back(embedding(scope(goal_table), goals));
  }
  return mlp(scope, concat(parts, 1));
}

double GoalAssociator::score(std::span<const double> vi, std::span<const double> vj, std::size_t goal) const {
  if (goal >= config.goal_count) throw ContractError("goal id " + std::to_string(goal) + " outside vocabulary");
  const std::size_t d = config.embed_dim;
  if (vi.size() != d || vj.size() != d) throw DimensionError("goal association: embedding size mismatch");
  const Tensor logit = run_no_grad([&](Tape& tape) {
    ParamScope scope(tape, const_cast<ParameterStore&>(store));
    const std::size_t goals[] = {goal};
    return logits(scope, tape.constant(Tensor({1, d}, {vi.begin(), vi.end()})),
                  tape.constant(Tensor({1, d}, {vj.begin(), vj.end()})), goals);
  });
  return 1.0 / (1.0 + std::exp(-logit[0]));
}

LocalizationNet LocalizationNet::create(const TamConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  LocalizationNet n;
  n.config = config;
  n.branch_mlp = Mlp::create(n.store, "loc.branch", {config.feature_dim, config.loc_hidden, config.key_dim}, rng);
  n.u = n.store.add("loc.head.log_weight", {config.key_dim}, Init::kZeros, rng);
  n.a = n.store.add("loc.head.bias", {1}, Init::kZeros, rng);
  // Zero distance scale: every pair scores sigmoid(a) until training.
  n.c = n.store.add("loc.head.scale", {1}, Init::kZeros, rng);
  return n;
}

Var LocalizationNet::branch(ParamScope& scope, Var frames) const { return branch_mlp(scope, frames); }

Var LocalizationNet::pair_logits(ParamScope& scope, Var e1, Var e2) const {
  const std::size_t d = config.key_dim;
  Var weighted = matmul(square(sub(e1, e2)), reshape(exp(scope(u)), {d, 1}));
  Var dist = matmul(weighted, reshape(scope(c), {1, 1}));
  return add_rowwise(negate(dist), scope(a));
}

Tensor LocalizationNet::embed(const Tensor& frames) const {
  return run_no_grad([&](Tape& tape) {
    ParamScope scope(tape, const_cast<ParameterStore&>(store));
    return branch(scope, tape.constant(frames));
  });
}

std::vector<double> LocalizationNet::embed_one(std::span<const double> frame) const {
  if (frame.size() != config.feature_dim) throw DimensionError("localization: frame size mismatch");
  const auto t = embed(Tensor({1, frame.size()}, {frame.begin(), frame.end()}));
  return t.storage();
}

LocalizationNet::Head LocalizationNet::head() const {
  Head h;
  for (double x : store[u].value.values()) h.weight.push_back(std::exp(x));
  h.bias = store[a].value[0];
  h.scale = store[c].value[0];
  return h;
}

double LocalizationNet::Head::logit(std::span<const double> e1, std::span<const double> e2) const {
  double acc = 0.0;
  for (std::size_t d = 0; d < weight.size(); ++d) {
    const double diff = e1[d] - e2[d];
    acc += weight[d] * (diff * diff);
  }
  return bias - scale * acc;
}

double LocalizationNet::score_embeddings(std::span<const double> e1, std::span<const double> e2) const {
  if (e1.size() != config.key_dim || e2.size() != config.key_dim) {
    throw DimensionError("localization: key size mismatch");
  }
  return 1.0 / (1.0 + std::exp(-head().logit(e1, e2)));
}

double LocalizationNet::score(std::span<const double> f1, std::span<const double> f2) const {
  return score_embeddings(embed_one(f1), embed_one(f2));
}

void save_network(const std::filesystem::path& path, const ParameterStore& store, const TamConfig& config,
                  const std::string& kind, const std::string& dataset_sha256, const nlohmann::json& extra) {
  save_checkpoint(path, store,
                  {{"kind", kind}, {"config", config}, {"dataset_sha256", dataset_sha256}, {"extra", extra}});
}

LoadedNetwork load_network(const std::filesystem::path& path, const std::string& expected_kind) {
  auto ck = load_checkpoint(path);
  LoadedNetwork n;
  n.store = std::move(ck.store);
  try {
    n.kind = ck.metadata.at("kind").get<std::string>();
    n.config = ck.metadata.at("config").get<TamConfig>();
    n.dataset_sha256 = ck.metadata.at("dataset_sha256").get<std::string>();
    n.extra = ck.metadata.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint '" + path.string() + "' lacks network metadata: " + e.what());
  }
  if (n.kind != expected_kind) {
    throw ProvenanceError("checkpoint '" + path.string() + "' holds a " + n.kind + " network, expected " +
                          expected_kind);
  }
  return n;
}

AffordanceNet load_affordance(const LoadedNetwork& n) {
  auto net = AffordanceNet::create(n.config, 0);
  assign_parameters(net.store, n.store);
  return net;
}

GoalAssociator load_goal_associator(const LoadedNetwork& n) {
  auto net = GoalAssociator::create(n.config, 0, n.extra.value("goal_conditioned", true));
  assign_parameters(net.store, n.store);
  return net;
}

LocalizationNet load_localization(const LoadedNetwork& n) {
  auto net = LocalizationNet::create(n.config, 0);
  assign_parameters(net.store, n.store);
  return net;
}

}  // namespace tamplan::tam
