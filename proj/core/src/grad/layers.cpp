#include "tamplan/grad/layers.hpp"

#include "tamplan/common/errors.hpp"

namespace tamplan::grad {

Var ParamScope::operator()(std::size_t index) {
  auto& v = bound_.at(index);
  if (!v.valid()) v = tape_.parameter(store_[index]);
  return v;
}

Linear Linear::create(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                      std::mt19937_64& rng, bool with_bias) {
  Linear l;
  l.in = in;
  l.out = out;
  l.has_bias = with_bias;
  l.weight = store.add(name + ".weight", {in, out}, Init::kXavierUniform, rng);
  if (with_bias) l.bias = store.add(name + ".bias", {out}, Init::kZeros, rng);
  return l;
}

Var Linear::operator()(ParamScope& scope, Var x) const {
  Var y = matmul(x, scope(weight));
  return has_bias ? add_rowwise(y, scope(bias)) : y;
}

Mlp Mlp::create(ParameterStore& store, const std::string& name, const std::vector<std::size_t>& dims,
                std::mt19937_64& rng) {
  if (dims.size() < 2) throw ConfigError("mlp: need at least input and output dims");
  Mlp m;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    m.layers.push_back(Linear::create(store, name + "." + std::to_string(i), dims[i], dims[i + 1], rng));
  }
  return m;
}

Var Mlp::operator()(ParamScope& scope, Var x) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i](scope, x);
    if (i + 1 < layers.size()) x = relu(x);
  }
  return x;
}

Tensor stack_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no rows");
  const std::size_t c = rows.front().size();
  std::vector<double> vals;
  vals.reserve(rows.size() * c);
  for (const auto& r : rows) {
    if (r.size() != c) throw DimensionError("stack_rows: ragged rows");
    vals.insert(vals.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), c}, std::move(vals));
}

}  // namespace tamplan::grad
