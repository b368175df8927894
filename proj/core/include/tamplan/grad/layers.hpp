#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "tamplan/grad/ops.hpp"
#include "tamplan/grad/parameter.hpp"

namespace tamplan::grad {

/// Binds the parameters of one store onto a tape, at most once each.
class ParamScope {
 public:
  ParamScope(Tape& tape, ParameterStore& store) : tape_(tape), store_(store), bound_(store.size()) {}

  Var operator()(std::size_t index);
  Tape& tape() { return tape_; }

 private:
  Tape& tape_;
  ParameterStore& store_;
  std::vector<Var> bound_;
};

struct Linear {
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::size_t in = 0;
  std::size_t out = 0;
  bool has_bias = true;

  static Linear create(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
                       std::mt19937_64& rng, bool with_bias = true);
  /// x: (n x in) -> (n x out)
  Var operator()(ParamScope& scope, Var x) const;
};

/// ReLU between layers, identity after the last.
struct Mlp {
  std::vector<Linear> layers;

  static Mlp create(ParameterStore& store, const std::string& name, const std::vector<std::size_t>& dims,
                    std::mt19937_64& rng);
  Var operator()(ParamScope& scope, Var x) const;
  std::size_t in_dim() const { return layers.front().in; }
  std::size_t out_dim() const { return layers.back().out; }
};

/// Row-major (rows x cols) tensor from a list of equally sized rows.
Tensor stack_rows(const std::vector<std::vector<double>>& rows);

}  // namespace tamplan::grad
