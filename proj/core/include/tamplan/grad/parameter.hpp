#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tamplan/grad/tensor.hpp"

namespace tamplan::grad {

/// A learned tensor. `grad` always has the value's shape; `has_grad` records
/// whether a backward pass has populated it since the last optimizer step.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool has_grad = false;

  void zero_grad();
};

enum class Init { kXavierUniform, kZeros, kOnes, kNormalSmall };

/// Ordered, named parameter collection owned by one network. Layers refer to
/// parameters by index so that a store can be copied with its network.
class ParameterStore {
 public:
  std::size_t add(std::string name, Shape shape, Init init, std::mt19937_64& rng);
  std::size_t add(std::string name, Tensor value);

  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }

  const Parameter* find(const std::string& name) const;
  Parameter* find(const std::string& name);

  void zero_grad();

  /// SHA-256 over names, shapes and values, in order.
  std::string content_hash() const;

 private:
  std::vector<Parameter> params_;
};

}  // namespace tamplan::grad
