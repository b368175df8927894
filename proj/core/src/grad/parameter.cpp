#include "tamplan/grad/parameter.hpp"

#include <cmath>
#include <utility>

#include "tamplan/common/errors.hpp"
#include "tamplan/common/hash.hpp"

namespace tamplan::grad {

void Parameter::zero_grad() {
  if (grad.shape() != value.shape()) grad = Tensor(value.shape());
  for (auto& g : grad.values()) g = 0.0;
  has_grad = false;
}

std::size_t ParameterStore::add(std::string name, Shape shape, Init init, std::mt19937_64& rng) {
  Tensor t(shape);
  switch (init) {
    case Init::kZeros:
      break;
    case Init::kOnes:
      for (auto& v : t.values()) v = 1.0;
      break;
    case Init::kXavierUniform: {
      // Vectors get fan_in = fan_out = length.
      const double fan_in = static_cast<double>(shape.size() == 2 ? shape[0] : shape[0]);
      const double fan_out = static_cast<double>(shape.size() == 2 ? shape[1] : shape[0]);
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : t.values()) v = dist(rng);
      break;
    }
    case Init::kNormalSmall: {
      std::normal_distribution<double> dist(0.0, 0.02);
      for (auto& v : t.values()) v = dist(rng);
      break;
    }
  }
  return add(std::move(name), std::move(t));
}

std::size_t ParameterStore::add(std::string name, Tensor value) {
  if (find(name) != nullptr) throw ContractError("parameter store: duplicate name " + name);
  Parameter p;
  p.name = std::move(name);
  p.grad = Tensor(value.shape());
  p.value = std::move(value);
  params_.push_back(std::move(p));
  return params_.size() - 1;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

Parameter* ParameterStore::find(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

std::string ParameterStore::content_hash() const {
  Sha256 h;
  for (const auto& p : params_) {
    h.update(p.name);
    h.update_u64(p.value.rank());
    for (auto d : p.value.shape()) h.update_u64(d);
    h.update_doubles(p.value.values());
  }
  return h.hex_digest();
}

}  // namespace tamplan::grad
