#include "tamplan/grad/tape.hpp"

#include <algorithm>
#include <utility>

#include "tamplan/common/errors.hpp"

namespace tamplan::grad {

const Tensor& Var::value() const { return tape_->value(id_); }

const Shape& Var::shape() const { return tape_->value(id_).shape(); }

Tensor Var::grad() const {
  Tensor g(shape());
  const auto src = tape_->grad_of(id_);
  if (!src.empty()) std::copy(src.begin(), src.end(), g.values().begin());
  return g;
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  Node n;
  n.op = "variable";
  n.value = std::move(value);
  n.requires_grad = grad_enabled_;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.op = "parameter";
  n.value = p.value;
  n.requires_grad = grad_enabled_;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  if (grad_enabled_) {
    n.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                  [this](const Var& v) { return nodes_[v.id()].requires_grad; });
    if (n.requires_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

std::span<double> Tape::grad_buffer(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.numel(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (nodes_.empty()) throw ContractError("backward: empty tape");
  if (loss.value().numel() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }
  for (auto& n : nodes_) n.grad.clear();
  visits_.clear();
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    visits_.push_back(i);
    n.backward(*this, i);
  }
  for (auto& n : nodes_) {
    if (n.param == nullptr || !n.requires_grad) continue;
    auto& p = *n.param;
    if (p.grad.shape() != p.value.shape()) p.grad = Tensor(p.value.shape());
    if (!n.grad.empty()) {
      auto g = p.grad.values();
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
    }
    p.has_grad = true;
  }
}

}  // namespace tamplan::grad
