#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "tamplan/grad/parameter.hpp"
#include "tamplan/grad/tensor.hpp"

namespace tamplan::grad {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
/// tape is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const;
  /// Gradient accumulated by the last backward pass (zeros if unreached).
  Tensor grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records operations in application order and replays them in reverse for
/// reverse-mode differentiation. One tape per forward pass; not thread-safe.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf whose gradient is kept on the tape (e.g. an embedding being optimized).
  Var variable(Tensor value);
  /// Leaf bound to a parameter; backward accumulates into `p.grad`.
  Var parameter(Parameter& p);

  /// Reverse pass from a scalar loss. Throws ContractError for non-scalar loss.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  std::string_view op_name(std::size_t id) const { return nodes_[id].op; }
  /// Node ids whose backward function ran during the last backward pass, in visit order.
  const std::vector<std::size_t>& last_backward_visits() const { return visits_; }

  /// Disabling gradient recording skips saving backward closures.
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
  bool grad_enabled() const { return grad_enabled_; }

  // Interface used by op implementations.
  Var record(std::string_view op, Tensor value, std::span<const Var> inputs, BackwardFn fn);
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::span<const double> grad_of(std::size_t id) const { return nodes_[id].grad; }
  /// Mutable gradient buffer; allocated zero-filled on first access.
  std::span<double> grad_buffer(std::size_t id);

 private:
  struct Node {
    std::string_view op;
    Tensor value;
    std::vector<double> grad;
    bool requires_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  std::vector<Node> nodes_;
  std::vector<std::size_t> visits_;
  bool grad_enabled_ = true;
};

}  // namespace tamplan::grad
