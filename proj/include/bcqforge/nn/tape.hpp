#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "bcqforge/error.hpp"
#include "bcqforge/nn/tensor.hpp"

namespace bcqforge::nn {

/// A trainable tensor with its gradient accumulator. `name` is the checkpoint path.
struct Parameter {
  std::string name;
  Tensor value;
  /// Accumulator written by Tape::backward; mutable so frozen networks stay const.
  mutable Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() const {
    if (!grad.same_shape(value)) grad = Tensor(value.shape());
    grad.fill(0.0);
  }
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode gradient tape. Each op appends a node holding its value and, when any input
/// needs a gradient, a closure that pushes the node's output gradient back to its inputs.
/// A tape built with `record_gradients = false` only evaluates values.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  explicit Tape(bool record_gradients = true) : recording_(record_gradients) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
    return Var(this, nodes_.size() - 1);
  }

  Var param(const Parameter& p) {
    nodes_.push_back(Node{p.value, {}, {}, recording_ ? &p : nullptr, recording_});
    return Var(this, nodes_.size() - 1);
  }

  /// Appends an op result. `fn` runs during backward only if some input needs a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    bool needs = false;
    if (recording_) {
      for (const Var& in : inputs) {
        check_owned(in);
        needs = needs || nodes_[in.id()].needs_grad;
      }
    }
    nodes_.push_back(Node{std::move(value), {}, needs ? std::move(fn) : BackwardFn{}, nullptr, needs});
    return Var(this, nodes_.size() - 1);
  }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(const Var& v) const { return nodes_[v.id()].needs_grad; }

  /// Gradient accumulator for a node, allocated as zeros on first use.
  Tensor& grad(const Var& v) {
    Node& n = nodes_[v.id()];
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape());
    return n.grad;
  }

  /// Accumulates d(loss)/d(parameter) into every Parameter::grad reachable from `loss`.
  void backward(const Var& loss) {
    if (loss.tape() != this || loss.id() >= nodes_.size()) {
      throw UsageError("backward: loss is not on this tape");
    }
    if (nodes_[loss.id()].value.size() != 1) {
      throw UsageError("backward: loss must be a scalar, got shape " +
                       shape_string(nodes_[loss.id()].value.shape()));
    }
    if (!recording_ || !nodes_[loss.id()].needs_grad) return;
    grad(loss)[0] += 1.0;
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.needs_grad || n.grad.empty()) continue;
      if (n.backward) n.backward(*this, n.grad);
      if (n.param != nullptr) {
        Tensor& pg = n.param->grad;
        if (!pg.same_shape(n.param->value)) pg = Tensor(n.param->value.shape());
        for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
      }
    }
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    const Parameter* param = nullptr;
    bool needs_grad = false;
  };

  void check_owned(const Var& v) const {
    if (v.tape() != this) throw UsageError("tape op: input belongs to a different tape");
  }

  bool recording_;
  std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

}  // namespace bcqforge::nn
