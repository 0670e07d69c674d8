#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string>
#include <unordered_map>

#include "amn/errors.hpp"
#include "amn/tensor.hpp"

namespace amn {

// Multiply-accumulate counter for the forward pass of the current thread.
// Only matmul, elementwise mul and the attention context sum contribute.
inline std::uint64_t& mac_counter() {
  thread_local std::uint64_t count = 0;
  return count;
}

template <typename T>
class Tape;

// Handle to a node on a Tape. Cheap to copy; only valid while its Tape lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor<T>& value() const { return tape_->value(id_); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Define-by-run record of forward operations. Nodes are appended in execution
// order, so every node's inputs precede it. A Tape is single-use: one
// backward() call, then it is discarded.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  Var<T> constant(Tensor<T> value) { return push(std::move(value), false, nullptr); }

  Var<T> variable(Tensor<T> value, bool requires_grad = true) {
    return push(std::move(value), requires_grad && grad_enabled_, nullptr);
  }

  // Registers a parameter array. The same array registered twice yields the
  // same node, so tied parameters accumulate a single gradient.
  Var<T> param(const Tensor<T>& p) {
    auto it = params_.find(&p);
    if (it != params_.end()) return Var<T>(this, it->second);
    Var<T> v = push(p, grad_enabled_, nullptr);
    params_.emplace(&p, v.id());
    return v;
  }

  // Appends the result of an op. `inputs` must already be on this tape.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> inputs, BackwardFn fn,
                const char* op) {
    bool needs_grad = false;
    for (const auto& in : inputs) {
      if (in.tape() != this) throw ContractError(std::string(op) + ": operand from another tape");
      needs_grad = needs_grad || nodes_[in.id()].requires_grad;
    }
    return record_checked(std::move(value), needs_grad, std::move(fn), op);
  }

  Var<T> record_many(Tensor<T> value, const std::vector<Var<T>>& inputs, BackwardFn fn,
                     const char* op) {
    bool needs_grad = false;
    for (const auto& in : inputs) {
      if (in.tape() != this) throw ContractError(std::string(op) + ": operand from another tape");
      needs_grad = needs_grad || nodes_[in.id()].requires_grad;
    }
    return record_checked(std::move(value), needs_grad, std::move(fn), op);
  }

  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  bool requires_grad(Var<T> v) const { return requires_grad(v.id()); }

  // Gradient accumulator of a node, zero-allocated on first touch.
  Tensor<T>& grad_ref(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor<T>(n.value.rows(), n.value.cols());
    return n.grad;
  }

  bool has_grad(Var<T> v) const { return !nodes_.at(v.id()).grad.empty(); }
  const Tensor<T>& grad(Var<T> v) const { return nodes_.at(v.id()).grad; }

  // Gradient of a registered parameter, or nullptr if it never reached the loss.
  const Tensor<T>* param_grad(const Tensor<T>& p) const {
    auto it = params_.find(&p);
    if (it == params_.end()) return nullptr;
    const Node& n = nodes_[it->second];
    return n.grad.empty() ? nullptr : &n.grad;
  }

  void backward(Var<T> loss) {
    if (loss.tape() != this) throw ContractError("backward: loss is not on this tape");
    if (backward_done_) throw ContractError("backward: already run on this tape");
    const Tensor<T>& lv = nodes_[loss.id()].value;
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ContractError("backward: loss must be scalar, got " + lv.shape_str());
    }
    backward_done_ = true;
    if (!nodes_[loss.id()].requires_grad) return;
    grad_ref(loss.id())[0] = T(1);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
      n.backward(*this, i);
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var<T> push(Tensor<T> value, bool requires_grad, BackwardFn fn) {
    nodes_.push_back(Node{std::move(value), Tensor<T>(), requires_grad, std::move(fn)});
    return Var<T>(this, nodes_.size() - 1);
  }

  Var<T> record_checked(Tensor<T> value, bool needs_grad, BackwardFn fn, const char* op) {
    for (const T x : value.values()) {
      if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite value in output");
    }
    const bool rg = needs_grad && grad_enabled_;
    return push(std::move(value), rg, rg ? std::move(fn) : BackwardFn());
  }

  std::deque<Node> nodes_;
  std::unordered_map<const void*, std::size_t> params_;
  bool grad_enabled_;
  bool backward_done_ = false;
};

}  // namespace amn
